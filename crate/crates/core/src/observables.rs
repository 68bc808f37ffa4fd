//! Quantities read off a trajectory: emitted-photon densities, integrated
//! emission probabilities, population inversion and the loss budget.

use std::f64::consts::TAU;

use crate::evolution::Trajectory;

/// Density at the end of the window above which the tail counts as truncated
/// (probability per µs).
pub const TAIL_WARNING_DENSITY: f64 = 1e-4;

/// Composite trapezoidal rule.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// Composite Simpson rule on a uniform grid, falling back to the trapezoid
/// for a trailing odd interval.
pub fn simpson_uniform(step: f64, values: &[f64]) -> f64 {
    let n = values.len();
    if n < 3 {
        return values.windows(2).map(|v| 0.5 * step * (v[0] + v[1])).sum();
    }
    let pairs = (n - 1) / 2;
    let mut acc = 0.0;
    for k in 0..pairs {
        let i = 2 * k;
        acc += step / 3.0 * (values[i] + 4.0 * values[i + 1] + values[i + 2]);
    }
    if (n - 1) % 2 == 1 {
        acc += 0.5 * step * (values[n - 2] + values[n - 1]);
    }
    acc
}

/// Photon emission rates `2κ⟨â†â⟩` and `2κ⟨b̂†b̂⟩` (per µs), κ in MHz.
pub fn emission_density(traj: &Trajectory, kappa_mhz: f64) -> (Vec<f64>, Vec<f64>) {
    let rate = 2.0 * TAU * kappa_mhz;
    let scale = |n: &Vec<f64>| n.iter().map(|x| rate * x.max(0.0)).collect();
    (scale(&traj.photons_plus), scale(&traj.photons_minus))
}

/// `pop_final(t) − pop_initial(t)`.
pub fn inversion(traj: &Trajectory, initial: usize, target: usize) -> Vec<f64> {
    traj.populations[target]
        .iter()
        .zip(&traj.populations[initial])
        .map(|(f, i)| f - i)
        .collect()
}

/// Where the probability ends up after the pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBudget {
    /// `1 − tr ρ(T)`: spontaneous emission into unmodeled levels.
    pub sink_trace_deficit: f64,
    pub residual_initial: f64,
    pub target: f64,
    /// Everything else still inside the model (excited levels, `m_F=0`).
    pub modeled_other_levels: f64,
}

impl LossBudget {
    /// Sink deficit plus population stranded in other modeled levels.
    pub fn total_loss(&self) -> f64 {
        self.sink_trace_deficit + self.modeled_other_levels
    }

    /// The four components; sums to one by construction.
    pub fn sum(&self) -> f64 {
        self.sink_trace_deficit + self.residual_initial + self.target + self.modeled_other_levels
    }
}

pub fn loss_budget(traj: &Trajectory, initial: usize, target: usize) -> LossBudget {
    let last = traj.len() - 1;
    let trace = traj.trace[last];
    let residual_initial = traj.populations[initial][last];
    let target_pop = traj.populations[target][last];
    LossBudget {
        sink_trace_deficit: 1.0 - trace,
        residual_initial,
        target: target_pop,
        modeled_other_levels: trace - residual_initial - target_pop,
    }
}

/// Probability that left through the sink, `∫ 2 Σ_i s_i pop_i(t) dt`, from
/// per-level sink rates (rad/µs).
pub fn integrated_sink_flux(traj: &Trajectory, level_sink_rates: &[f64]) -> f64 {
    let flux: Vec<f64> = (0..traj.len())
        .map(|k| {
            2.0 * level_sink_rates
                .iter()
                .zip(&traj.populations)
                .map(|(s, pop)| s * pop[k])
                .sum::<f64>()
        })
        .collect();
    simpson_uniform(traj.step, &flux)
}

/// Everything reported for one pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionRecord {
    pub times: Vec<f64>,
    pub density_sigma_plus: Vec<f64>,
    pub density_sigma_minus: Vec<f64>,
    pub efficiency_sigma_plus: f64,
    pub efficiency_sigma_minus: f64,
    pub inversion: Vec<f64>,
    pub budget: LossBudget,
    pub loss_total: f64,
    /// Largest emission density at the end of the window.
    pub tail_density: f64,
}

impl EmissionRecord {
    pub fn new(traj: &Trajectory, kappa_mhz: f64, initial: usize, target: usize) -> Self {
        let (plus, minus) = emission_density(traj, kappa_mhz);
        let tail_density = plus.last().copied().unwrap_or(0.0).max(minus.last().copied().unwrap_or(0.0));
        let budget = loss_budget(traj, initial, target);
        Self {
            efficiency_sigma_plus: trapezoid(&traj.times, &plus),
            efficiency_sigma_minus: trapezoid(&traj.times, &minus),
            times: traj.times.clone(),
            density_sigma_plus: plus,
            density_sigma_minus: minus,
            inversion: inversion(traj, initial, target),
            loss_total: budget.total_loss(),
            budget,
            tail_density,
        }
    }

    pub fn tail_truncated(&self) -> bool {
        self.tail_density > TAIL_WARNING_DENSITY
    }

    pub fn final_inversion(&self) -> f64 {
        *self.inversion.last().unwrap()
    }

    /// Sum of both polarisation densities.
    pub fn density_total(&self) -> Vec<f64> {
        self.density_sigma_plus.iter().zip(&self.density_sigma_minus).map(|(a, b)| a + b).collect()
    }
}

/// `(P⁺, P⁻)`; warns when the window cut off a non-negligible tail.
pub fn emission_probability(record: &EmissionRecord) -> (f64, f64) {
    if record.tail_truncated() {
        log::warn!(
            "emission density {:.3e}/µs at the end of the window exceeds {TAIL_WARNING_DENSITY:e}; lengthen the tail",
            record.tail_density
        );
    }
    (record.efficiency_sigma_plus, record.efficiency_sigma_minus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{integrate_master, IntegratorOptions, MasterEquation, PulseShape};
    use crate::ideal::{build_cavity_dissipator, ideal_space};
    use crate::operator::{DensityMatrix, OperatorMatrix};

    #[test]
    fn quadrature_rules() {
        let t: Vec<f64> = (0..=100).map(|k| k as f64 * 0.01).collect();
        let v: Vec<f64> = t.iter().map(|x| x * x).collect();
        assert!((trapezoid(&t, &v) - 1.0 / 3.0).abs() < 2e-5);
        assert!((simpson_uniform(0.01, &v) - 1.0 / 3.0).abs() < 1e-14);
        let odd = &v[..100];
        let exact = 0.99f64.powi(3) / 3.0;
        assert!((simpson_uniform(0.01, odd) - exact).abs() < 1e-4);
    }

    fn decay_trajectory(state: (usize, usize), t_end: f64) -> (Trajectory, DensityMatrix) {
        let space = ideal_space(1).unwrap();
        let n = space.total_dim();
        let eq = MasterEquation::new(
            space.clone(),
            OperatorMatrix::zeros(n, n),
            OperatorMatrix::zeros(n, n),
            build_cavity_dissipator(1.25, &space).unwrap(),
        )
        .unwrap();
        let rho0 = DensityMatrix::product_state(&space, "minus", state.0, state.1).unwrap();
        let opts = IntegratorOptions { t_end, ..Default::default() };
        let traj = integrate_master(&eq, &rho0, &PulseShape::sin_squared(1.5), &opts).unwrap();
        (traj, rho0)
    }

    #[test]
    fn empty_cavity_emits_nothing() {
        let (traj, _) = decay_trajectory((0, 0), 0.5);
        let (p, m) = emission_density(&traj, 1.25);
        assert!(p.iter().chain(&m).all(|x| *x == 0.0));
    }

    #[test]
    fn one_photon_decay_integrates_to_closed_form() {
        let t_end = 0.4;
        let (traj, _) = decay_trajectory((1, 0), t_end);
        let rec = EmissionRecord::new(&traj, 1.25, 0, 2);
        let expected = 1.0 - (-2.0 * TAU * 1.25 * t_end).exp();
        // trapezoid error ~ (h·2·2πκ)²/12 relative
        assert!((rec.efficiency_sigma_plus - expected).abs() < 5e-5);
        assert_eq!(rec.efficiency_sigma_minus, 0.0);
        assert!(rec.tail_truncated());
        let (traj, _) = decay_trajectory((0, 1), 1.5);
        let rec = EmissionRecord::new(&traj, 1.25, 0, 2);
        assert!((rec.efficiency_sigma_minus - 1.0).abs() < 5e-5);
        assert!(!rec.tail_truncated());
    }

    #[test]
    fn ideal_budget_has_no_deficit() {
        let (traj, _) = decay_trajectory((1, 0), 0.3);
        let b = loss_budget(&traj, 2, 0);
        assert!(b.sink_trace_deficit.abs() < 1e-12);
        assert!((b.sum() - 1.0).abs() < 1e-15);
        assert!((b.target - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inversion_starts_at_minus_one() {
        let (traj, _) = decay_trajectory((0, 0), 0.1);
        let inv = inversion(&traj, 0, 2);
        assert!(inv.iter().all(|x| *x == -1.0));
    }
}
