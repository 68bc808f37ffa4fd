//! Detuning sweeps and the equal-efficiency crossing finder.
//!
//! Grid points are independent and run on the rayon pool; results are
//! collected by grid index, so output does not depend on scheduling.

use rayon::prelude::*;

use crate::evolution::{integrate_master, EnvelopeSampling, IntegratorOptions, PulseShape, Trajectory, DEFAULT_DT};
use crate::model::{Experiment, GroundState, ModelError, ModelSpec, Polarisation};
use crate::observables::{emission_probability, EmissionRecord, LossBudget};

/// Numerical controls shared by every trajectory of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSettings {
    pub pulse: PulseShape,
    pub dt: f64,
    /// Largest step the integrator accepts.
    pub dt_max: f64,
    /// Window after the pulse, in photon lifetimes `1/(2·2πκ)`.
    pub tail_lifetimes: f64,
    pub photon_cutoff: usize,
    pub sampling: EnvelopeSampling,
    /// Full density matrix kept every this many steps (0: none).
    pub store_every: usize,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            pulse: PulseShape::sin_squared(1.5),
            dt: DEFAULT_DT,
            dt_max: DEFAULT_DT,
            tail_lifetimes: 5.0,
            photon_cutoff: 1,
            sampling: EnvelopeSampling::StepMidpoint,
            store_every: 10,
        }
    }
}

impl SimulationSettings {
    pub fn integrator_options(&self, kappa_mhz: f64) -> IntegratorOptions {
        IntegratorOptions {
            sampling: self.sampling,
            store_every: self.store_every,
            dt_max: self.dt_max,
            ..IntegratorOptions::for_pulse(&self.pulse, kappa_mhz, self.tail_lifetimes).with_dt(self.dt)
        }
    }

    /// Settings for sweeps: no stored density matrices.
    pub fn for_scans(&self) -> Self {
        Self { store_every: 0, ..self.clone() }
    }
}

/// One integrated pulse with everything derived from it.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub experiment: Experiment,
    pub trajectory: Trajectory,
    pub record: EmissionRecord,
}

pub fn simulate(model: &ModelSpec, settings: &SimulationSettings) -> Result<Simulation, ModelError> {
    let experiment = model.experiment(settings.photon_cutoff)?;
    let opts = settings.integrator_options(experiment.kappa);
    let trajectory = integrate_master(&experiment.equation, &experiment.rho0, &settings.pulse, &opts)?;
    let record = EmissionRecord::new(&trajectory, experiment.kappa, experiment.initial_level, experiment.target_level);
    Ok(Simulation { experiment, trajectory, record })
}

/// Scalar summary of one pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseOutcome {
    pub p_plus: f64,
    pub p_minus: f64,
    pub final_inversion: f64,
    pub budget: LossBudget,
    pub tail_truncated: bool,
}

impl PulseOutcome {
    pub fn p(&self, pol: Polarisation) -> f64 {
        match pol {
            Polarisation::SigmaPlus => self.p_plus,
            Polarisation::SigmaMinus => self.p_minus,
        }
    }

    /// Expected photon count, both polarisations.
    pub fn p_total(&self) -> f64 {
        self.p_plus + self.p_minus
    }

    pub fn loss_total(&self) -> f64 {
        self.budget.total_loss()
    }
}

pub type RunResult = Result<PulseOutcome, String>;

pub fn evaluate(model: &ModelSpec, settings: &SimulationSettings) -> RunResult {
    let sim = simulate(model, settings).map_err(|e| e.to_string())?;
    let (p_plus, p_minus) = emission_probability(&sim.record);
    Ok(PulseOutcome {
        p_plus,
        p_minus,
        final_inversion: sim.record.final_inversion(),
        budget: sim.record.budget,
        tail_truncated: sim.record.tail_truncated(),
    })
}

fn value(run: &RunResult, f: impl Fn(&PulseOutcome) -> f64) -> f64 {
    run.as_ref().map(f).unwrap_or(f64::NAN)
}

/// Four pulses at one cavity–atom detuning. The pump is tuned to the Λ
/// resonance for the named photon; "wrong" runs start in the other ground
/// state under the same pump, where only cycling and off-resonant
/// processes can emit.
#[derive(Debug, Clone, PartialEq)]
pub struct CavityPoint {
    pub delta_ca: f64,
    pub lambda_plus: RunResult,
    pub lambda_minus: RunResult,
    pub wrong_plus: RunResult,
    pub wrong_minus: RunResult,
}

impl CavityPoint {
    /// σ⁺ emission from |+⟩ with the σ⁺ Λ pump.
    pub fn efficiency_plus(&self) -> f64 {
        value(&self.lambda_plus, |o| o.p_plus)
    }

    /// σ⁻ emission from |−⟩ with the σ⁻ Λ pump.
    pub fn efficiency_minus(&self) -> f64 {
        value(&self.lambda_minus, |o| o.p_minus)
    }

    /// Total emission from |−⟩ under the σ⁺ Λ pump.
    pub fn wrong_efficiency_plus(&self) -> f64 {
        value(&self.wrong_plus, PulseOutcome::p_total)
    }

    /// Total emission from |+⟩ under the σ⁻ Λ pump.
    pub fn wrong_efficiency_minus(&self) -> f64 {
        value(&self.wrong_minus, PulseOutcome::p_total)
    }

    pub fn loss_plus(&self) -> f64 {
        value(&self.lambda_plus, PulseOutcome::loss_total)
    }

    pub fn loss_minus(&self) -> f64 {
        value(&self.lambda_minus, PulseOutcome::loss_total)
    }

    pub fn runs(&self) -> [(&'static str, &RunResult); 4] {
        [
            ("lambda_plus", &self.lambda_plus),
            ("lambda_minus", &self.lambda_minus),
            ("wrong_plus", &self.wrong_plus),
            ("wrong_minus", &self.wrong_minus),
        ]
    }

    pub fn failures(&self) -> Vec<String> {
        self.runs()
            .iter()
            .filter_map(|(name, r)| r.as_ref().err().map(|e| format!("{name}: {e}")))
            .collect()
    }
}

/// Cavity-detuning sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub model: ModelSpec,
    pub settings: SimulationSettings,
    pub points: Vec<CavityPoint>,
}

impl ScanResult {
    pub fn grid(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.delta_ca).collect()
    }

    pub fn failed_points(&self) -> Vec<(f64, Vec<String>)> {
        self.points
            .iter()
            .filter(|p| !p.failures().is_empty())
            .map(|p| (p.delta_ca, p.failures()))
            .collect()
    }

    pub fn point_at(&self, delta_ca: f64) -> Option<&CavityPoint> {
        self.points.iter().find(|p| (p.delta_ca - delta_ca).abs() < 1e-9)
    }
}

/// Uniform grid `start, start+step, …` up to `stop` inclusive.
pub fn uniform_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| start + k as f64 * step).collect()
}

pub fn default_cavity_grid(model: &ModelSpec) -> Vec<f64> {
    match model {
        ModelSpec::Ideal(_) => uniform_grid(-40.0, 40.0, 1.0),
        ModelSpec::Rubidium(_) => uniform_grid(-30.0, 100.0, 1.0),
    }
}

pub fn default_pump_grid() -> Vec<f64> {
    uniform_grid(-50.0, 50.0, 0.5)
}

fn check_grid(grid: &[f64]) -> Result<(), ModelError> {
    if grid.is_empty() || grid.iter().any(|x| !x.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ModelError::Parameter("scan grid must be finite and strictly ascending".into()));
    }
    Ok(())
}

pub fn cavity_point(model: &ModelSpec, settings: &SimulationSettings, delta_ca: f64) -> CavityPoint {
    let plus = model.tuned_for(delta_ca, Polarisation::SigmaPlus);
    let minus = model.tuned_for(delta_ca, Polarisation::SigmaMinus);
    CavityPoint {
        delta_ca,
        lambda_plus: evaluate(&plus.with_initial_state(GroundState::Plus), settings),
        lambda_minus: evaluate(&minus.with_initial_state(GroundState::Minus), settings),
        wrong_plus: evaluate(&plus.with_initial_state(GroundState::Minus), settings),
        wrong_minus: evaluate(&minus.with_initial_state(GroundState::Plus), settings),
    }
}

/// Sweeps Δ_ca with the pump re-tuned to Raman resonance at every point.
/// Failed runs are recorded per point and the scan carries on.
pub fn scan_cavity_detuning(
    model: &ModelSpec,
    settings: &SimulationSettings,
    grid: &[f64],
) -> Result<ScanResult, ModelError> {
    check_grid(grid)?;
    model.validate()?;
    let settings = settings.for_scans();
    let points: Vec<CavityPoint> = grid.par_iter().map(|&d| cavity_point(model, &settings, d)).collect();
    for p in &points {
        for f in p.failures() {
            log::warn!("Δ_ca = {} MHz: {f}", p.delta_ca);
        }
    }
    Ok(ScanResult { model: *model, settings, points })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PumpPoint {
    pub delta_cp: f64,
    pub from_plus: RunResult,
    pub from_minus: RunResult,
}

impl PumpPoint {
    pub fn failures(&self) -> Vec<String> {
        [("from_plus", &self.from_plus), ("from_minus", &self.from_minus)]
            .iter()
            .filter_map(|(name, r)| r.as_ref().err().map(|e| format!("{name}: {e}")))
            .collect()
    }
}

/// A local maximum of a sampled curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub position: f64,
    pub height: f64,
    /// Full width at half maximum, if both half-height crossings lie on the grid.
    pub fwhm: Option<f64>,
}

/// Pump-detuning sweep at fixed Δ_ca.
#[derive(Debug, Clone, PartialEq)]
pub struct PumpScanResult {
    pub model: ModelSpec,
    pub settings: SimulationSettings,
    pub delta_ca: f64,
    pub points: Vec<PumpPoint>,
}

impl PumpScanResult {
    pub fn grid(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.delta_cp).collect()
    }

    /// Emission of `pol` photons starting from `start`, NaN for failed runs.
    pub fn curve(&self, start: GroundState, pol: Polarisation) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| {
                let run = match start {
                    GroundState::Plus => &p.from_plus,
                    GroundState::Minus => &p.from_minus,
                };
                value(run, |o| o.p(pol))
            })
            .collect()
    }

    /// Total expected photon count from `start`.
    pub fn total_curve(&self, start: GroundState) -> Vec<f64> {
        let a = self.curve(start, Polarisation::SigmaPlus);
        let b = self.curve(start, Polarisation::SigmaMinus);
        a.iter().zip(&b).map(|(x, y)| x + y).collect()
    }

    pub fn peaks(&self, start: GroundState, pol: Polarisation, min_height: f64) -> Vec<Peak> {
        find_peaks(&self.grid(), &self.curve(start, pol), min_height)
    }
}

pub fn scan_pump_detuning(
    model: &ModelSpec,
    settings: &SimulationSettings,
    delta_ca: f64,
    grid: &[f64],
) -> Result<PumpScanResult, ModelError> {
    check_grid(grid)?;
    model.validate()?;
    let settings = settings.for_scans();
    let points: Vec<PumpPoint> = grid
        .par_iter()
        .map(|&dcp| {
            let m = model.with_cavity_and_pump(delta_ca, dcp);
            PumpPoint {
                delta_cp: dcp,
                from_plus: evaluate(&m.with_initial_state(GroundState::Plus), &settings),
                from_minus: evaluate(&m.with_initial_state(GroundState::Minus), &settings),
            }
        })
        .collect();
    for p in &points {
        for f in p.failures() {
            log::warn!("Δ_cp = {} MHz: {f}", p.delta_cp);
        }
    }
    Ok(PumpScanResult { model: *model, settings, delta_ca, points })
}

/// Local maxima above `min_height`, refined by a parabola through the three
/// samples around each maximum.
pub fn find_peaks(x: &[f64], y: &[f64], min_height: f64) -> Vec<Peak> {
    let n = y.len();
    let mut peaks = Vec::new();
    for i in 1..n.saturating_sub(1) {
        let (l, c, r) = (y[i - 1], y[i], y[i + 1]);
        if !(c > l && c >= r && c > min_height) {
            continue;
        }
        let denom = l - 2.0 * c + r;
        let (mut position, mut height) = (x[i], c);
        if denom < 0.0 {
            let shift = 0.5 * (l - r) / denom;
            let h = 0.5 * (x[i + 1] - x[i - 1]);
            position = x[i] + shift * h;
            height = c - 0.25 * (l - r) * shift;
        }
        let half = 0.5 * height;
        let left = (0..i).rev().find(|&k| y[k] < half).map(|k| interpolate(x[k], y[k], x[k + 1], y[k + 1], half));
        let right = (i + 1..n).find(|&k| y[k] < half).map(|k| interpolate(x[k - 1], y[k - 1], x[k], y[k], half));
        let fwhm = match (left, right) {
            (Some(a), Some(b)) => Some(b - a),
            _ => None,
        };
        peaks.push(Peak { position, height, fwhm });
    }
    peaks
}

fn interpolate(x0: f64, y0: f64, x1: f64, y1: f64, level: f64) -> f64 {
    x0 + (level - y0) * (x1 - x0) / (y1 - y0)
}

/// A detuning where σ⁺ and σ⁻ Λ emission are equally efficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingPoint {
    pub delta_ca: f64,
    /// Final bisection bracket width (MHz); zero for an exact grid hit.
    pub bracket: f64,
    pub p_plus: f64,
    pub p_minus: f64,
    pub wrong_plus: f64,
    pub wrong_minus: f64,
    pub loss_plus: f64,
    pub loss_minus: f64,
}

impl CrossingPoint {
    pub fn efficiency(&self) -> f64 {
        0.5 * (self.p_plus + self.p_minus)
    }

    pub fn max_wrong(&self) -> f64 {
        self.wrong_plus.max(self.wrong_minus)
    }

    pub fn max_loss(&self) -> f64 {
        self.loss_plus.max(self.loss_minus)
    }
}

/// Bracket width below which bisection may stop (MHz).
pub const CROSSING_RESOLUTION: f64 = 0.1;
/// Required |P⁺ − P⁻| at a returned crossing.
pub const CROSSING_BALANCE: f64 = 1e-3;

fn efficiency_difference(model: &ModelSpec, settings: &SimulationSettings, delta_ca: f64) -> Result<f64, ModelError> {
    let run = |pol: Polarisation| -> Result<f64, ModelError> {
        let m = model.tuned_for(delta_ca, pol).with_initial_state(pol.lambda_initial());
        evaluate(&m, settings).map(|o| o.p(pol)).map_err(ModelError::Parameter)
    };
    let (a, b) = rayon::join(|| run(Polarisation::SigmaPlus), || run(Polarisation::SigmaMinus));
    Ok(a? - b?)
}

/// Every sign change of `P⁺(Δ_ca) − P⁻(Δ_ca)` on `grid`, refined by bisection
/// until the bracket is at most 0.1 MHz and |P⁺ − P⁻| < 1e-3. All crossings
/// found are returned, however many there are.
pub fn find_equal_efficiency_detunings(
    model: &ModelSpec,
    settings: &SimulationSettings,
    grid: &[f64],
) -> Result<Vec<CrossingPoint>, ModelError> {
    check_grid(grid)?;
    model.validate()?;
    let settings = settings.for_scans();
    let diffs: Vec<f64> = grid
        .par_iter()
        .map(|&d| efficiency_difference(model, &settings, d))
        .collect::<Result<_, _>>()?;

    let exact = |d: f64| d.abs() < 1e-12;
    let mut roots = Vec::new();
    for i in 0..grid.len() {
        if exact(diffs[i]) {
            roots.push((grid[i], 0.0));
        } else if i + 1 < grid.len() && !exact(diffs[i + 1]) && diffs[i].signum() != diffs[i + 1].signum() {
            roots.push(bisect(model, &settings, (grid[i], diffs[i]), (grid[i + 1], diffs[i + 1]))?);
        }
    }
    roots
        .into_par_iter()
        .map(|(delta_ca, bracket)| {
            let p = cavity_point(model, &settings, delta_ca);
            if let Some(f) = p.failures().first() {
                return Err(ModelError::Parameter(format!("crossing at {delta_ca} MHz: {f}")));
            }
            Ok(CrossingPoint {
                delta_ca,
                bracket,
                p_plus: p.efficiency_plus(),
                p_minus: p.efficiency_minus(),
                wrong_plus: p.wrong_efficiency_plus(),
                wrong_minus: p.wrong_efficiency_minus(),
                loss_plus: p.loss_plus(),
                loss_minus: p.loss_minus(),
            })
        })
        .collect()
}

fn bisect(
    model: &ModelSpec,
    settings: &SimulationSettings,
    (mut a, fa): (f64, f64),
    (mut b, _): (f64, f64),
) -> Result<(f64, f64), ModelError> {
    let sign_a = fa.signum();
    for _ in 0..60 {
        let mid = 0.5 * (a + b);
        let fm = efficiency_difference(model, settings, mid)?;
        if fm.signum() == sign_a {
            a = mid;
        } else {
            b = mid;
        }
        if (b - a) <= CROSSING_RESOLUTION && fm.abs() < CROSSING_BALANCE {
            return Ok((mid, b - a));
        }
        if fm == 0.0 {
            return Ok((mid, b - a));
        }
    }
    Ok((0.5 * (a + b), b - a))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grids() {
        assert_eq!(default_cavity_grid(&ModelSpec::Ideal(crate::ideal::IdealParams::paper())).len(), 81);
        assert_eq!(default_cavity_grid(&ModelSpec::Rubidium(crate::rubidium::RubidiumParams::paper())).len(), 131);
        let g = default_pump_grid();
        assert_eq!(g.len(), 201);
        assert_eq!(g[100], 0.0);
    }

    #[test]
    fn peak_finder_on_lorentzian() {
        let x = uniform_grid(-10.0, 10.0, 0.5);
        let w: f64 = 2.0;
        let y: Vec<f64> = x.iter().map(|v| 1.0 / (1.0 + ((v - 1.2) / (w / 2.0)).powi(2))).collect();
        let peaks = find_peaks(&x, &y, 0.1);
        assert_eq!(peaks.len(), 1);
        assert!((peaks[0].position - 1.2).abs() < 0.15);
        assert!((peaks[0].fwhm.unwrap() - w).abs() < 0.1);
    }

    #[test]
    fn peaks_below_threshold_ignored() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let y = [0.0, 0.05, 0.0, 0.5, 0.0];
        let p = find_peaks(&x, &y, 0.1);
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].fwhm, Some(1.0));
    }

    #[test]
    fn bad_grid_rejected() {
        let m = ModelSpec::Ideal(crate::ideal::IdealParams::paper());
        let s = SimulationSettings::default();
        assert!(scan_cavity_detuning(&m, &s, &[1.0, 0.0]).is_err());
        assert!(scan_cavity_detuning(&m, &s, &[]).is_err());
    }
}
