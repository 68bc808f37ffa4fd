//! ⁸⁷Rb D-line model: the `F=1` ground manifold, the `F′=0` and `F′=1`
//! excited manifolds, both circular cavity modes, and spontaneous decay with
//! the unmodeled branches (into `F=2`, and by default into `m_F=0`) treated
//! as a trace-removing sink.

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::dissipator::{Dissipator, DissipatorError};
use crate::ideal::build_cavity_dissipator;
use crate::operator::{
    sigma_minus_annihilator, sigma_plus_annihilator, transition_by_index, HilbertSpace, OperatorError,
    OperatorMatrix,
};
use crate::units::angular;
use crate::GroundState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RbLevel {
    /// `|F=1, m_F⟩`
    Ground { m: i8 },
    /// `|F′, m_F′⟩`
    Excited { f: u8, m: i8 },
}

impl RbLevel {
    pub fn m(&self) -> i8 {
        match *self {
            RbLevel::Ground { m } | RbLevel::Excited { m, .. } => m,
        }
    }

    pub fn is_excited(&self) -> bool {
        matches!(self, RbLevel::Excited { .. })
    }

    pub fn label(&self) -> String {
        match *self {
            RbLevel::Ground { m } => format!("F=1,m={m:+}"),
            RbLevel::Excited { f, m } => format!("F'={f},m={m:+}"),
        }
    }
}

/// Basis order of the atomic factor.
pub const RB_LEVELS: [RbLevel; 7] = [
    RbLevel::Ground { m: -1 },
    RbLevel::Ground { m: 0 },
    RbLevel::Ground { m: 1 },
    RbLevel::Excited { f: 0, m: 0 },
    RbLevel::Excited { f: 1, m: -1 },
    RbLevel::Excited { f: 1, m: 0 },
    RbLevel::Excited { f: 1, m: 1 },
];

pub fn level_index(level: RbLevel) -> usize {
    RB_LEVELS.iter().position(|l| *l == level).expect("every RbLevel used here is in RB_LEVELS")
}

pub fn ground_index(state: GroundState) -> usize {
    level_index(RbLevel::Ground { m: state.m() })
}

pub fn rubidium_space(photon_cutoff: usize) -> Result<HilbertSpace, OperatorError> {
    HilbertSpace::new(RB_LEVELS.iter().map(RbLevel::label), photon_cutoff)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RubidiumError {
    #[error("Hilbert space does not carry the seven ⁸⁷Rb levels in basis order")]
    LevelMismatch,
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Dissipator(#[from] DissipatorError),
    #[error("decay channels out of excited level {level} sum to {modeled} MHz, above its total {total} MHz")]
    BranchingOverflow { level: String, modeled: f64, total: f64 },
    #[error("invalid rubidium parameter: {0}")]
    Parameter(String),
}

/// What happens to spontaneous decay into `|F=1, m_F=0⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZeroStateMode {
    /// Decay into `m_F=0` leaves the system (trace deficit).
    Sink,
    /// Decay into `m_F=0` is modeled; the level stays pump- and cavity-coupled.
    Coherent,
}

/// Frequencies in MHz (ν = ω/2π).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RubidiumParams {
    pub g0: f64,
    pub omega0: f64,
    pub kappa: f64,
    /// Zeeman shift of the `m_F = ±1` ground states (`∓Δ_B`).
    pub delta_b: f64,
    /// |g_F| of the ground manifold, used to convert Δ_B into μ_B·B.
    pub ground_lande: f64,
    /// g_F′ of the `F′=1` manifold.
    pub excited_lande_f1: f64,
    /// `F′=1` above `F′=0`.
    pub hyperfine_f0_f1: f64,
    /// Polarisation decay rate γ_j of every excited level.
    pub gamma: f64,
    pub zero_state: ZeroStateMode,
    /// ω_p − ω_0e, with ω_0e the `|F=1,0⟩ → |F′=0,0⟩` frequency.
    pub delta_p: f64,
    /// ω_c − ω_p
    pub delta_cp: f64,
    pub initial_state: GroundState,
}

impl RubidiumParams {
    /// Cavity 63.2 MHz above the `F′=0` resonance, pump on the `|+⟩ → |−⟩`
    /// Raman resonance.
    pub fn paper() -> Self {
        Self {
            g0: 6.7,
            omega0: 14.7,
            kappa: 1.25,
            delta_b: 15.0,
            ground_lande: 0.5,
            excited_lande_f1: 2.0 / 3.0,
            hyperfine_f0_f1: 72.0,
            gamma: 3.0,
            zero_state: ZeroStateMode::Sink,
            delta_p: 93.2,
            delta_cp: -30.0,
            initial_state: GroundState::Plus,
        }
    }

    pub fn delta_ca(&self) -> f64 {
        self.delta_p + self.delta_cp
    }

    /// μ_B·B / h in MHz.
    pub fn bohr_field(&self) -> f64 {
        self.delta_b / self.ground_lande
    }

    pub fn validate(&self) -> Result<(), RubidiumError> {
        let vals = [
            ("g0", self.g0),
            ("omega0", self.omega0),
            ("kappa", self.kappa),
            ("delta_b", self.delta_b),
            ("ground_lande", self.ground_lande),
            ("excited_lande_f1", self.excited_lande_f1),
            ("hyperfine_f0_f1", self.hyperfine_f0_f1),
            ("gamma", self.gamma),
            ("delta_p", self.delta_p),
            ("delta_cp", self.delta_cp),
        ];
        if let Some((k, _)) = vals.iter().find(|(_, v)| !v.is_finite()) {
            return Err(RubidiumError::Parameter(format!("{k} must be finite")));
        }
        for (k, v) in [("g0", self.g0), ("kappa", self.kappa), ("ground_lande", self.ground_lande)] {
            if v <= 0.0 {
                return Err(RubidiumError::Parameter(format!("{k} must be positive, got {v}")));
            }
        }
        for (k, v) in [("omega0", self.omega0), ("delta_b", self.delta_b), ("gamma", self.gamma)] {
            if v < 0.0 {
                return Err(RubidiumError::Parameter(format!("{k} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

/// Rotating-frame energies Δ_i of the seven levels (MHz), `F′=0` at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelScheme {
    energies: [f64; 7],
}

impl LevelScheme {
    pub fn new(p: &RubidiumParams) -> Self {
        let bohr_field = p.bohr_field();
        let mut energies = [0.0; 7];
        for (k, level) in RB_LEVELS.iter().enumerate() {
            energies[k] = match *level {
                // g_F = −1/2: m_F = ±1 shifted by ∓Δ_B
                RbLevel::Ground { m } => p.delta_p - f64::from(m) * p.delta_b,
                RbLevel::Excited { f: 0, .. } => 0.0,
                RbLevel::Excited { m, .. } => p.hyperfine_f0_f1 + p.excited_lande_f1 * f64::from(m) * bohr_field,
            };
        }
        Self { energies }
    }

    pub fn from_energies(energies: [f64; 7]) -> Result<Self, RubidiumError> {
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(RubidiumError::Parameter("level energies must be finite".into()));
        }
        Ok(Self { energies })
    }

    pub fn energy(&self, level: RbLevel) -> f64 {
        self.energies[level_index(level)]
    }

    pub fn energies(&self) -> &[f64; 7] {
        &self.energies
    }
}

/// Polarisation of a dipole transition relative to the quantization axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DipoleKind {
    /// m_F′ − m_F = +1
    SigmaPlus,
    /// m_F′ − m_F = −1
    SigmaMinus,
    Pi,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularFactor {
    pub ground_m: i8,
    pub excited: RbLevel,
    pub value: f64,
}

impl AngularFactor {
    pub fn kind(&self) -> DipoleKind {
        match self.excited.m() - self.ground_m {
            1 => DipoleKind::SigmaPlus,
            -1 => DipoleKind::SigmaMinus,
            0 => DipoleKind::Pi,
            d => unreachable!("|Δm| = {} is not a dipole transition", d.abs()),
        }
    }
}

/// Angular parts of the `F=1 → F′∈{0,1}` dipole matrix elements, signs
/// included. Pairs that are absent have a zero matrix element.
pub fn clebsch_table() -> Vec<AngularFactor> {
    let f0 = (1.0f64 / 6.0).sqrt();
    let f1 = (5.0f64 / 24.0).sqrt();
    let e0 = RbLevel::Excited { f: 0, m: 0 };
    let e1 = |m| RbLevel::Excited { f: 1, m };
    let entry = |ground_m, excited, value| AngularFactor { ground_m, excited, value };
    vec![
        entry(1, e0, f0),
        entry(1, e1(1), f1),
        entry(1, e1(0), -f1),
        entry(0, e0, f0),
        entry(0, e1(1), f1),
        entry(0, e1(-1), -f1),
        entry(-1, e0, f0),
        entry(-1, e1(0), f1),
        entry(-1, e1(-1), -f1),
    ]
}

/// Σ|A|² over all ground states (both hyperfine manifolds) for one excited
/// substate. `F′=0` only decays into `F=1`, which fixes the normalization.
pub const TOTAL_LINE_STRENGTH: f64 = 0.5;

pub fn angular_factor(ground_m: i8, excited: RbLevel) -> f64 {
    clebsch_table()
        .into_iter()
        .find(|a| a.ground_m == ground_m && a.excited == excited)
        .map_or(0.0, |a| a.value)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingTable {
    pub factors: Vec<AngularFactor>,
    /// Electronic atom–cavity coupling (MHz).
    pub g0: f64,
    /// Electronic peak Rabi frequency (MHz).
    pub omega0: f64,
}

impl CouplingTable {
    pub fn new(g0: f64, omega0: f64) -> Self {
        Self {
            factors: clebsch_table(),
            g0,
            omega0,
        }
    }

    fn factor(&self, ground_m: i8, excited: RbLevel) -> Option<&AngularFactor> {
        self.factors.iter().find(|a| a.ground_m == ground_m && a.excited == excited)
    }

    /// σ⁺ cavity coupling (MHz); zero unless m_F′ − m_F = +1.
    pub fn g_plus(&self, ground_m: i8, excited: RbLevel) -> f64 {
        match self.factor(ground_m, excited) {
            Some(a) if a.kind() == DipoleKind::SigmaPlus => a.value * self.g0,
            _ => 0.0,
        }
    }

    /// σ⁻ cavity coupling (MHz); zero unless m_F′ − m_F = −1.
    pub fn g_minus(&self, ground_m: i8, excited: RbLevel) -> f64 {
        match self.factor(ground_m, excited) {
            Some(a) if a.kind() == DipoleKind::SigmaMinus => a.value * self.g0,
            _ => 0.0,
        }
    }

    /// Pump Rabi frequency (MHz); the pump has no π component.
    pub fn omega(&self, ground_m: i8, excited: RbLevel) -> f64 {
        match self.factor(ground_m, excited) {
            Some(a) if a.kind() != DipoleKind::Pi => a.value * self.omega0,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayChannel {
    pub ground_m: i8,
    pub excited: RbLevel,
    /// γ_ij in MHz.
    pub rate: f64,
}

/// Spontaneous decay of the excited levels. Rates are polarisation decay
/// rates in MHz; populations decay at twice these values.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayConfig {
    pub gamma_total: f64,
    /// Channels that end inside the modeled Hilbert space.
    pub channels: Vec<DecayChannel>,
}

impl DecayConfig {
    /// Branching `γ_ij = γ·|A_ij|² / Σ|A|²`, π channels included. Decay into
    /// `F=2` is never modeled; decay into `m_F=0` only in coherent mode.
    pub fn from_branching(gamma_total: f64, zero_state: ZeroStateMode) -> Self {
        let channels = clebsch_table()
            .into_iter()
            .filter(|a| zero_state == ZeroStateMode::Coherent || a.ground_m != 0)
            .map(|a| DecayChannel {
                ground_m: a.ground_m,
                excited: a.excited,
                rate: gamma_total * a.value * a.value / TOTAL_LINE_STRENGTH,
            })
            .collect();
        Self { gamma_total, channels }
    }

    pub fn modeled_rate(&self, excited: RbLevel) -> f64 {
        self.channels.iter().filter(|c| c.excited == excited).map(|c| c.rate).sum()
    }

    /// γ_j − Σ_modeled γ_ij.
    pub fn sink_rate(&self, excited: RbLevel) -> f64 {
        self.gamma_total - self.modeled_rate(excited)
    }

    pub fn validate(&self) -> Result<(), RubidiumError> {
        if !self.gamma_total.is_finite() || self.gamma_total < 0.0 {
            return Err(DissipatorError::NegativeRate {
                channel: "gamma_total".into(),
                rate: self.gamma_total,
            }
            .into());
        }
        for c in &self.channels {
            if !c.rate.is_finite() || c.rate < 0.0 {
                return Err(DissipatorError::NegativeRate {
                    channel: format!("{} -> F=1,m={:+}", c.excited.label(), c.ground_m),
                    rate: c.rate,
                }
                .into());
            }
        }
        for level in RB_LEVELS.iter().filter(|l| l.is_excited()) {
            let modeled = self.modeled_rate(*level);
            if modeled > self.gamma_total * (1.0 + 1e-12) {
                return Err(RubidiumError::BranchingOverflow {
                    level: level.label(),
                    modeled,
                    total: self.gamma_total,
                });
            }
        }
        Ok(())
    }
}

fn require_rb_space(space: &HilbertSpace) -> Result<(), RubidiumError> {
    let ok = space.n_levels() == RB_LEVELS.len()
        && space.levels().iter().zip(RB_LEVELS.iter()).all(|(a, b)| *a == b.label());
    if ok {
        Ok(())
    } else {
        Err(RubidiumError::LevelMismatch)
    }
}

/// `Σ_i Δ_i |i⟩⟨i| + Δ_cp(â†â + b̂†b̂)` in rad/µs.
pub fn build_h_stat_full(
    scheme: &LevelScheme,
    delta_cp: f64,
    space: &HilbertSpace,
) -> Result<OperatorMatrix, RubidiumError> {
    require_rb_space(space)?;
    let a = sigma_plus_annihilator(space);
    let b = sigma_minus_annihilator(space);
    let mut h = (a.adjoint() * &a + b.adjoint() * &b) * C64::new(angular(delta_cp), 0.0);
    for (k, e) in scheme.energies().iter().enumerate() {
        h += transition_by_index(space, k, k) * C64::new(angular(*e), 0.0);
    }
    Ok(h)
}

/// Cavity and pump couplings with the pump envelope at `omega_scale`
/// (peak 1), in rad/µs.
pub fn build_h_int_full(
    table: &CouplingTable,
    omega_scale: f64,
    space: &HilbertSpace,
) -> Result<OperatorMatrix, RubidiumError> {
    require_rb_space(space)?;
    let a_dag = sigma_plus_annihilator(space).adjoint();
    let b_dag = sigma_minus_annihilator(space).adjoint();
    let n = space.total_dim();
    // Σ_ij g⁺|i⟩⟨j|â† + g⁻|i⟩⟨j|b̂† + (Ω/2)|i⟩⟨j|; adding the adjoint gives h.c.
    let mut lowering = OperatorMatrix::zeros(n, n);
    for factor in &table.factors {
        let i = level_index(RbLevel::Ground { m: factor.ground_m });
        let j = level_index(factor.excited);
        let proj = transition_by_index(space, i, j);
        let g_plus = table.g_plus(factor.ground_m, factor.excited);
        let g_minus = table.g_minus(factor.ground_m, factor.excited);
        let omega = table.omega(factor.ground_m, factor.excited);
        if g_plus != 0.0 {
            lowering += (&proj * &a_dag) * C64::new(angular(g_plus), 0.0);
        }
        if g_minus != 0.0 {
            lowering += (&proj * &b_dag) * C64::new(angular(g_minus), 0.0);
        }
        if omega != 0.0 && omega_scale != 0.0 {
            lowering += proj * C64::new(angular(omega * omega_scale) / 2.0, 0.0);
        }
    }
    Ok(-(&lowering + lowering.adjoint()))
}

/// Spontaneous decay plus cavity decay; `kappa` in MHz.
pub fn build_full_dissipator(
    decay: &DecayConfig,
    kappa: f64,
    space: &HilbertSpace,
) -> Result<Dissipator, RubidiumError> {
    require_rb_space(space)?;
    decay.validate()?;
    let mut d = build_cavity_dissipator(kappa, space)?;
    for c in &decay.channels {
        let i = level_index(RbLevel::Ground { m: c.ground_m });
        let j = level_index(c.excited);
        let label = format!("{} -> F=1,m={:+}", c.excited.label(), c.ground_m);
        d.add_feed(&label, angular(c.rate), transition_by_index(space, i, j))?;
    }
    for (j, level) in RB_LEVELS.iter().enumerate().filter(|(_, l)| l.is_excited()) {
        d.add_drain(&level.label(), angular(decay.gamma_total), &transition_by_index(space, j, j))?;
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dissipator::pseudo_random_hermitian;
    use crate::operator::{hermiticity_error, DensityMatrix};
    use std::f64::consts::TAU;

    fn space() -> HilbertSpace {
        rubidium_space(1).unwrap()
    }

    #[test]
    fn table_values() {
        let e0 = RbLevel::Excited { f: 0, m: 0 };
        assert!((angular_factor(1, e0) - 0.408248).abs() < 1e-6);
        assert!((angular_factor(1, RbLevel::Excited { f: 1, m: 0 }) + 0.456435).abs() < 1e-6);
        assert_eq!(angular_factor(1, RbLevel::Excited { f: 1, m: -1 }), 0.0);
        assert_eq!(angular_factor(0, RbLevel::Excited { f: 1, m: 0 }), 0.0);
        let t = clebsch_table();
        assert_eq!(t.len(), 9);
        assert_eq!(t.iter().filter(|a| a.kind() == DipoleKind::Pi).count(), 3);
    }

    #[test]
    fn line_strength_sums_to_total_for_f0() {
        let e0 = RbLevel::Excited { f: 0, m: 0 };
        let s: f64 = clebsch_table().iter().filter(|a| a.excited == e0).map(|a| a.value * a.value).sum();
        assert!((s - TOTAL_LINE_STRENGTH).abs() < 1e-15);
        // F′=1 sublevels keep 1/6 of their strength for F=2
        for m in -1..=1 {
            let e1 = RbLevel::Excited { f: 1, m };
            let s: f64 = clebsch_table().iter().filter(|a| a.excited == e1).map(|a| a.value * a.value).sum();
            assert!((s / TOTAL_LINE_STRENGTH - 5.0 / 6.0).abs() < 1e-14);
        }
    }

    #[test]
    fn selection_rules() {
        let t = CouplingTable::new(6.7, 14.7);
        for a in &t.factors {
            let dm = a.excited.m() - a.ground_m;
            let gp = t.g_plus(a.ground_m, a.excited);
            let gm = t.g_minus(a.ground_m, a.excited);
            assert!(gp == 0.0 || dm == 1);
            assert!(gm == 0.0 || dm == -1);
            if dm == 0 {
                assert_eq!(t.omega(a.ground_m, a.excited), 0.0);
            }
        }
    }

    #[test]
    fn level_scheme_hyperfine_gap() {
        let p = RubidiumParams { delta_b: 0.0, delta_p: 0.0, ..RubidiumParams::paper() };
        let s = LevelScheme::new(&p);
        for m in -1..=1 {
            assert!((s.energy(RbLevel::Excited { f: 1, m }) - s.energy(RbLevel::Excited { f: 0, m: 0 }) - 72.0).abs() < 1e-12);
        }
        let paper = LevelScheme::new(&RubidiumParams::paper());
        assert!((paper.energy(RbLevel::Ground { m: 1 }) - (93.2 - 15.0)).abs() < 1e-12);
        assert!((paper.energy(RbLevel::Ground { m: -1 }) - (93.2 + 15.0)).abs() < 1e-12);
        assert!((paper.energy(RbLevel::Excited { f: 1, m: 1 }) - (72.0 + 20.0)).abs() < 1e-12);
    }

    #[test]
    fn stationary_hamiltonian() {
        let sp = space();
        let zero = LevelScheme::from_energies([0.0; 7]).unwrap();
        assert!(build_h_stat_full(&zero, 0.0, &sp).unwrap().iter().all(|z| *z == C64::new(0.0, 0.0)));

        let p = RubidiumParams { delta_b: 0.0, delta_p: 0.0, ..RubidiumParams::paper() };
        let h = build_h_stat_full(&LevelScheme::new(&p), 30.0, &sp).unwrap();
        for i in 0..7 {
            let gap = h[(sp.index(i, 1, 0), sp.index(i, 1, 0))].re - h[(sp.index(i, 0, 0), sp.index(i, 0, 0))].re;
            assert!((gap - TAU * 30.0).abs() < 1e-9);
        }
        let e0 = sp.index(level_index(RbLevel::Excited { f: 0, m: 0 }), 0, 0);
        let e1 = sp.index(level_index(RbLevel::Excited { f: 1, m: 0 }), 0, 0);
        assert!((h[(e1, e1)].re - h[(e0, e0)].re - TAU * 72.0).abs() < 1e-9);

        let ideal = crate::ideal::ideal_space(1).unwrap();
        assert!(matches!(build_h_stat_full(&zero, 0.0, &ideal), Err(RubidiumError::LevelMismatch)));
    }

    #[test]
    fn interaction_matrix_elements() {
        let sp = space();
        let t = CouplingTable::new(6.7, 14.7);
        let h = build_h_int_full(&t, 1.0, &sp).unwrap();
        assert_eq!(hermiticity_error(&h), 0.0);
        let e0 = level_index(RbLevel::Excited { f: 0, m: 0 });
        let plus = level_index(RbLevel::Ground { m: 1 });
        let minus = level_index(RbLevel::Ground { m: -1 });
        // |F′=0⟩ → |+⟩ emits σ⁻ (m_F′ − m_F = −1), so it couples to |+,0,1⟩
        let elem = h[(sp.index(e0, 0, 0), sp.index(plus, 0, 1))].re;
        assert!((elem + TAU * (1.0f64 / 6.0).sqrt() * 6.7).abs() < 1e-9);
        assert!((elem / TAU + 2.7354).abs() < 5e-4);
        // and |F′=0⟩ → |−⟩ emits σ⁺
        let elem = h[(sp.index(e0, 0, 0), sp.index(minus, 1, 0))].re;
        assert!((elem + TAU * (1.0f64 / 6.0).sqrt() * 6.7).abs() < 1e-9);
        // no π cavity coupling: |F′=1,+1⟩ ↔ |+⟩ with either photon
        let e1p = level_index(RbLevel::Excited { f: 1, m: 1 });
        assert_eq!(h[(sp.index(e1p, 0, 0), sp.index(plus, 1, 0))], C64::new(0.0, 0.0));
        assert_eq!(h[(sp.index(e1p, 0, 0), sp.index(plus, 0, 1))], C64::new(0.0, 0.0));
        assert_eq!(h[(sp.index(e1p, 0, 0), sp.index(plus, 0, 0))], C64::new(0.0, 0.0));

        let off = build_h_int_full(&t, 0.0, &sp).unwrap();
        for i in 0..7 {
            for j in 0..7 {
                assert_eq!(off[(sp.index(i, 0, 0), sp.index(j, 0, 0))], C64::new(0.0, 0.0));
            }
        }
        // pump part matches A·Ω₀/2
        let e1z = level_index(RbLevel::Excited { f: 1, m: 0 });
        let pump = h[(sp.index(e1z, 0, 0), sp.index(plus, 0, 0))].re;
        assert!((pump - TAU * (5.0f64 / 24.0).sqrt() * 14.7 / 2.0).abs() < 1e-9);
    }

    #[test]
    fn decay_branching_and_sinks() {
        let d = DecayConfig::from_branching(3.0, ZeroStateMode::Sink);
        d.validate().unwrap();
        let e0 = RbLevel::Excited { f: 0, m: 0 };
        assert!((d.sink_rate(e0) - 1.0).abs() < 1e-12);
        assert!((d.sink_rate(RbLevel::Excited { f: 1, m: 0 }) - 0.5).abs() < 1e-12);
        let c = DecayConfig::from_branching(3.0, ZeroStateMode::Coherent);
        assert!(c.sink_rate(e0).abs() < 1e-12);
        assert!((c.sink_rate(RbLevel::Excited { f: 1, m: 1 }) - 0.5).abs() < 1e-12);

        let mut bad = d.clone();
        bad.channels[0].rate = -0.1;
        assert!(bad.validate().is_err());
        let mut over = d;
        over.channels[0].rate = 10.0;
        assert!(matches!(over.validate(), Err(RubidiumError::BranchingOverflow { .. })));
    }

    #[test]
    fn excited_state_trace_loss() {
        let sp = space();
        let d = build_full_dissipator(&DecayConfig::from_branching(3.0, ZeroStateMode::Sink), 1.25, &sp).unwrap();
        let rho = DensityMatrix::product_state(&sp, &RbLevel::Excited { f: 0, m: 0 }.label(), 0, 0).unwrap();
        let rate = d.apply(rho.matrix()).trace().re;
        assert!((rate + 2.0 * TAU * 1.0).abs() < 1e-9, "{rate}");
    }

    #[test]
    fn zero_gamma_reduces_to_cavity_dissipator() {
        let sp = space();
        let full = build_full_dissipator(&DecayConfig::from_branching(0.0, ZeroStateMode::Sink), 1.25, &sp).unwrap();
        let cav = build_cavity_dissipator(1.25, &sp).unwrap();
        assert_eq!(full, cav);
        let rho = pseudo_random_hermitian(28, 5);
        assert_eq!(full.apply(&rho), cav.apply(&rho));
    }

    #[test]
    fn closed_system_is_trace_free() {
        let sp = space();
        let d = build_full_dissipator(&DecayConfig::from_branching(3.0, ZeroStateMode::Coherent), 1.25, &sp).unwrap();
        // coherent mode still loses the F=2 branch of F′=1; close it by hand
        let mut closed = DecayConfig::from_branching(3.0, ZeroStateMode::Coherent);
        for level in RB_LEVELS.iter().filter(|l| matches!(l, RbLevel::Excited { f: 1, .. })) {
            let missing = closed.sink_rate(*level);
            let first = closed.channels.iter_mut().find(|c| c.excited == *level).unwrap();
            first.rate += missing;
        }
        let d_closed = build_full_dissipator(&closed, 1.25, &sp).unwrap();
        for seed in 0..20 {
            let rho = pseudo_random_hermitian(28, seed);
            assert!(d_closed.apply(&rho).trace().norm() < 1e-12);
        }
        assert!(d.sink_operator().trace().re > 0.0);
    }
}
