//! Idealized `F=1 → F′=0` atom: the two stretched ground states `|−⟩`, `|+⟩`
//! and the excited state `|e⟩`, coupled to both circular cavity modes.
//!
//! The `m_F = 0` ground state is decoupled from pump and cavity and is left
//! out of the Hilbert space. Energies are in the interaction picture with
//! `|e,0,0⟩` at zero.

use num_complex::Complex64 as C64;

use crate::dissipator::{Dissipator, DissipatorError};
use crate::operator::{
    sigma_minus_annihilator, sigma_plus_annihilator, transition, HilbertSpace, OperatorError, OperatorMatrix,
};
use crate::units::angular;
use crate::GroundState;

pub const MINUS: &str = "minus";
pub const EXCITED: &str = "e";
pub const PLUS: &str = "plus";

/// Level list of the ideal model, in basis order.
pub const IDEAL_LEVELS: [&str; 3] = [MINUS, EXCITED, PLUS];

/// Frequencies are ν = ω/2π in MHz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdealParams {
    pub g: f64,
    pub kappa: f64,
    pub delta_b: f64,
    /// ω_p − ω_0e
    pub delta_p: f64,
    /// ω_c − ω_p
    pub delta_cp: f64,
    /// Peak Rabi frequency of each circular pump component.
    pub omega_peak: f64,
    pub initial_state: GroundState,
}

impl IdealParams {
    /// Operating point with the cavity on the unshifted transition and the
    /// pump on the `|+⟩ → |−⟩` Raman resonance.
    pub fn paper() -> Self {
        Self {
            g: 2.7,
            kappa: 1.25,
            delta_b: 15.0,
            delta_p: 30.0,
            delta_cp: -30.0,
            omega_peak: 6.0,
            initial_state: GroundState::Plus,
        }
    }

    /// Cavity–atom detuning ω_c − ω_0e.
    pub fn delta_ca(&self) -> f64 {
        self.delta_p + self.delta_cp
    }

    pub fn validate(&self) -> Result<(), String> {
        let finite = [self.g, self.kappa, self.delta_b, self.delta_p, self.delta_cp, self.omega_peak];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err("ideal parameters must be finite".into());
        }
        if self.g <= 0.0 {
            return Err(format!("g must be positive, got {}", self.g));
        }
        if self.kappa <= 0.0 {
            return Err(format!("kappa must be positive, got {}", self.kappa));
        }
        if self.delta_b < 0.0 {
            return Err(format!("delta_b must be non-negative, got {}", self.delta_b));
        }
        if self.omega_peak < 0.0 {
            return Err(format!("omega_peak must be non-negative, got {}", self.omega_peak));
        }
        Ok(())
    }
}

/// Zeeman shift of the stretched ground states from a magnetic field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeemanConfig {
    pub lande_factor: f64,
    pub b_field_gauss: f64,
    /// μ_B / h in MHz per gauss.
    pub bohr_magneton_over_h: f64,
}

/// μ_B / h in MHz/G.
pub const BOHR_MAGNETON_MHZ_PER_GAUSS: f64 = 1.399624;

impl ZeemanConfig {
    pub fn new(lande_factor: f64, b_field_gauss: f64) -> Self {
        Self {
            lande_factor,
            b_field_gauss,
            bohr_magneton_over_h: BOHR_MAGNETON_MHZ_PER_GAUSS,
        }
    }

    /// Δ_B = |g_L| μ_B B / h in MHz.
    pub fn delta_b(&self) -> f64 {
        self.lande_factor.abs() * self.bohr_magneton_over_h * self.b_field_gauss
    }
}

pub fn ideal_space(photon_cutoff: usize) -> Result<HilbertSpace, OperatorError> {
    HilbertSpace::new(IDEAL_LEVELS, photon_cutoff)
}

fn require_levels(space: &HilbertSpace) -> Result<(), OperatorError> {
    for l in IDEAL_LEVELS {
        space.level_index(l)?;
    }
    Ok(())
}

/// `(Δ_p+Δ_B)|−⟩⟨−| + (Δ_p−Δ_B)|+⟩⟨+| + Δ_cp(â†â + b̂†b̂)` in rad/µs.
pub fn build_h_stat_ideal(p: &IdealParams, space: &HilbertSpace) -> Result<OperatorMatrix, OperatorError> {
    require_levels(space)?;
    let a = sigma_plus_annihilator(space);
    let b = sigma_minus_annihilator(space);
    let photons = a.adjoint() * &a + b.adjoint() * &b;
    let h = transition(space, MINUS, MINUS)? * C64::new(angular(p.delta_p + p.delta_b), 0.0)
        + transition(space, PLUS, PLUS)? * C64::new(angular(p.delta_p - p.delta_b), 0.0)
        + photons * C64::new(angular(p.delta_cp), 0.0);
    Ok(h)
}

/// Atom–cavity and atom–pump couplings at instantaneous Rabi frequency
/// `omega_now` (MHz), in rad/µs.
pub fn build_h_int_ideal(
    p: &IdealParams,
    omega_now: f64,
    space: &HilbertSpace,
) -> Result<OperatorMatrix, OperatorError> {
    require_levels(space)?;
    let a = sigma_plus_annihilator(space);
    let b = sigma_minus_annihilator(space);
    let e_minus = transition(space, EXCITED, MINUS)?;
    let e_plus = transition(space, EXCITED, PLUS)?;

    let cavity = &e_minus * &a + &e_plus * &b;
    let pump = &e_minus + &e_plus;
    let raising = cavity * C64::new(angular(p.g), 0.0) + pump * C64::new(angular(omega_now) / 2.0, 0.0);
    Ok(-(&raising + raising.adjoint()))
}

/// `κ(2âρâ† − â†âρ − ρâ†â) + κ(2b̂ρb̂† − b̂†b̂ρ − ρb̂†b̂)`; `kappa` in MHz.
pub fn build_cavity_dissipator(kappa: f64, space: &HilbertSpace) -> Result<Dissipator, DissipatorError> {
    let mut d = Dissipator::empty(space.total_dim());
    let rate = angular(kappa);
    d.add_channel("cavity sigma+", rate, sigma_plus_annihilator(space))?;
    d.add_channel("cavity sigma-", rate, sigma_minus_annihilator(space))?;
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dissipator::pseudo_random_hermitian;
    use crate::operator::{commutator, hermiticity_error, max_abs, DensityMatrix};
    use std::f64::consts::TAU;

    fn space() -> HilbertSpace {
        ideal_space(1).unwrap()
    }

    fn params() -> IdealParams {
        IdealParams::paper()
    }

    #[test]
    fn paper_operating_point_has_zero_cavity_detuning() {
        assert_eq!(params().delta_ca(), 0.0);
        assert!(params().validate().is_ok());
        let bad = IdealParams { kappa: -1.0, ..params() };
        assert!(bad.validate().unwrap_err().contains("kappa"));
    }

    #[test]
    fn zeeman_shift_at_21_4_gauss() {
        let z = ZeemanConfig::new(0.5, 21.4);
        assert!((z.delta_b() - 15.0).abs() / 15.0 < 0.005, "{}", z.delta_b());
    }

    #[test]
    fn stationary_hamiltonian_diagonal() {
        let s = space();
        let h = build_h_stat_ideal(&params(), &s).unwrap();
        let minus = s.index(0, 0, 0);
        let plus = s.index(2, 0, 0);
        assert!((h[(minus, minus)].re - TAU * 45.0).abs() < 1e-12);
        assert!((h[(plus, plus)].re - TAU * 15.0).abs() < 1e-12);
        let m10 = s.index(0, 1, 0);
        let p = params();
        assert!((h[(m10, m10)].re - TAU * (p.delta_p + p.delta_b + p.delta_cp)).abs() < 1e-12);
        let e = s.index(1, 0, 0);
        assert_eq!(h[(e, e)], C64::new(0.0, 0.0));
    }

    #[test]
    fn zero_detunings_give_zero_matrix() {
        let p = IdealParams { delta_p: 0.0, delta_cp: 0.0, delta_b: 0.0, ..params() };
        assert_eq!(max_abs(&build_h_stat_ideal(&p, &space()).unwrap()), 0.0);
    }

    #[test]
    fn interaction_matrix_elements() {
        let s = space();
        let p = IdealParams { omega_peak: 6.0, ..params() };
        let h = build_h_int_ideal(&p, 6.0, &s).unwrap();
        let e00 = s.index(1, 0, 0);
        assert!((h[(e00, s.index(0, 1, 0))].re + TAU * 2.7).abs() < 1e-12);
        assert!((h[(e00, s.index(2, 0, 1))].re + TAU * 2.7).abs() < 1e-12);
        assert!((h[(e00, s.index(2, 0, 0))].re + TAU * 3.0).abs() < 1e-12);
        assert!((h[(e00, s.index(0, 0, 0))].re + TAU * 3.0).abs() < 1e-12);
        // pump leaves photon number unchanged, cavity does not couple |e⟩ to |+,1,0⟩
        assert_eq!(h[(e00, s.index(2, 1, 0))], C64::new(0.0, 0.0));
        assert!(hermiticity_error(&h) == 0.0);

        let off = IdealParams { g: 0.0, ..p };
        let h0 = build_h_int_ideal(&off, 0.0, &s).unwrap();
        assert_eq!(max_abs(&h0), 0.0);
    }

    #[test]
    fn missing_level_is_an_error() {
        let s = HilbertSpace::new(["minus", "plus"], 1).unwrap();
        assert!(build_h_stat_ideal(&params(), &s).is_err());
        assert!(build_h_int_ideal(&params(), 1.0, &s).is_err());
    }

    #[test]
    fn hamiltonian_conserves_excitation_number() {
        let s = space();
        let a = sigma_plus_annihilator(&s);
        let b = sigma_minus_annihilator(&s);
        let n = transition(&s, EXCITED, EXCITED).unwrap() + a.adjoint() * &a + b.adjoint() * &b;
        let h = build_h_stat_ideal(&params(), &s).unwrap() + build_h_int_ideal(&params(), 4.2, &s).unwrap();
        assert!(hermiticity_error(&h) < 1e-12);
        // pump couples |±,0,0⟩ to |e,0,0⟩, so only the cavity part conserves N
        let h_cav = build_h_int_ideal(&params(), 0.0, &s).unwrap() + build_h_stat_ideal(&params(), &s).unwrap();
        assert!(max_abs(&commutator(&h_cav, &n)) < 1e-12);
    }

    #[test]
    fn mirror_symmetry_of_generator() {
        // Relabeling ± (with the modes) and flipping the sign of |e⟩ maps
        // H(Δ_p, Δ_cp) onto −H(−Δ_p, −Δ_cp); the dynamics are then complex
        // conjugates of each other, so populations agree.
        let s = space();
        let p = IdealParams { delta_p: 12.0, delta_cp: -7.0, ..params() };
        let q = IdealParams { delta_p: -12.0, delta_cp: 7.0, ..params() };
        let h_p = build_h_stat_ideal(&p, &s).unwrap() + build_h_int_ideal(&p, 3.0, &s).unwrap();
        let h_q = build_h_stat_ideal(&q, &s).unwrap() + build_h_int_ideal(&q, 3.0, &s).unwrap();
        let map = |k: usize| {
            let (i, np, nm) = s.decompose(k);
            let sign = if i == 1 { -1.0 } else { 1.0 };
            (s.index(2 - i, nm, np), sign)
        };
        for r in 0..12 {
            for c in 0..12 {
                let (pr, sr) = map(r);
                let (pc, sc) = map(c);
                let expected = -h_p[(r, c)] * (sr * sc);
                assert!((h_q[(pr, pc)] - expected).norm() < 1e-12, "({r},{c})");
            }
        }
    }

    #[test]
    fn cavity_dissipator_single_photon() {
        let s = space();
        let kappa = 1.25;
        let d = build_cavity_dissipator(kappa, &s).unwrap();
        let rho = DensityMatrix::product_state(&s, MINUS, 1, 0).unwrap();
        let l = d.apply(rho.matrix());
        let k = TAU * kappa;
        let m00 = s.index(0, 0, 0);
        let m10 = s.index(0, 1, 0);
        assert!((l[(m00, m00)].re - 2.0 * k).abs() < 1e-12);
        assert!((l[(m10, m10)].re + 2.0 * k).abs() < 1e-12);

        let vac = DensityMatrix::product_state(&s, PLUS, 0, 0).unwrap();
        assert_eq!(max_abs(&d.apply(vac.matrix())), 0.0);
    }

    #[test]
    fn cavity_dissipator_is_trace_free() {
        let s = space();
        let d = build_cavity_dissipator(1.25, &s).unwrap();
        for seed in 0..100 {
            let rho = pseudo_random_hermitian(12, seed);
            assert!(d.apply(&rho).trace().norm() < 1e-12);
        }
    }
}
