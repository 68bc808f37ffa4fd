//! Model selection and the glue that turns a parameter set into a
//! ready-to-integrate master equation with its initial state.

use thiserror::Error;

use crate::dissipator::DissipatorError;
use crate::evolution::{EvolutionError, MasterEquation};
use crate::ideal::{self, IdealParams};
use crate::operator::{DensityMatrix, HilbertSpace, OperatorError};
use crate::rubidium::{self, CouplingTable, DecayConfig, LevelScheme, RubidiumError, RubidiumParams};

/// Stretched Zeeman ground state `|F=1, m_F=±1⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroundState {
    Plus,
    Minus,
}

impl GroundState {
    pub fn m(self) -> i8 {
        match self {
            GroundState::Plus => 1,
            GroundState::Minus => -1,
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            GroundState::Plus => GroundState::Minus,
            GroundState::Minus => GroundState::Plus,
        }
    }

    /// Photon emitted on the Raman transition out of this state.
    pub fn lambda_photon(self) -> Polarisation {
        match self {
            GroundState::Plus => Polarisation::SigmaPlus,
            GroundState::Minus => Polarisation::SigmaMinus,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GroundState::Plus => "plus",
            GroundState::Minus => "minus",
        }
    }
}

/// Circular polarisation of a cavity photon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarisation {
    SigmaPlus,
    SigmaMinus,
}

impl Polarisation {
    /// Ground state the Λ transition producing this photon starts from.
    pub fn lambda_initial(self) -> GroundState {
        match self {
            Polarisation::SigmaPlus => GroundState::Plus,
            Polarisation::SigmaMinus => GroundState::Minus,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Polarisation::SigmaPlus => "sigma_plus",
            Polarisation::SigmaMinus => "sigma_minus",
        }
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid parameters: {0}")]
    Parameter(String),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Dissipator(#[from] DissipatorError),
    #[error(transparent)]
    Rubidium(#[from] RubidiumError),
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelSpec {
    Ideal(IdealParams),
    Rubidium(RubidiumParams),
}

/// Everything needed to integrate one trajectory.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub equation: MasterEquation,
    pub rho0: DensityMatrix,
    pub kappa: f64,
    pub initial_level: usize,
    pub target_level: usize,
}

impl Experiment {
    pub fn space(&self) -> &HilbertSpace {
        self.equation.space()
    }
}

impl ModelSpec {
    pub fn id(&self) -> &'static str {
        match self {
            ModelSpec::Ideal(_) => "ideal",
            ModelSpec::Rubidium(_) => "rubidium",
        }
    }

    pub fn kappa(&self) -> f64 {
        match self {
            ModelSpec::Ideal(p) => p.kappa,
            ModelSpec::Rubidium(p) => p.kappa,
        }
    }

    pub fn delta_b(&self) -> f64 {
        match self {
            ModelSpec::Ideal(p) => p.delta_b,
            ModelSpec::Rubidium(p) => p.delta_b,
        }
    }

    pub fn delta_p(&self) -> f64 {
        match self {
            ModelSpec::Ideal(p) => p.delta_p,
            ModelSpec::Rubidium(p) => p.delta_p,
        }
    }

    pub fn delta_cp(&self) -> f64 {
        match self {
            ModelSpec::Ideal(p) => p.delta_cp,
            ModelSpec::Rubidium(p) => p.delta_cp,
        }
    }

    pub fn delta_ca(&self) -> f64 {
        self.delta_p() + self.delta_cp()
    }

    pub fn initial_state(&self) -> GroundState {
        match self {
            ModelSpec::Ideal(p) => p.initial_state,
            ModelSpec::Rubidium(p) => p.initial_state,
        }
    }

    pub fn with_initial_state(mut self, s: GroundState) -> Self {
        match &mut self {
            ModelSpec::Ideal(p) => p.initial_state = s,
            ModelSpec::Rubidium(p) => p.initial_state = s,
        }
        self
    }

    pub fn with_detunings(mut self, delta_p: f64, delta_cp: f64) -> Self {
        match &mut self {
            ModelSpec::Ideal(p) => {
                p.delta_p = delta_p;
                p.delta_cp = delta_cp;
            }
            ModelSpec::Rubidium(p) => {
                p.delta_p = delta_p;
                p.delta_cp = delta_cp;
            }
        }
        self
    }

    /// Keeps Δ_ca and moves the pump to Δ_cp.
    pub fn with_cavity_and_pump(self, delta_ca: f64, delta_cp: f64) -> Self {
        self.with_detunings(delta_ca - delta_cp, delta_cp)
    }

    /// Same model with the decay rate replaced (no-op for the ideal model).
    pub fn with_gamma(mut self, gamma: f64) -> Self {
        if let ModelSpec::Rubidium(p) = &mut self {
            p.gamma = gamma;
        }
        self
    }

    pub fn with_delta_b(mut self, delta_b: f64) -> Self {
        match &mut self {
            ModelSpec::Ideal(p) => p.delta_b = delta_b,
            ModelSpec::Rubidium(p) => p.delta_b = delta_b,
        }
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            ModelSpec::Ideal(p) => p.validate().map_err(ModelError::Parameter),
            ModelSpec::Rubidium(p) => p.validate().map_err(ModelError::from),
        }
    }

    /// Rotating-frame energy of a stretched ground state with the pump
    /// detuning removed (its Zeeman part only).
    fn ground_shift(&self, s: GroundState) -> f64 {
        let at_zero_pump = self.with_detunings(0.0, 0.0);
        match at_zero_pump {
            ModelSpec::Ideal(p) => match s {
                GroundState::Minus => p.delta_p + p.delta_b,
                GroundState::Plus => p.delta_p - p.delta_b,
            },
            ModelSpec::Rubidium(p) => LevelScheme::new(&p).energy(rubidium::RbLevel::Ground { m: s.m() }),
        }
    }

    /// Δ_cp that puts `|initial, 0, 0⟩` and `|final, photon⟩` on two-photon
    /// resonance: pump photon + initial level = cavity photon + final level.
    pub fn raman_resonant_delta_cp(&self, initial: GroundState) -> f64 {
        self.ground_shift(initial) - self.ground_shift(initial.opposite())
    }

    /// Cavity at `delta_ca`, pump tuned to the Λ resonance that emits `photon`.
    pub fn tuned_for(self, delta_ca: f64, photon: Polarisation) -> Self {
        let delta_cp = self.raman_resonant_delta_cp(photon.lambda_initial());
        self.with_cavity_and_pump(delta_ca, delta_cp)
    }

    pub fn photon_cutoff_space(&self, cutoff: usize) -> Result<HilbertSpace, OperatorError> {
        match self {
            ModelSpec::Ideal(_) => ideal::ideal_space(cutoff),
            ModelSpec::Rubidium(_) => rubidium::rubidium_space(cutoff),
        }
    }

    /// Index of a stretched ground state in this model's level list.
    pub fn ground_level_index(&self, s: GroundState) -> usize {
        match self {
            ModelSpec::Ideal(_) => match s {
                GroundState::Minus => 0,
                GroundState::Plus => 2,
            },
            ModelSpec::Rubidium(_) => rubidium::ground_index(s),
        }
    }

    pub fn experiment(&self, photon_cutoff: usize) -> Result<Experiment, ModelError> {
        self.validate()?;
        let space = self.photon_cutoff_space(photon_cutoff)?;
        let equation = match self {
            ModelSpec::Ideal(p) => {
                let h_stat = ideal::build_h_stat_ideal(p, &space)?;
                let dissipator = ideal::build_cavity_dissipator(p.kappa, &space)?;
                let peak = p.omega_peak;
                MasterEquation::from_builder(space.clone(), h_stat, dissipator, |envelope| {
                    ideal::build_h_int_ideal(p, peak * envelope, &space).map_err(ModelError::from)
                })?
            }
            ModelSpec::Rubidium(p) => {
                let scheme = LevelScheme::new(p);
                let table = CouplingTable::new(p.g0, p.omega0);
                let decay = DecayConfig::from_branching(p.gamma, p.zero_state);
                let h_stat = rubidium::build_h_stat_full(&scheme, p.delta_cp, &space)?;
                let dissipator = rubidium::build_full_dissipator(&decay, p.kappa, &space)?;
                MasterEquation::from_builder(space.clone(), h_stat, dissipator, |envelope| {
                    rubidium::build_h_int_full(&table, envelope, &space).map_err(ModelError::from)
                })?
            }
        };
        let initial = self.initial_state();
        let initial_level = self.ground_level_index(initial);
        let target_level = self.ground_level_index(initial.opposite());
        let space = equation.space();
        let rho0 = DensityMatrix::basis_state(space.total_dim(), space.index(initial_level, 0, 0));
        Ok(Experiment {
            equation,
            rho0,
            kappa: self.kappa(),
            initial_level,
            target_level,
        })
    }
}
