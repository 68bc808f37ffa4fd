//! Lindblad master-equation simulator for a single multilevel atom in a
//! two-mode (σ⁺/σ⁻) optical cavity, driven by a pulsed pump laser.
//!
//! User-facing frequencies are ν = ω/2π in MHz; internally everything is
//! angular (rad/µs) with time in µs and ħ = 1.

pub mod config;
pub mod dissipator;
pub mod evolution;
pub mod ideal;
pub mod model;
pub mod observables;
pub mod operator;
pub mod output;
pub mod rubidium;
pub mod scan;

pub mod units {
    use std::f64::consts::TAU;

    /// MHz (ν = ω/2π) to rad/µs.
    pub fn angular(mhz: f64) -> f64 {
        TAU * mhz
    }
}

pub use evolution::{integrate_master, propagator_oracle, IntegratorOptions, MasterEquation, PulseShape, Trajectory};
pub use model::{Experiment, GroundState, ModelError, ModelSpec, Polarisation};
pub use operator::{DensityMatrix, HilbertSpace, OperatorMatrix};
