//! Time integration of the master equation
//!
//! ```text
//! dρ/dt = −i[H(t), ρ] + L[ρ],   H(t) = H_static + f(t)·H_drive
//! ```
//!
//! where `f(t)` is the pump envelope. The production path is a fixed-step
//! classical Runge–Kutta scheme on the matrix form of ρ. An independent
//! reference path vectorizes ρ, builds the full Liouvillian superoperator by
//! Kronecker products, and applies its exponential slice by slice.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::dissipator::Dissipator;
use crate::operator::{
    hermiticity_error, max_abs, DensityMatrix, HilbertSpace, OperatorMatrix, PhysicalityTolerance,
    PhysicalityViolation, SparseOperator,
};

/// Default and maximum step (µs).
pub const DEFAULT_DT: f64 = 1e-3;

/// Default superoperator dimension cap of the reference propagator.
pub const DEFAULT_ORACLE_CAP: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvolutionError {
    #[error("step {dt} µs must be positive and at most {dt_max} µs")]
    InvalidStep { dt: f64, dt_max: f64 },
    #[error("integration window {0} µs must be finite and non-negative")]
    InvalidWindow(f64),
    #[error("invalid pulse: {0}")]
    InvalidPulse(String),
    #[error("state became unphysical at t = {time:.6} µs ({violation}); reduce dt")]
    Unphysical { time: f64, violation: PhysicalityViolation },
    #[error("initial state dimension {found} does not match the equation dimension {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("Hamiltonian builder is not affine in the pump envelope (deviation {0:e})")]
    NotAffine(f64),
    #[error("superoperator dimension {dim} exceeds the cap {cap}")]
    OracleTooLarge { dim: usize, cap: usize },
    #[error("the reference propagator needs at least one slice")]
    NoSlices,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PulseShape {
    /// `sin²(πt/T)` on `[0, T]`.
    SinSquared { duration: f64 },
    /// Rectangular pulse of unit height on `[0, T]`.
    Constant { duration: f64 },
    /// Piecewise-linear envelope through `(times[k], values[k])`, zero outside.
    Tabulated { times: Vec<f64>, values: Vec<f64> },
}

impl PulseShape {
    pub fn sin_squared(duration: f64) -> Self {
        PulseShape::SinSquared { duration }
    }

    pub fn tabulated(times: Vec<f64>, values: Vec<f64>) -> Result<Self, EvolutionError> {
        let p = PulseShape::Tabulated { times, values };
        p.validate()?;
        Ok(p)
    }

    pub fn duration(&self) -> f64 {
        match self {
            PulseShape::SinSquared { duration } | PulseShape::Constant { duration } => *duration,
            PulseShape::Tabulated { times, .. } => times.last().copied().unwrap_or(0.0),
        }
    }

    pub fn validate(&self) -> Result<(), EvolutionError> {
        match self {
            PulseShape::SinSquared { duration } | PulseShape::Constant { duration } => {
                if !(duration.is_finite() && *duration > 0.0) {
                    return Err(EvolutionError::InvalidPulse(format!("duration {duration} must be positive")));
                }
            }
            PulseShape::Tabulated { times, values } => {
                if times.len() < 2 || times.len() != values.len() {
                    return Err(EvolutionError::InvalidPulse(
                        "a tabulated pulse needs at least two (time, value) points".into(),
                    ));
                }
                if times.iter().any(|t| !t.is_finite()) || times[0] < 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(EvolutionError::InvalidPulse(
                        "tabulated times must be non-negative and strictly increasing".into(),
                    ));
                }
                if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return Err(EvolutionError::InvalidPulse("tabulated values must lie in [0, 1]".into()));
                }
            }
        }
        Ok(())
    }

    /// Envelope in `[0, 1]`; zero outside the pulse.
    pub fn envelope(&self, t: f64) -> f64 {
        match self {
            PulseShape::SinSquared { duration } => {
                if t <= 0.0 || t >= *duration {
                    0.0
                } else {
                    (PI * t / duration).sin().powi(2)
                }
            }
            PulseShape::Constant { duration } => {
                if (0.0..=*duration).contains(&t) {
                    1.0
                } else {
                    0.0
                }
            }
            PulseShape::Tabulated { times, values } => {
                if t < times[0] || t > *times.last().unwrap() {
                    return 0.0;
                }
                let k = times.partition_point(|x| *x <= t).clamp(1, times.len() - 1);
                let (t0, t1) = (times[k - 1], times[k]);
                let w = (t - t0) / (t1 - t0);
                values[k - 1] + w * (values[k] - values[k - 1])
            }
        }
    }
}

/// How the envelope enters each Runge–Kutta step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvelopeSampling {
    /// Envelope frozen at the step midpoint; the step then integrates an
    /// autonomous equation, exactly what the reference propagator slices.
    StepMidpoint,
    /// Envelope evaluated at each stage time.
    Continuous,
}

/// Generator split into a static part and the part scaled by the envelope.
#[derive(Debug, Clone)]
pub struct MasterEquation {
    space: HilbertSpace,
    h_static: OperatorMatrix,
    h_drive: OperatorMatrix,
    dissipator: Dissipator,
    // H_static − i·D
    k_static: SparseOperator,
    drive: SparseOperator,
}

impl MasterEquation {
    pub fn new(
        space: HilbertSpace,
        h_static: OperatorMatrix,
        h_drive: OperatorMatrix,
        dissipator: Dissipator,
    ) -> Result<Self, EvolutionError> {
        let n = space.total_dim();
        for m in [&h_static, &h_drive, dissipator.drain()] {
            if m.nrows() != n || m.ncols() != n {
                return Err(EvolutionError::Dimension { expected: n, found: m.nrows() });
            }
        }
        let k = &h_static - dissipator.drain() * C64::new(0.0, 1.0);
        Ok(Self {
            k_static: SparseOperator::from_dense(&k),
            drive: SparseOperator::from_dense(&h_drive),
            space,
            h_static,
            h_drive,
            dissipator,
        })
    }

    /// Splits `h_stat + h_int(envelope)` into static and driven parts by
    /// sampling the builder at envelope 0 and 1, and checks affinity at ½.
    pub fn from_builder<E, F>(
        space: HilbertSpace,
        h_stat: OperatorMatrix,
        dissipator: Dissipator,
        h_int: F,
    ) -> Result<Self, E>
    where
        F: Fn(f64) -> Result<OperatorMatrix, E>,
        E: From<EvolutionError>,
    {
        let h0 = h_int(0.0)?;
        let h1 = h_int(1.0)? - &h0;
        let half = h_int(0.5)?;
        let deviation = max_abs(&(&half - (&h0 + &h1 * C64::new(0.5, 0.0))));
        if deviation > 1e-12 * (1.0 + max_abs(&h1)) {
            return Err(EvolutionError::NotAffine(deviation).into());
        }
        Ok(Self::new(space, h_stat + h0, h1, dissipator)?)
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.total_dim()
    }

    pub fn h_static(&self) -> &OperatorMatrix {
        &self.h_static
    }

    pub fn h_drive(&self) -> &OperatorMatrix {
        &self.h_drive
    }

    pub fn dissipator(&self) -> &Dissipator {
        &self.dissipator
    }

    /// Per-level rates `s_i` with `tr L[ρ] = −2 Σ_i s_i·pop_i`, when the sink
    /// operator is diagonal and independent of the photon numbers.
    pub fn level_sink_rates(&self) -> Option<Vec<f64>> {
        let sink = self.dissipator.sink_operator();
        let scale = 1e-12 * (1.0 + max_abs(&sink));
        let mut off = sink.clone();
        off.fill_diagonal(C64::new(0.0, 0.0));
        if max_abs(&off) > scale {
            return None;
        }
        let mut rates = vec![0.0; self.space.n_levels()];
        for k in 0..self.dim() {
            let (i, p, m) = self.space.decompose(k);
            let v = sink[(k, k)].re;
            if p == 0 && m == 0 {
                rates[i] = v;
            } else if (rates[i] - v).abs() > scale {
                return None;
            }
        }
        Some(rates)
    }

    pub fn hamiltonian(&self, envelope: f64) -> OperatorMatrix {
        &self.h_static + &self.h_drive * C64::new(envelope, 0.0)
    }

    /// Dense reference evaluation of `dρ/dt`.
    pub fn rhs_dense(&self, rho: &OperatorMatrix, envelope: f64) -> OperatorMatrix {
        let h = self.hamiltonian(envelope);
        (&h * rho - rho * &h) * C64::new(0.0, -1.0) + self.dissipator.apply(rho)
    }

    /// `out = dρ/dt`; `scratch` must be dim×dim. Requires Hermitian ρ.
    fn rhs_into(&self, rho: &OperatorMatrix, envelope: f64, scratch: &mut OperatorMatrix, out: &mut OperatorMatrix) {
        let n = rho.nrows();
        scratch.fill(C64::new(0.0, 0.0));
        self.k_static.mul_add_left(rho, C64::new(1.0, 0.0), scratch);
        if envelope != 0.0 {
            self.drive.mul_add_left(rho, C64::new(envelope, 0.0), scratch);
        }
        // −i(Kρ − ρK†) = −i(M − M†) for Hermitian ρ
        for c in 0..n {
            for r in 0..n {
                let x = scratch[(r, c)] - scratch[(c, r)].conj();
                out[(r, c)] = C64::new(x.im, -x.re);
            }
        }
        self.dissipator.add_feeds_into(rho, out);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorOptions {
    pub dt: f64,
    pub dt_max: f64,
    /// End of the integration window (µs).
    pub t_end: f64,
    /// Keep the full density matrix every this many steps (0 keeps none).
    pub store_every: usize,
    pub sampling: EnvelopeSampling,
    /// Abort thresholds checked during the run.
    pub tolerance: PhysicalityTolerance,
    /// Run the eigenvalue positivity test on stored states.
    pub check_positivity: bool,
}

impl IntegratorOptions {
    /// Window = pulse + `tail_lifetimes` photon lifetimes `1/(2·2πκ)`.
    pub fn for_pulse(pulse: &PulseShape, kappa_mhz: f64, tail_lifetimes: f64) -> Self {
        let tail = tail_lifetimes / (2.0 * std::f64::consts::TAU * kappa_mhz);
        Self {
            t_end: pulse.duration() + tail,
            ..Self::default()
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    /// Number of uniform steps and their size (≤ `dt`).
    pub fn grid(&self) -> Result<(usize, f64), EvolutionError> {
        if !(self.dt > 0.0 && self.dt <= self.dt_max * (1.0 + 1e-12)) {
            return Err(EvolutionError::InvalidStep { dt: self.dt, dt_max: self.dt_max });
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(EvolutionError::InvalidWindow(self.t_end));
        }
        if self.t_end == 0.0 {
            return Ok((0, self.dt));
        }
        let n = (self.t_end / self.dt - 1e-9).ceil().max(1.0) as usize;
        Ok((n, self.t_end / n as f64))
    }
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            dt_max: DEFAULT_DT,
            t_end: 1.5,
            store_every: 10,
            sampling: EnvelopeSampling::StepMidpoint,
            tolerance: PhysicalityTolerance {
                hermiticity: 1e-9,
                trace_excess: 1e-9,
                min_eigenvalue: -1e-7,
            },
            check_positivity: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub rho: DensityMatrix,
}

/// Observables at every grid point plus decimated full states.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub level_labels: Vec<String>,
    pub step: f64,
    pub times: Vec<f64>,
    pub envelope: Vec<f64>,
    /// `populations[level][k]`, traced over photons.
    pub populations: Vec<Vec<f64>>,
    /// ⟨â†â⟩
    pub photons_plus: Vec<f64>,
    /// ⟨b̂†b̂⟩
    pub photons_minus: Vec<f64>,
    pub trace: Vec<f64>,
    /// Probability drained through sink channels up to each time,
    /// `∫ 2 tr(Sρ) dt`, accumulated with the integrator's own stage weights.
    pub sink_outflow: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub final_state: DensityMatrix,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_levels(&self) -> usize {
        self.populations.len()
    }
}

struct Recorder {
    traj: Trajectory,
    n_plus: Vec<f64>,
    n_minus: Vec<f64>,
    level_of: Vec<usize>,
}

impl Recorder {
    fn new(space: &HilbertSpace, n_points: usize, step: f64, rho0: &DensityMatrix) -> Self {
        let dim = space.total_dim();
        let (mut n_plus, mut n_minus, mut level_of) = (vec![0.0; dim], vec![0.0; dim], vec![0; dim]);
        for k in 0..dim {
            let (i, p, m) = space.decompose(k);
            level_of[k] = i;
            n_plus[k] = p as f64;
            n_minus[k] = m as f64;
        }
        let traj = Trajectory {
            level_labels: space.levels().to_vec(),
            step,
            times: Vec::with_capacity(n_points),
            envelope: Vec::with_capacity(n_points),
            populations: vec![Vec::with_capacity(n_points); space.n_levels()],
            photons_plus: Vec::with_capacity(n_points),
            photons_minus: Vec::with_capacity(n_points),
            trace: Vec::with_capacity(n_points),
            sink_outflow: Vec::with_capacity(n_points),
            snapshots: Vec::new(),
            final_state: rho0.clone(),
        };
        Self { traj, n_plus, n_minus, level_of }
    }

    fn record(&mut self, t: f64, envelope: f64, rho: &OperatorMatrix, outflow: f64) {
        let mut pops = vec![0.0; self.traj.populations.len()];
        let (mut na, mut nb, mut tr) = (0.0, 0.0, 0.0);
        for k in 0..rho.nrows() {
            let p = rho[(k, k)].re;
            pops[self.level_of[k]] += p;
            na += p * self.n_plus[k];
            nb += p * self.n_minus[k];
            tr += p;
        }
        for (series, p) in self.traj.populations.iter_mut().zip(pops) {
            series.push(p);
        }
        self.traj.times.push(t);
        self.traj.envelope.push(envelope);
        self.traj.photons_plus.push(na);
        self.traj.photons_minus.push(nb);
        self.traj.trace.push(tr);
        self.traj.sink_outflow.push(outflow);
    }
}

fn cheap_check(rho: &OperatorMatrix, tol: &PhysicalityTolerance) -> Result<(), PhysicalityViolation> {
    let mut tr = 0.0;
    for k in 0..rho.nrows() {
        let d = rho[(k, k)];
        if !d.re.is_finite() || !d.im.is_finite() {
            return Err(PhysicalityViolation::NonFinite);
        }
        if d.re < tol.min_eigenvalue {
            return Err(PhysicalityViolation::NegativeEigenvalue(d.re));
        }
        tr += d.re;
    }
    if !(-tol.trace_excess..=1.0 + tol.trace_excess).contains(&tr) {
        return Err(PhysicalityViolation::Trace(tr));
    }
    Ok(())
}

fn full_check(rho: &OperatorMatrix, tol: &PhysicalityTolerance, positivity: bool) -> Result<(), PhysicalityViolation> {
    cheap_check(rho, tol)?;
    let herm = hermiticity_error(rho);
    if herm > tol.hermiticity {
        return Err(PhysicalityViolation::NotHermitian(herm));
    }
    if positivity {
        let lambda = DensityMatrix::from_matrix_unchecked(rho.clone()).min_eigenvalue();
        if lambda < tol.min_eigenvalue {
            return Err(PhysicalityViolation::NegativeEigenvalue(lambda));
        }
    }
    Ok(())
}

/// Instantaneous sink flux `2 tr(Sρ)`.
fn sink_flux(sink: &SparseOperator, rho: &OperatorMatrix) -> f64 {
    2.0 * sink.entries().iter().map(|&(r, c, v)| (v * rho[(c, r)]).re).sum::<f64>()
}

/// `y += a·x`
fn axpy(y: &mut OperatorMatrix, a: C64, x: &OperatorMatrix) {
    for (yi, xi) in y.iter_mut().zip(x.iter()) {
        *yi += a * xi;
    }
}

/// Fixed-step classical fourth-order Runge–Kutta integration from t = 0 to
/// `options.t_end`.
pub fn integrate_master(
    eq: &MasterEquation,
    rho0: &DensityMatrix,
    pulse: &PulseShape,
    options: &IntegratorOptions,
) -> Result<Trajectory, EvolutionError> {
    pulse.validate()?;
    let n = eq.dim();
    if rho0.dim() != n {
        return Err(EvolutionError::Dimension { expected: n, found: rho0.dim() });
    }
    let (steps, h) = options.grid()?;
    let mut rec = Recorder::new(eq.space(), steps + 1, h, rho0);

    let mut rho = rho0.matrix().clone();
    let zeros = || DMatrix::<C64>::zeros(n, n);
    let (mut k1, mut k2, mut k3, mut k4, mut stage, mut scratch) = (zeros(), zeros(), zeros(), zeros(), zeros(), zeros());

    let store = |k: usize| options.store_every > 0 && (k.is_multiple_of(options.store_every) || k == steps);
    let sink = SparseOperator::from_dense(&eq.dissipator().sink_operator());
    let track = sink.nnz() > 0;
    let mut outflow = 0.0;
    rec.record(0.0, pulse.envelope(0.0), &rho, outflow);
    if store(0) {
        rec.traj.snapshots.push(Snapshot { step: 0, time: 0.0, rho: rho0.clone() });
    }

    let half = C64::new(h / 2.0, 0.0);
    let full = C64::new(h, 0.0);
    let sixth = C64::new(h / 6.0, 0.0);
    for k in 0..steps {
        let t = k as f64 * h;
        let (f0, fm, f1) = match options.sampling {
            EnvelopeSampling::StepMidpoint => {
                let f = pulse.envelope(t + h / 2.0);
                (f, f, f)
            }
            EnvelopeSampling::Continuous => (pulse.envelope(t), pulse.envelope(t + h / 2.0), pulse.envelope(t + h)),
        };
        let mut flux = if track { sink_flux(&sink, &rho) } else { 0.0 };
        eq.rhs_into(&rho, f0, &mut scratch, &mut k1);
        stage.copy_from(&rho);
        axpy(&mut stage, half, &k1);
        if track {
            flux += 2.0 * sink_flux(&sink, &stage);
        }
        eq.rhs_into(&stage, fm, &mut scratch, &mut k2);
        stage.copy_from(&rho);
        axpy(&mut stage, half, &k2);
        if track {
            flux += 2.0 * sink_flux(&sink, &stage);
        }
        eq.rhs_into(&stage, fm, &mut scratch, &mut k3);
        stage.copy_from(&rho);
        axpy(&mut stage, full, &k3);
        if track {
            flux += sink_flux(&sink, &stage);
        }
        eq.rhs_into(&stage, f1, &mut scratch, &mut k4);
        outflow += h / 6.0 * flux;

        k2 += &k3;
        axpy(&mut k1, C64::new(2.0, 0.0), &k2);
        k1 += &k4;
        axpy(&mut rho, sixth, &k1);

        let step = k + 1;
        let t_next = step as f64 * h;
        let stored = store(step);
        let checked = if stored {
            full_check(&rho, &options.tolerance, options.check_positivity)
        } else {
            cheap_check(&rho, &options.tolerance)
        };
        checked.map_err(|violation| EvolutionError::Unphysical { time: t_next, violation })?;
        rec.record(t_next, pulse.envelope(t_next), &rho, outflow);
        if stored {
            rec.traj.snapshots.push(Snapshot {
                step,
                time: t_next,
                rho: DensityMatrix::from_matrix_unchecked(rho.clone()),
            });
        }
    }
    rec.traj.final_state = DensityMatrix::from_matrix_unchecked(rho);
    Ok(rec.traj)
}

/// Coordinate-list matrix acting on vectorized states.
struct SuperOperator {
    dim: usize,
    entries: Vec<(usize, usize, C64)>,
    norm1: f64,
}

impl SuperOperator {
    fn from_dense(m: &DMatrix<C64>) -> Self {
        let mut entries = Vec::new();
        let mut norm1: f64 = 0.0;
        for c in 0..m.ncols() {
            let mut col = 0.0;
            for r in 0..m.nrows() {
                let v = m[(r, c)];
                if v != C64::new(0.0, 0.0) {
                    entries.push((r, c, v));
                    col += v.norm();
                }
            }
            norm1 = norm1.max(col);
        }
        Self { dim: m.nrows(), entries, norm1 }
    }

    fn apply_into(&self, v: &[C64], scale: C64, out: &mut [C64]) {
        for &(r, c, x) in &self.entries {
            out[r] += x * scale * v[c];
        }
    }
}

/// `exp(tau·(A + s·B))·v` by a scaled Taylor series, accurate to rounding.
fn exp_action(a: &SuperOperator, b: &SuperOperator, s: f64, tau: f64, v: &mut [C64]) {
    let norm = (a.norm1 + s.abs() * b.norm1) * tau;
    let substeps = norm.ceil().max(1.0) as usize;
    let h = tau / substeps as f64;
    let mut term = vec![C64::new(0.0, 0.0); a.dim];
    let mut next = vec![C64::new(0.0, 0.0); a.dim];
    for _ in 0..substeps {
        term.copy_from_slice(v);
        for k in 1..=60 {
            next.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
            let scale = C64::new(h / k as f64, 0.0);
            a.apply_into(&term, scale, &mut next);
            if s != 0.0 {
                b.apply_into(&term, scale * s, &mut next);
            }
            std::mem::swap(&mut term, &mut next);
            let mut term_max: f64 = 0.0;
            let mut acc_max: f64 = 0.0;
            for (acc, t) in v.iter_mut().zip(term.iter()) {
                *acc += *t;
                term_max = term_max.max(t.norm());
                acc_max = acc_max.max(acc.norm());
            }
            if term_max <= 1e-18 * acc_max.max(1e-300) {
                break;
            }
        }
    }
}

/// Liouvillian superoperators `(S_static, S_drive)` in column-stacking
/// convention, `vec(AXB) = (Bᵀ ⊗ A) vec(X)`.
pub fn liouvillian_superoperators(eq: &MasterEquation) -> (DMatrix<C64>, DMatrix<C64>) {
    let n = eq.dim();
    let id = DMatrix::<C64>::identity(n, n);
    let minus_i = C64::new(0.0, -1.0);
    let k = eq.h_static() - eq.dissipator().drain() * C64::new(0.0, 1.0);
    let mut s_static = (id.kronecker(&k) - k.map(|z| z.conj()).kronecker(&id)) * minus_i;
    for feed in eq.dissipator().feeds() {
        s_static += feed.op.map(|z| z.conj()).kronecker(&feed.op) * C64::new(2.0 * feed.rate, 0.0);
    }
    let h1 = eq.h_drive();
    let s_drive = (id.kronecker(h1) - h1.transpose().kronecker(&id)) * minus_i;
    (s_static, s_drive)
}

/// Reference propagator: envelope frozen at each slice midpoint, exact
/// exponential of the superoperator on each slice.
pub fn propagator_oracle(
    eq: &MasterEquation,
    rho0: &DensityMatrix,
    pulse: &PulseShape,
    t_end: f64,
    n_slices: usize,
    cap: usize,
) -> Result<DensityMatrix, EvolutionError> {
    pulse.validate()?;
    let n = eq.dim();
    if rho0.dim() != n {
        return Err(EvolutionError::Dimension { expected: n, found: rho0.dim() });
    }
    if n * n > cap {
        return Err(EvolutionError::OracleTooLarge { dim: n * n, cap });
    }
    if n_slices == 0 {
        return Err(EvolutionError::NoSlices);
    }
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(EvolutionError::InvalidWindow(t_end));
    }
    if t_end == 0.0 {
        return Ok(rho0.clone());
    }
    let (s_static, s_drive) = liouvillian_superoperators(eq);
    let a = SuperOperator::from_dense(&s_static);
    let b = SuperOperator::from_dense(&s_drive);
    let tau = t_end / n_slices as f64;
    let mut v: Vec<C64> = rho0.matrix().as_slice().to_vec();
    for k in 0..n_slices {
        let s = pulse.envelope((k as f64 + 0.5) * tau);
        exp_action(&a, &b, s, tau, &mut v);
    }
    Ok(DensityMatrix::from_matrix_unchecked(DMatrix::from_column_slice(n, n, &v)))
}

/// Largest entrywise difference of two density matrices.
pub fn max_entry_difference(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    max_abs(&(a.matrix() - b.matrix()))
}
