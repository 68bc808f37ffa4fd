//! Lindblad dissipators written as a "feed" part `Σ 2 r O ρ O†` and a
//! "drain" part `−(D ρ + ρ D)`.
//!
//! Cavity decay pairs every feed with the matching drain `r O†O`, so the
//! trace is conserved. Spontaneous decay from an excited level drains at the
//! full polarisation decay rate while only the modeled channels feed back
//! into the Hilbert space; the difference leaves as trace deficit.

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::operator::{OperatorMatrix, SparseOperator};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DissipatorError {
    #[error("negative decay rate {rate} for channel `{channel}`")]
    NegativeRate { channel: String, rate: f64 },
    #[error("non-finite decay rate for channel `{0}`")]
    NonFiniteRate(String),
    #[error("operator dimension {found} does not match dissipator dimension {expected}")]
    Dimension { expected: usize, found: usize },
}

/// One `2·rate·O ρ O†` term. Rates are angular (rad/µs).
#[derive(Debug, Clone, PartialEq)]
pub struct Feed {
    pub label: String,
    pub rate: f64,
    pub op: OperatorMatrix,
    sparse: SparseOperator,
}

impl Feed {
    pub fn sparse(&self) -> &SparseOperator {
        &self.sparse
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dissipator {
    dim: usize,
    feeds: Vec<Feed>,
    drain: OperatorMatrix,
}

impl Dissipator {
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            feeds: Vec::new(),
            drain: OperatorMatrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn feeds(&self) -> &[Feed] {
        &self.feeds
    }

    /// Hermitian operator `D` of the anticommutator term.
    pub fn drain(&self) -> &OperatorMatrix {
        &self.drain
    }

    fn check(&self, label: &str, rate: f64, op: &OperatorMatrix) -> Result<(), DissipatorError> {
        if !rate.is_finite() {
            return Err(DissipatorError::NonFiniteRate(label.to_string()));
        }
        if rate < 0.0 {
            return Err(DissipatorError::NegativeRate {
                channel: label.to_string(),
                rate,
            });
        }
        if op.nrows() != self.dim || op.ncols() != self.dim {
            return Err(DissipatorError::Dimension {
                expected: self.dim,
                found: op.nrows(),
            });
        }
        Ok(())
    }

    /// Trace-preserving channel `rate·(2OρO† − O†Oρ − ρO†O)`.
    pub fn add_channel(&mut self, label: &str, rate: f64, op: OperatorMatrix) -> Result<(), DissipatorError> {
        self.check(label, rate, &op)?;
        if rate == 0.0 {
            return Ok(());
        }
        self.drain += (op.adjoint() * &op) * C64::new(rate, 0.0);
        self.push_feed(label, rate, op);
        Ok(())
    }

    /// Feed term only; the matching drain is supplied via [`Dissipator::add_drain`].
    pub fn add_feed(&mut self, label: &str, rate: f64, op: OperatorMatrix) -> Result<(), DissipatorError> {
        self.check(label, rate, &op)?;
        if rate == 0.0 {
            return Ok(());
        }
        self.push_feed(label, rate, op);
        Ok(())
    }

    /// Adds `rate·projector` to the drain operator.
    pub fn add_drain(&mut self, label: &str, rate: f64, projector: &OperatorMatrix) -> Result<(), DissipatorError> {
        self.check(label, rate, projector)?;
        if rate == 0.0 {
            return Ok(());
        }
        self.drain += projector * C64::new(rate, 0.0);
        Ok(())
    }

    fn push_feed(&mut self, label: &str, rate: f64, op: OperatorMatrix) {
        let sparse = SparseOperator::from_dense(&op);
        self.feeds.push(Feed {
            label: label.to_string(),
            rate,
            op,
            sparse,
        });
    }

    /// `L[ρ]`, dense reference evaluation.
    pub fn apply(&self, rho: &OperatorMatrix) -> OperatorMatrix {
        let mut out = -(&self.drain * rho + rho * &self.drain);
        for feed in &self.feeds {
            out += (&feed.op * rho * feed.op.adjoint()) * C64::new(2.0 * feed.rate, 0.0);
        }
        out
    }

    /// `out += Σ 2 r O ρ O†` using the sparse form of each feed.
    pub fn add_feeds_into(&self, rho: &OperatorMatrix, out: &mut OperatorMatrix) {
        for feed in &self.feeds {
            let w = 2.0 * feed.rate;
            let e = feed.sparse.entries();
            for &(r1, c1, v1) in e {
                for &(r2, c2, v2) in e {
                    out[(r1, r2)] += v1 * v2.conj() * rho[(c1, c2)] * w;
                }
            }
        }
    }

    /// Operator `S` with `tr L[ρ] = −2 tr(S ρ)`; zero for closed systems.
    pub fn sink_operator(&self) -> OperatorMatrix {
        let mut s = self.drain.clone();
        for feed in &self.feeds {
            s -= (feed.op.adjoint() * &feed.op) * C64::new(feed.rate, 0.0);
        }
        s
    }
}

/// Random Hermitian matrix with unit trace, for trace-bookkeeping tests.
#[cfg(test)]
pub(crate) fn pseudo_random_hermitian(dim: usize, seed: u64) -> OperatorMatrix {
    // xorshift, enough for test inputs
    let mut x = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    let mut next = || {
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let mut m = nalgebra::DMatrix::<C64>::zeros(dim, dim);
    for r in 0..dim {
        for c in r..dim {
            let v = if r == c { C64::new(next(), 0.0) } else { C64::new(next(), next()) };
            m[(r, c)] = v;
            m[(c, r)] = v.conj();
        }
    }
    let tr = m.trace();
    if tr.re.abs() > 1e-3 {
        m /= tr;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::max_abs;

    #[test]
    fn negative_rate_rejected() {
        let mut d = Dissipator::empty(2);
        let err = d.add_channel("x", -1.0, OperatorMatrix::identity(2, 2)).unwrap_err();
        assert!(matches!(err, DissipatorError::NegativeRate { .. }));
        assert!(d.add_feed("x", f64::NAN, OperatorMatrix::identity(2, 2)).is_err());
        assert!(d.add_drain("x", 1.0, &OperatorMatrix::identity(3, 3)).is_err());
    }

    #[test]
    fn sparse_feeds_match_dense() {
        let mut d = Dissipator::empty(4);
        let mut op = OperatorMatrix::zeros(4, 4);
        op[(0, 1)] = C64::new(1.0, 0.0);
        op[(2, 3)] = C64::new(0.5, 0.5);
        d.add_channel("a", 1.7, op).unwrap();
        let rho = pseudo_random_hermitian(4, 3);
        let mut fast = -(d.drain() * &rho + &rho * d.drain());
        d.add_feeds_into(&rho, &mut fast);
        assert!(max_abs(&(fast - d.apply(&rho))) < 1e-14);
    }

    #[test]
    fn sink_operator_tracks_trace_loss() {
        let mut d = Dissipator::empty(3);
        let mut lower = OperatorMatrix::zeros(3, 3);
        lower[(0, 2)] = C64::new(1.0, 0.0);
        let mut proj = OperatorMatrix::zeros(3, 3);
        proj[(2, 2)] = C64::new(1.0, 0.0);
        d.add_feed("2->0", 0.25, lower).unwrap();
        d.add_drain("2", 1.0, &proj).unwrap();
        let rho = pseudo_random_hermitian(3, 11);
        let lhs = d.apply(&rho).trace();
        let rhs = (d.sink_operator() * &rho).trace() * C64::new(-2.0, 0.0);
        assert!((lhs - rhs).norm() < 1e-14);
        assert!((d.sink_operator()[(2, 2)].re - 0.75).abs() < 1e-15);
    }
}
