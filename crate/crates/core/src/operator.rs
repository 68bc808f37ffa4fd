//! Product Hilbert space `atom ⊗ σ⁺ Fock ⊗ σ⁻ Fock` and the elementary
//! operators acting on it.
//!
//! Basis ordering is atom-major, then σ⁺ photon number, then σ⁻ photon
//! number: the state `|i, n₊, n₋⟩` sits at index
//! `(i * (c+1) + n₊) * (c+1) + n₋` for photon cutoff `c`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use thiserror::Error;

/// Dense complex square matrix on a [`HilbertSpace`].
pub type OperatorMatrix = DMatrix<C64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("photon cutoff must be at least 1")]
    ZeroCutoff,
    #[error("a Hilbert space needs at least one atomic level")]
    NoLevels,
    #[error("duplicate atomic level label `{0}`")]
    DuplicateLevel(String),
    #[error("unknown atomic level label `{0}`")]
    UnknownLevel(String),
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
}

/// Tensor factor of the product space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Atom,
    SigmaPlusMode,
    SigmaMinusMode,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HilbertSpace {
    levels: Vec<String>,
    photon_cutoff: usize,
}

impl HilbertSpace {
    pub fn new<I, S>(levels: I, photon_cutoff: usize) -> Result<Self, OperatorError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        if photon_cutoff == 0 {
            return Err(OperatorError::ZeroCutoff);
        }
        let levels: Vec<String> = levels.into_iter().map(Into::into).collect();
        if levels.is_empty() {
            return Err(OperatorError::NoLevels);
        }
        for (k, label) in levels.iter().enumerate() {
            if levels[..k].contains(label) {
                return Err(OperatorError::DuplicateLevel(label.clone()));
            }
        }
        Ok(Self { levels, photon_cutoff })
    }

    pub fn levels(&self) -> &[String] {
        &self.levels
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn photon_cutoff(&self) -> usize {
        self.photon_cutoff
    }

    /// Dimension of a single cavity-mode factor.
    pub fn fock_dim(&self) -> usize {
        self.photon_cutoff + 1
    }

    pub fn total_dim(&self) -> usize {
        self.n_levels() * self.fock_dim() * self.fock_dim()
    }

    pub fn slot_dim(&self, slot: Slot) -> usize {
        match slot {
            Slot::Atom => self.n_levels(),
            Slot::SigmaPlusMode | Slot::SigmaMinusMode => self.fock_dim(),
        }
    }

    pub fn level_index(&self, label: &str) -> Result<usize, OperatorError> {
        self.levels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| OperatorError::UnknownLevel(label.to_string()))
    }

    /// Flat index of `|level, n_plus, n_minus⟩`.
    pub fn index(&self, level: usize, n_plus: usize, n_minus: usize) -> usize {
        let f = self.fock_dim();
        debug_assert!(level < self.n_levels() && n_plus < f && n_minus < f);
        (level * f + n_plus) * f + n_minus
    }

    /// Inverse of [`HilbertSpace::index`].
    pub fn decompose(&self, index: usize) -> (usize, usize, usize) {
        let f = self.fock_dim();
        (index / (f * f), (index / f) % f, index % f)
    }
}

/// Single-mode lowering operator truncated at `cutoff` photons.
pub fn annihilator(cutoff: usize) -> Result<OperatorMatrix, OperatorError> {
    if cutoff == 0 {
        return Err(OperatorError::ZeroCutoff);
    }
    let n = cutoff + 1;
    let mut a = OperatorMatrix::zeros(n, n);
    for k in 1..n {
        a[(k - 1, k)] = C64::new((k as f64).sqrt(), 0.0);
    }
    Ok(a)
}

/// Lift an operator on one tensor factor to the full product space.
pub fn embed(
    space: &HilbertSpace,
    slot: Slot,
    local_op: &OperatorMatrix,
) -> Result<OperatorMatrix, OperatorError> {
    let local_dim = space.slot_dim(slot);
    if local_op.nrows() != local_dim || local_op.ncols() != local_dim {
        return Err(OperatorError::DimensionMismatch {
            context: "embed",
            expected: local_dim,
            found: local_op.nrows().max(local_op.ncols()),
        });
    }
    let atom = OperatorMatrix::identity(space.n_levels(), space.n_levels());
    let mode = OperatorMatrix::identity(space.fock_dim(), space.fock_dim());
    let out = match slot {
        Slot::Atom => local_op.kronecker(&mode).kronecker(&mode),
        Slot::SigmaPlusMode => atom.kronecker(local_op).kronecker(&mode),
        Slot::SigmaMinusMode => atom.kronecker(&mode).kronecker(local_op),
    };
    Ok(out)
}

/// `|i⟩⟨j| ⊗ 1_photons`.
pub fn transition(space: &HilbertSpace, i: &str, j: &str) -> Result<OperatorMatrix, OperatorError> {
    let i = space.level_index(i)?;
    let j = space.level_index(j)?;
    Ok(transition_by_index(space, i, j))
}

pub(crate) fn transition_by_index(space: &HilbertSpace, i: usize, j: usize) -> OperatorMatrix {
    let n = space.total_dim();
    let f = space.fock_dim();
    let mut op = OperatorMatrix::zeros(n, n);
    for n_plus in 0..f {
        for n_minus in 0..f {
            op[(space.index(i, n_plus, n_minus), space.index(j, n_plus, n_minus))] = C64::new(1.0, 0.0);
        }
    }
    op
}

/// Embedded σ⁺-mode annihilator `â`.
pub fn sigma_plus_annihilator(space: &HilbertSpace) -> OperatorMatrix {
    let a = annihilator(space.photon_cutoff()).expect("space cutoff is validated at construction");
    embed(space, Slot::SigmaPlusMode, &a).expect("local dimension matches by construction")
}

/// Embedded σ⁻-mode annihilator `b̂`.
pub fn sigma_minus_annihilator(space: &HilbertSpace) -> OperatorMatrix {
    let b = annihilator(space.photon_cutoff()).expect("space cutoff is validated at construction");
    embed(space, Slot::SigmaMinusMode, &b).expect("local dimension matches by construction")
}

/// `tr(ρ · op)`.
pub fn expectation(rho: &DensityMatrix, op: &OperatorMatrix) -> Result<C64, OperatorError> {
    let r = rho.matrix();
    if op.nrows() != r.nrows() || op.ncols() != r.ncols() {
        return Err(OperatorError::DimensionMismatch {
            context: "expectation",
            expected: r.nrows(),
            found: op.nrows(),
        });
    }
    let n = r.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += r[(i, k)] * op[(k, i)];
        }
    }
    Ok(acc)
}

pub fn commutator(a: &OperatorMatrix, b: &OperatorMatrix) -> OperatorMatrix {
    a * b - b * a
}

/// Largest entry of `|op − op†|`.
pub fn hermiticity_error(op: &OperatorMatrix) -> f64 {
    let n = op.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for k in i..n {
            worst = worst.max((op[(i, k)] - op[(k, i)].conj()).norm());
        }
    }
    worst
}

/// Hermiticity test relative to the largest entry magnitude.
pub fn is_hermitian(op: &OperatorMatrix, rel_tol: f64) -> bool {
    if !op.is_square() {
        return false;
    }
    let scale = op.iter().fold(0.0f64, |m, z| m.max(z.norm())).max(f64::MIN_POSITIVE);
    hermiticity_error(op) <= rel_tol * scale
}

pub fn max_abs(op: &OperatorMatrix) -> f64 {
    op.iter().fold(0.0f64, |m, z| m.max(z.norm()))
}

/// Coordinate-list form of an operator, used by the time stepper.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    entries: Vec<(usize, usize, C64)>,
}

impl SparseOperator {
    /// Keeps every entry that is not exactly zero.
    pub fn from_dense(op: &OperatorMatrix) -> Self {
        let mut entries = Vec::new();
        for r in 0..op.nrows() {
            for c in 0..op.ncols() {
                let v = op[(r, c)];
                if v != C64::new(0.0, 0.0) {
                    entries.push((r, c, v));
                }
            }
        }
        Self { dim: op.nrows(), entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, usize, C64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// `out += scale · self · m`
    pub fn mul_add_left(&self, m: &OperatorMatrix, scale: C64, out: &mut OperatorMatrix) {
        let n = m.ncols();
        for &(r, c, v) in &self.entries {
            let w = v * scale;
            for col in 0..n {
                out[(r, col)] += w * m[(c, col)];
            }
        }
    }
}

/// Limits used when validating a density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalityTolerance {
    pub hermiticity: f64,
    pub trace_excess: f64,
    pub min_eigenvalue: f64,
}

impl Default for PhysicalityTolerance {
    fn default() -> Self {
        Self {
            hermiticity: 1e-10,
            trace_excess: 1e-9,
            min_eigenvalue: -1e-9,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhysicalityViolation {
    #[error("density matrix is not square")]
    NotSquare,
    #[error("density matrix is not Hermitian (max |ρ−ρ†| = {0:e})")]
    NotHermitian(f64),
    #[error("density matrix trace {0} outside [0, 1]")]
    Trace(f64),
    #[error("density matrix has negative eigenvalue {0:e}")]
    NegativeEigenvalue(f64),
    #[error("density matrix contains non-finite entries")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(OperatorMatrix);

impl DensityMatrix {
    /// Wraps a matrix without physicality checks (the stepper produces
    /// intermediate states that are validated separately).
    pub fn from_matrix_unchecked(m: OperatorMatrix) -> Self {
        Self(m)
    }

    pub fn from_matrix(m: OperatorMatrix) -> Result<Self, PhysicalityViolation> {
        let rho = Self(m);
        rho.check(&PhysicalityTolerance::default())?;
        Ok(rho)
    }

    /// Pure basis state `|k⟩⟨k|`.
    pub fn basis_state(dim: usize, k: usize) -> Self {
        let mut m = OperatorMatrix::zeros(dim, dim);
        m[(k, k)] = C64::new(1.0, 0.0);
        Self(m)
    }

    /// `|level, n₊, n₋⟩⟨level, n₊, n₋|`.
    pub fn product_state(
        space: &HilbertSpace,
        level: &str,
        n_plus: usize,
        n_minus: usize,
    ) -> Result<Self, OperatorError> {
        let i = space.level_index(level)?;
        if n_plus > space.photon_cutoff() || n_minus > space.photon_cutoff() {
            return Err(OperatorError::DimensionMismatch {
                context: "product_state photon number",
                expected: space.photon_cutoff(),
                found: n_plus.max(n_minus),
            });
        }
        Ok(Self::basis_state(space.total_dim(), space.index(i, n_plus, n_minus)))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(OperatorMatrix::identity(dim, dim) / C64::new(dim as f64, 0.0))
    }

    pub fn matrix(&self) -> &OperatorMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> OperatorMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.0)
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0);
        SymmetricEigen::new(h).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Population of atomic level `level`, traced over both cavity modes.
    pub fn level_population(&self, space: &HilbertSpace, level: usize) -> f64 {
        let f = space.fock_dim();
        let mut p = 0.0;
        for n_plus in 0..f {
            for n_minus in 0..f {
                let k = space.index(level, n_plus, n_minus);
                p += self.0[(k, k)].re;
            }
        }
        p
    }

    pub fn check(&self, tol: &PhysicalityTolerance) -> Result<(), PhysicalityViolation> {
        if !self.0.is_square() {
            return Err(PhysicalityViolation::NotSquare);
        }
        if self.0.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(PhysicalityViolation::NonFinite);
        }
        let herm = self.hermiticity_error();
        if herm > tol.hermiticity {
            return Err(PhysicalityViolation::NotHermitian(herm));
        }
        let tr = self.trace();
        if !(0.0..=1.0 + tol.trace_excess).contains(&tr) {
            return Err(PhysicalityViolation::Trace(tr));
        }
        let lambda = self.min_eigenvalue();
        if lambda < tol.min_eigenvalue {
            return Err(PhysicalityViolation::NegativeEigenvalue(lambda));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_level() -> HilbertSpace {
        HilbertSpace::new(["minus", "e", "plus"], 1).unwrap()
    }

    fn hermitian_eigenvalues(op: &OperatorMatrix) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(op.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }

    #[test]
    fn annihilator_cutoff_one() {
        let a = annihilator(1).unwrap();
        let expected = OperatorMatrix::from_row_slice(
            2,
            2,
            &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)],
        );
        assert_eq!(a, expected);
        let vacuum = nalgebra::DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        assert!((a.clone() * vacuum).iter().all(|z| *z == C64::new(0.0, 0.0)));
        assert_eq!(&a * &a, OperatorMatrix::zeros(2, 2));
    }

    #[test]
    fn annihilator_cutoff_two_has_sqrt_two() {
        let a = annihilator(2).unwrap();
        assert!((a[(1, 2)].re - std::f64::consts::SQRT_2).abs() < 1e-15);
        assert_eq!(a[(0, 1)].re, 1.0);
    }

    #[test]
    fn zero_cutoff_rejected() {
        assert_eq!(annihilator(0), Err(OperatorError::ZeroCutoff));
        assert!(matches!(HilbertSpace::new(["a"], 0), Err(OperatorError::ZeroCutoff)));
    }

    #[test]
    fn space_dimension_and_labels() {
        let s = three_level();
        assert_eq!(s.total_dim(), 12);
        assert_eq!(HilbertSpace::new(["a", "b"], 2).unwrap().total_dim(), 18);
        assert_eq!(
            HilbertSpace::new(["a", "a"], 1),
            Err(OperatorError::DuplicateLevel("a".into()))
        );
        for k in 0..s.total_dim() {
            let (i, p, m) = s.decompose(k);
            assert_eq!(s.index(i, p, m), k);
        }
    }

    #[test]
    fn embed_identity_gives_identity() {
        let s = three_level();
        for slot in [Slot::Atom, Slot::SigmaPlusMode, Slot::SigmaMinusMode] {
            let d = s.slot_dim(slot);
            let id = embed(&s, slot, &OperatorMatrix::identity(d, d)).unwrap();
            assert_eq!(id, OperatorMatrix::identity(12, 12));
        }
    }

    #[test]
    fn embedded_number_operator_spectrum() {
        let s = three_level();
        let a = embed(&s, Slot::SigmaPlusMode, &annihilator(1).unwrap()).unwrap();
        let n = a.adjoint() * &a;
        let ev = hermitian_eigenvalues(&n);
        assert_eq!(ev.len(), 12);
        assert!(ev[..6].iter().all(|x| x.abs() < 1e-14));
        assert!(ev[6..].iter().all(|x| (x - 1.0).abs() < 1e-14));
    }

    #[test]
    fn embed_rejects_wrong_dimension() {
        let s = three_level();
        let err = embed(&s, Slot::Atom, &annihilator(1).unwrap()).unwrap_err();
        assert!(matches!(err, OperatorError::DimensionMismatch { expected: 3, .. }));
    }

    #[test]
    fn modes_commute() {
        let s = three_level();
        let a = sigma_plus_annihilator(&s);
        let b = sigma_minus_annihilator(&s);
        assert!(max_abs(&commutator(&a, &b.adjoint())) < 1e-14);
        assert!(max_abs(&commutator(&a, &b)) < 1e-14);
    }

    #[test]
    fn transition_projector_algebra() {
        let s = three_level();
        let pe = transition(&s, "e", "e").unwrap();
        assert_eq!(pe.trace().re, 4.0);
        let mp = transition(&s, "minus", "plus").unwrap();
        let pm = transition(&s, "plus", "minus").unwrap();
        assert_eq!(&mp * &pm, transition(&s, "minus", "minus").unwrap());
        assert_eq!(pm.iter().filter(|z| **z != C64::new(0.0, 0.0)).count(), 4);
        assert_eq!(pm.adjoint(), mp);
        assert_eq!(
            transition(&s, "e", "nope"),
            Err(OperatorError::UnknownLevel("nope".into()))
        );
    }

    #[test]
    fn expectation_examples() {
        let s = three_level();
        let a = sigma_plus_annihilator(&s);
        let n = a.adjoint() * &a;
        let vac = DensityMatrix::product_state(&s, "plus", 0, 0).unwrap();
        assert_eq!(expectation(&vac, &n).unwrap(), C64::new(0.0, 0.0));
        let one = DensityMatrix::product_state(&s, "minus", 1, 0).unwrap();
        assert_eq!(expectation(&one, &n).unwrap(), C64::new(1.0, 0.0));
        let mixed = DensityMatrix::maximally_mixed(12);
        let id = OperatorMatrix::identity(12, 12);
        assert!((expectation(&mixed, &id).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(expectation(&mixed, &OperatorMatrix::identity(4, 4)).is_err());
    }

    #[test]
    fn density_matrix_checks() {
        let s = three_level();
        let rho = DensityMatrix::product_state(&s, "plus", 0, 0).unwrap();
        assert!(rho.check(&PhysicalityTolerance::default()).is_ok());
        assert_eq!(rho.level_population(&s, 2), 1.0);

        let mut bad = OperatorMatrix::zeros(2, 2);
        bad[(0, 0)] = C64::new(1.5, 0.0);
        bad[(1, 1)] = C64::new(-0.5, 0.0);
        let bad = DensityMatrix::from_matrix_unchecked(bad);
        assert!(matches!(
            bad.check(&PhysicalityTolerance::default()),
            Err(PhysicalityViolation::Trace(_)) | Err(PhysicalityViolation::NegativeEigenvalue(_))
        ));

        let mut skew = OperatorMatrix::identity(2, 2) * C64::new(0.5, 0.0);
        skew[(0, 1)] = C64::new(0.1, 0.0);
        assert!(matches!(
            DensityMatrix::from_matrix(skew),
            Err(PhysicalityViolation::NotHermitian(_))
        ));
    }

    #[test]
    fn sparse_left_multiply_matches_dense() {
        let s = three_level();
        let a = sigma_plus_annihilator(&s) + transition(&s, "e", "minus").unwrap() * C64::new(0.3, -0.2);
        let m = OperatorMatrix::from_fn(12, 12, |r, c| C64::new(r as f64 - c as f64, (r * c) as f64 * 0.1));
        let sp = SparseOperator::from_dense(&a);
        let mut out = OperatorMatrix::zeros(12, 12);
        sp.mul_add_left(&m, C64::new(1.0, 0.0), &mut out);
        assert!(max_abs(&(out - &a * &m)) < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn transition_adjoint_is_reversed(i in 0usize..3, j in 0usize..3) {
                let s = three_level();
                let labels = ["minus", "e", "plus"];
                let t = transition(&s, labels[i], labels[j]).unwrap();
                prop_assert_eq!(t.adjoint(), transition(&s, labels[j], labels[i]).unwrap());
            }

            #[test]
            fn embed_preserves_spectrum(d0 in -2.0f64..2.0, d1 in -2.0f64..2.0, d2 in -2.0f64..2.0, off in -1.0f64..1.0) {
                let s = three_level();
                let mut local = OperatorMatrix::zeros(3, 3);
                local[(0, 0)] = C64::new(d0, 0.0);
                local[(1, 1)] = C64::new(d1, 0.0);
                local[(2, 2)] = C64::new(d2, 0.0);
                local[(0, 2)] = C64::new(off, off / 2.0);
                local[(2, 0)] = local[(0, 2)].conj();
                let local_ev = hermitian_eigenvalues(&local);
                let big_ev = hermitian_eigenvalues(&embed(&s, Slot::Atom, &local).unwrap());
                for (k, ev) in big_ev.iter().enumerate() {
                    prop_assert!((ev - local_ev[k / 4]).abs() < 1e-12);
                }
            }

            #[test]
            fn expectation_of_identity_is_trace(diag in proptest::collection::vec(0.0f64..1.0, 12)) {
                let m = OperatorMatrix::from_fn(12, 12, |r, c| if r == c { C64::new(diag[r], 0.0) } else { C64::new(0.0, 0.0) });
                let rho = DensityMatrix::from_matrix_unchecked(m);
                let e = expectation(&rho, &OperatorMatrix::identity(12, 12)).unwrap();
                prop_assert!((e.re - rho.trace()).abs() < 1e-14);
            }
        }
    }
}
