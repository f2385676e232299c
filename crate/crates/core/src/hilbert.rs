//! Dense complex linear algebra over small Hilbert spaces.
//!
//! Everything here is exact-dimension and dense: the largest space in use is the
//! three-qubit teleportation register (dimension 8). Kronecker products put the
//! left factor on the high-order index, so `|x⟩ ⊗ |y⟩` has amplitude index
//! `x * dim(y) + y`.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use crate::numeric::Tolerances;
use crate::{Error, Result};

/// A complex amplitude.
pub type ComplexAmplitude = Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A normalized pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Builds a state, rejecting vectors whose squared norm is not one within 1e-9.
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::input("amplitudes", "state must have positive dimension"));
        }
        let norm_sq = norm_sq(&amplitudes);
        if !norm_sq.is_finite() || (norm_sq - 1.0).abs() > Tolerances::DEFAULT.normalization {
            return Err(Error::NotNormalized { norm_sq });
        }
        Ok(Self { amplitudes })
    }

    /// Rescales an arbitrary nonzero vector to unit norm.
    pub fn normalized(amplitudes: Vec<Complex64>) -> Result<Self> {
        let n = norm_sq(&amplitudes).sqrt();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::NotNormalized { norm_sq: n * n });
        }
        Self::new(amplitudes.into_iter().map(|a| a / n).collect())
    }

    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        Self::new(amplitudes.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    /// Computational basis vector `|index⟩`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::input(
                "index",
                format!("{index} out of range for dimension {dim}"),
            ));
        }
        let mut amplitudes = vec![ZERO; dim];
        amplitudes[index] = ONE;
        Ok(Self { amplitudes })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        check_dim(self.dim(), other.dim())?;
        Ok(inner(&self.amplitudes, &other.amplitudes))
    }

    /// `|⟨self|other⟩|²`, insensitive to global phase.
    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }
}

/// A square complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    dim: usize,
    entries: Vec<Complex64>,
    hermitian: bool,
}

impl OperatorMatrix {
    /// Builds a matrix from row-major entries. The hermitian flag is set when the
    /// entries are conjugate-symmetric within 1e-12.
    pub fn new(dim: usize, entries: Vec<Complex64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("dim", "operator must have positive dimension"));
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        let hermitian = is_hermitian(dim, &entries, Tolerances::DEFAULT.arithmetic);
        Ok(Self {
            dim,
            entries,
            hermitian,
        })
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let dim = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        Self::new(dim, rows.concat())
    }

    pub fn from_real(dim: usize, entries: &[f64]) -> Result<Self> {
        Self::new(dim, entries.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![ZERO; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = ONE;
        }
        Self {
            dim,
            entries,
            hermitian: true,
        }
    }

    pub fn pauli_x() -> Self {
        Self::from_real(2, &[0.0, 1.0, 1.0, 0.0]).expect("2x2")
    }

    pub fn pauli_y() -> Self {
        let i = Complex64::new(0.0, 1.0);
        Self::new(2, vec![ZERO, -i, i, ZERO]).expect("2x2")
    }

    pub fn pauli_z() -> Self {
        Self::from_real(2, &[1.0, 0.0, 0.0, -1.0]).expect("2x2")
    }

    /// `cos θ σ_z + sin θ σ_x`, a ±1-valued spin observable in the x–z plane.
    pub fn spin_xz(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::from_real(2, &[c, s, s, -c]).expect("2x2")
    }

    /// Rank-one projector `|v⟩⟨v|`.
    pub fn projector(v: &StateVector) -> Self {
        let a = v.amplitudes();
        let dim = a.len();
        let entries = (0..dim * dim).map(|k| a[k / dim] * a[k % dim].conj()).collect();
        Self {
            dim,
            entries,
            hermitian: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn rows(&self) -> Vec<Vec<Complex64>> {
        self.entries.chunks(self.dim).map(<[_]>::to_vec).collect()
    }

    pub fn adjoint(&self) -> Self {
        let d = self.dim;
        let entries = (0..d * d)
            .map(|k| self.entries[(k % d) * d + k / d].conj())
            .collect();
        Self {
            dim: d,
            entries,
            hermitian: self.hermitian,
        }
    }

    pub fn matmul(&self, rhs: &OperatorMatrix) -> Result<Self> {
        check_dim(self.dim, rhs.dim)?;
        let d = self.dim;
        let mut entries = vec![ZERO; d * d];
        for i in 0..d {
            for k in 0..d {
                let a = self.entries[i * d + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..d {
                    entries[i * d + j] += a * rhs.entries[k * d + j];
                }
            }
        }
        Self::new(d, entries)
    }

    pub fn add(&self, rhs: &OperatorMatrix) -> Result<Self> {
        check_dim(self.dim, rhs.dim)?;
        let entries = self
            .entries
            .iter()
            .zip(&rhs.entries)
            .map(|(a, b)| a + b)
            .collect();
        Self::new(self.dim, entries)
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        let entries: Vec<_> = self.entries.iter().map(|a| a * factor).collect();
        Self::new(self.dim, entries).expect("same shape")
    }

    /// Kronecker product, `self` on the high-order index.
    pub fn kron(&self, rhs: &OperatorMatrix) -> Self {
        let (da, db) = (self.dim, rhs.dim);
        let d = da * db;
        let mut entries = vec![ZERO; d * d];
        for i in 0..da {
            for j in 0..da {
                let a = self.entries[i * da + j];
                for k in 0..db {
                    for l in 0..db {
                        entries[(i * db + k) * d + (j * db + l)] = a * rhs.entries[k * db + l];
                    }
                }
            }
        }
        Self::new(d, entries).expect("kron shape")
    }

    /// `U U† = 1` within the structural tolerance.
    pub fn is_unitary(&self) -> bool {
        let product = self.matmul(&self.adjoint()).expect("same dim");
        max_deviation(&product.entries, &Self::identity(self.dim).entries) <= Tolerances::DEFAULT.structure
    }

    pub fn approx_eq(&self, other: &OperatorMatrix, tol: f64) -> bool {
        self.dim == other.dim && max_deviation(&self.entries, &other.entries) <= tol
    }

    fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        let d = self.dim;
        (0..d)
            .map(|i| {
                self.entries[i * d..(i + 1) * d]
                    .iter()
                    .zip(v)
                    .map(|(m, x)| m * x)
                    .sum()
            })
            .collect()
    }
}

/// A complete set of orthogonal projectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectiveMeasurement {
    dim: usize,
    projectors: Vec<OperatorMatrix>,
}

impl ProjectiveMeasurement {
    pub fn new(projectors: Vec<OperatorMatrix>) -> Result<Self> {
        let tol = Tolerances::DEFAULT.structure;
        let dim = projectors
            .first()
            .map(OperatorMatrix::dim)
            .ok_or_else(|| Error::InvalidMeasurement("no projectors".into()))?;
        let mut total = OperatorMatrix::new(dim, vec![ZERO; dim * dim])?;
        for (i, p) in projectors.iter().enumerate() {
            check_dim(dim, p.dim())?;
            if !is_hermitian(dim, &p.entries, tol) {
                return Err(Error::InvalidMeasurement(format!(
                    "projector {i} is not hermitian"
                )));
            }
            if !p.matmul(p)?.approx_eq(p, tol) {
                return Err(Error::InvalidMeasurement(format!(
                    "projector {i} is not idempotent"
                )));
            }
            for (j, q) in projectors.iter().enumerate().skip(i + 1) {
                let pq = p.matmul(q)?;
                if pq.entries.iter().any(|z| z.norm() > tol) {
                    return Err(Error::InvalidMeasurement(format!(
                        "projectors {i} and {j} are not orthogonal"
                    )));
                }
            }
            total = total.add(p)?;
        }
        if !total.approx_eq(&OperatorMatrix::identity(dim), tol) {
            return Err(Error::InvalidMeasurement(
                "projectors do not sum to identity".into(),
            ));
        }
        Ok(Self { dim, projectors })
    }

    /// Measurement onto an orthonormal basis.
    pub fn from_basis(basis: &[StateVector]) -> Result<Self> {
        Self::new(basis.iter().map(OperatorMatrix::projector).collect())
    }

    pub fn computational(dim: usize) -> Self {
        let basis: Vec<_> = (0..dim)
            .map(|i| StateVector::basis(dim, i).expect("in range"))
            .collect();
        Self::from_basis(&basis).expect("orthonormal basis")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn projectors(&self) -> &[OperatorMatrix] {
        &self.projectors
    }

    pub fn outcome_count(&self) -> usize {
        self.projectors.len()
    }
}

/// Result of [`apply`]: unitaries keep the state normalized, anything else is
/// returned raw with its norm.
#[derive(Debug, Clone, PartialEq)]
pub enum Applied {
    Unitary(StateVector),
    General { amplitudes: Vec<Complex64>, norm: f64 },
}

impl Applied {
    pub fn norm(&self) -> f64 {
        match self {
            Applied::Unitary(_) => 1.0,
            Applied::General { norm, .. } => *norm,
        }
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        match self {
            Applied::Unitary(s) => s.amplitudes(),
            Applied::General { amplitudes, .. } => amplitudes,
        }
    }

    /// Unwraps the state, renormalizing a non-unitary image when it is nonzero.
    pub fn into_state(self) -> Result<StateVector> {
        match self {
            Applied::Unitary(s) => Ok(s),
            Applied::General { amplitudes, .. } => StateVector::normalized(amplitudes),
        }
    }
}

/// Kronecker product `u ⊗ v` with the default dimension cap.
pub fn tensor(u: &StateVector, v: &StateVector) -> Result<StateVector> {
    tensor_with_limit(u, v, Tolerances::DEFAULT.max_dim)
}

pub fn tensor_with_limit(u: &StateVector, v: &StateVector, max_dim: usize) -> Result<StateVector> {
    let dim = u.dim().saturating_mul(v.dim());
    if dim > max_dim {
        return Err(Error::DimensionOverflow { dim, max: max_dim });
    }
    let amplitudes = u
        .amplitudes
        .iter()
        .flat_map(|a| v.amplitudes.iter().map(move |b| a * b))
        .collect();
    StateVector::new(amplitudes)
}

/// Matrix–vector product.
pub fn apply(op: &OperatorMatrix, s: &StateVector) -> Result<Applied> {
    check_dim(op.dim(), s.dim())?;
    let image = op.mul_vec(s.amplitudes());
    if op.is_unitary() {
        Ok(Applied::Unitary(StateVector::normalized(image)?))
    } else {
        let norm = norm_sq(&image).sqrt();
        Ok(Applied::General {
            amplitudes: image,
            norm,
        })
    }
}

/// Outcome probabilities `⟨s|P_i|s⟩`.
pub fn born_probabilities(m: &ProjectiveMeasurement, s: &StateVector) -> Result<Vec<f64>> {
    check_dim(m.dim(), s.dim())?;
    let probs: Vec<f64> = m
        .projectors()
        .iter()
        .map(|p| {
            inner(s.amplitudes(), &p.mul_vec(s.amplitudes()))
                .re
                .clamp(0.0, 1.0)
        })
        .collect();
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > Tolerances::DEFAULT.normalization {
        return Err(Error::Internal(format!("born probabilities sum to {total}")));
    }
    Ok(probs)
}

/// `⟨s|op|s⟩` for a hermitian operator.
pub fn expectation(op: &OperatorMatrix, s: &StateVector) -> Result<f64> {
    if !op.is_hermitian() {
        return Err(Error::NotHermitian);
    }
    check_dim(op.dim(), s.dim())?;
    let value = inner(s.amplitudes(), &op.mul_vec(s.amplitudes()));
    if value.im.abs() > Tolerances::DEFAULT.structure {
        return Err(Error::Internal(format!(
            "hermitian expectation has imaginary part {}",
            value.im
        )));
    }
    Ok(value.re)
}

/// The four Bell states in the order
/// `(|00⟩+|11⟩)/√2, (|00⟩−|11⟩)/√2, (|01⟩+|10⟩)/√2, (|01⟩−|10⟩)/√2`.
pub fn bell_states() -> [StateVector; 4] {
    let h = FRAC_1_SQRT_2;
    [
        StateVector::from_real(&[h, 0.0, 0.0, h]),
        StateVector::from_real(&[h, 0.0, 0.0, -h]),
        StateVector::from_real(&[0.0, h, h, 0.0]),
        StateVector::from_real(&[0.0, h, -h, 0.0]),
    ]
    .map(|s| s.expect("unit vectors"))
}

/// The shared pair `|φ₀₀⟩ = (|00⟩+|11⟩)/√2`.
pub fn phi00() -> StateVector {
    let [phi, ..] = bell_states();
    phi
}

pub(crate) fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm_sq(a: &[Complex64]) -> f64 {
    a.iter().map(Complex64::norm_sqr).sum()
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

fn max_deviation(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn is_hermitian(dim: usize, entries: &[Complex64], tol: f64) -> bool {
    (0..dim).all(|i| (i..dim).all(|j| (entries[i * dim + j] - entries[j * dim + i].conj()).norm() <= tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const H: f64 = FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ket0() -> StateVector {
        StateVector::basis(2, 0).unwrap()
    }

    fn plus() -> StateVector {
        StateVector::from_real(&[H, H]).unwrap()
    }

    fn assert_amps(s: &[Complex64], expected: &[Complex64], tol: f64) {
        assert_eq!(s.len(), expected.len());
        for (a, b) in s.iter().zip(expected) {
            assert!((a - b).norm() <= tol, "{s:?} != {expected:?}");
        }
    }

    #[test]
    fn rejects_unnormalized_state() {
        assert!(matches!(
            StateVector::from_real(&[1.0, 1.0]),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn tensor_of_basis_vectors() {
        let s = tensor(&ket0(), &ket0()).unwrap();
        assert_amps(s.amplitudes(), &[c(1., 0.), c(0., 0.), c(0., 0.), c(0., 0.)], 0.0);
    }

    #[test]
    fn tensor_puts_left_factor_high() {
        let s = tensor(&plus(), &ket0()).unwrap();
        assert_amps(s.amplitudes(), &[c(H, 0.), c(0., 0.), c(H, 0.), c(0., 0.)], 1e-15);
    }

    #[test]
    fn tensor_rejects_oversized_result() {
        let big = StateVector::basis(16, 0).unwrap();
        let err = tensor(&big, &StateVector::basis(8, 0).unwrap()).unwrap_err();
        assert!(matches!(err, Error::DimensionOverflow { dim: 128, max: 64 }));
        assert!(tensor(&big, &StateVector::basis(4, 0).unwrap()).is_ok());
    }

    #[test]
    fn combined_teleport_state_regroups_into_bell_branches() {
        // Each Bell branch of |ψ⟩|φ₀₀⟩ carries Bob's qubit in one of the four
        // Pauli-rotated forms of (a, b), all with weight 1/2.
        let (a, b) = (c(0.6, 0.0), c(0.0, 0.8));
        let psi = StateVector::new(vec![a, b]).unwrap();
        let total = tensor(&psi, &phi00()).unwrap();
        let bob_forms = [[a, b], [a, -b], [b, a], [-b, a]];
        let mut rebuilt = vec![c(0., 0.); 8];
        for (bell, bob) in bell_states().iter().zip(bob_forms) {
            for (i, alice_amp) in bell.amplitudes().iter().enumerate() {
                for (j, bob_amp) in bob.iter().enumerate() {
                    rebuilt[i * 2 + j] += 0.5 * alice_amp * bob_amp;
                }
            }
        }
        assert_amps(total.amplitudes(), &rebuilt, 1e-15);
    }

    #[test]
    fn pauli_x_reconstructs_swapped_qubit() {
        let (a, b) = (c(0.6, 0.1), c(0.3, -0.734_846_922_834_953_4));
        let swapped = StateVector::new(vec![b, a]).unwrap();
        let out = apply(&OperatorMatrix::pauli_x(), &swapped).unwrap();
        assert!(matches!(out, Applied::Unitary(_)));
        assert_amps(out.amplitudes(), &[a, b], 1e-12);
    }

    #[test]
    fn identity_and_pauli_z_actions() {
        let s = StateVector::new(vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        let id = apply(&OperatorMatrix::identity(2), &s).unwrap();
        assert_amps(id.amplitudes(), s.amplitudes(), 1e-15);
        let z = apply(&OperatorMatrix::pauli_z(), &plus()).unwrap();
        assert_amps(z.amplitudes(), &[c(H, 0.), c(-H, 0.)], 1e-15);
    }

    #[test]
    fn apply_non_unitary_reports_norm() {
        let p0 = OperatorMatrix::projector(&ket0());
        let out = apply(&p0, &plus()).unwrap();
        match &out {
            Applied::General { norm, .. } => assert!((norm - H).abs() < 1e-15),
            other => panic!("expected unnormalized image, got {other:?}"),
        }
        assert_amps(out.into_state().unwrap().amplitudes(), ket0().amplitudes(), 1e-15);
    }

    #[test]
    fn apply_rejects_dimension_mismatch() {
        let err = apply(&OperatorMatrix::identity(4), &plus()).unwrap_err();
        assert!(matches!(
            err,
            Error::DimensionMismatch {
                expected: 4,
                found: 2
            }
        ));
    }

    #[test]
    fn bell_measurement_probabilities() {
        let bell = ProjectiveMeasurement::from_basis(&bell_states()).unwrap();
        let p = born_probabilities(&bell, &phi00()).unwrap();
        assert_eq!(p.len(), 4);
        assert!((p[0] - 1.0).abs() < 1e-15);
        assert!(p[1..].iter().all(|x| x.abs() < 1e-15));

        let z = ProjectiveMeasurement::computational(2);
        let p = born_probabilities(&z, &plus()).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bell_measurement_on_teleport_register_is_uniform() {
        let bell = ProjectiveMeasurement::from_basis(&bell_states()).unwrap();
        let alice = ProjectiveMeasurement::new(
            bell.projectors()
                .iter()
                .map(|p| p.kron(&OperatorMatrix::identity(2)))
                .collect(),
        )
        .unwrap();
        let psi = StateVector::new(vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        let p = born_probabilities(&alice, &tensor(&psi, &phi00()).unwrap()).unwrap();
        for x in p {
            assert!((x - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_measurements_are_rejected() {
        let p0 = OperatorMatrix::projector(&ket0());
        assert!(ProjectiveMeasurement::new(vec![p0.clone()]).is_err());
        assert!(ProjectiveMeasurement::new(vec![p0.clone(), p0.clone()]).is_err());
        let half = OperatorMatrix::from_real(2, &[0.5, 0.0, 0.0, 0.5]).unwrap();
        assert!(ProjectiveMeasurement::new(vec![half.clone(), half]).is_err());
        assert!(ProjectiveMeasurement::new(vec![]).is_err());
    }

    #[test]
    fn expectation_values() {
        let zz = OperatorMatrix::pauli_z().kron(&OperatorMatrix::pauli_z());
        let zx = OperatorMatrix::pauli_z().kron(&OperatorMatrix::pauli_x());
        assert!((expectation(&zz, &phi00()).unwrap() - 1.0).abs() < 1e-15);
        assert!(expectation(&zx, &phi00()).unwrap().abs() < 1e-15);
        assert_eq!(expectation(&OperatorMatrix::pauli_z(), &ket0()).unwrap(), 1.0);
    }

    #[test]
    fn expectation_rejects_non_hermitian() {
        let raise = OperatorMatrix::from_real(2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(!raise.is_hermitian());
        assert!(matches!(expectation(&raise, &ket0()), Err(Error::NotHermitian)));
    }

    #[test]
    fn pauli_algebra() {
        let (x, y, z) = (
            OperatorMatrix::pauli_x(),
            OperatorMatrix::pauli_y(),
            OperatorMatrix::pauli_z(),
        );
        let i = Complex64::new(0.0, 1.0);
        assert!(x.matmul(&y).unwrap().approx_eq(&z.scale(i), 1e-15));
        for p in [&x, &y, &z] {
            assert!(p.is_hermitian() && p.is_unitary());
            assert!(p
                .matmul(p)
                .unwrap()
                .approx_eq(&OperatorMatrix::identity(2), 1e-15));
        }
    }

    // Eigenvalue oracle: characteristic polynomial by Faddeev–LeVerrier, real roots
    // located by sign changes on a fine grid and refined by bisection.
    fn char_poly(m: &OperatorMatrix) -> Vec<f64> {
        let n = m.dim();
        let id = OperatorMatrix::identity(n);
        let mut coeffs = vec![1.0];
        let mut mk = OperatorMatrix::new(n, vec![c(0., 0.); n * n]).unwrap();
        let mut ck = c(1.0, 0.0);
        for k in 1..=n {
            mk = m.matmul(&mk).unwrap().add(&id.scale(ck)).unwrap();
            let am = m.matmul(&mk).unwrap();
            let trace: Complex64 = (0..n).map(|i| am.entry(i, i)).sum();
            ck = -trace / k as f64;
            coeffs.push(ck.re);
        }
        coeffs
    }

    fn eigen_extremes(m: &OperatorMatrix) -> Option<(f64, f64)> {
        let coeffs = char_poly(m);
        let eval = |x: f64| coeffs.iter().fold(0.0, |acc, a| acc * x + a);
        let bound = m.entries().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() + 1e-6;
        let steps = 20_000;
        let mut roots = Vec::new();
        let mut prev_x = -bound;
        let mut prev = eval(prev_x);
        for k in 1..=steps {
            let x = -bound + 2.0 * bound * k as f64 / steps as f64;
            let v = eval(x);
            if prev == 0.0 || prev.signum() != v.signum() {
                let (mut lo, mut hi) = (prev_x, x);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if eval(lo).signum() == eval(mid).signum() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
            prev_x = x;
            prev = v;
        }
        (roots.len() == m.dim()).then(|| (roots[0], roots[roots.len() - 1]))
    }

    fn hermitian_from(dim: usize, raw: &[f64]) -> OperatorMatrix {
        let mut e = vec![c(0., 0.); dim * dim];
        let mut k = 0;
        for i in 0..dim {
            e[i * dim + i] = c(raw[k], 0.0);
            k += 1;
            for j in i + 1..dim {
                e[i * dim + j] = c(raw[k], raw[k + 1]);
                e[j * dim + i] = c(raw[k], -raw[k + 1]);
                k += 2;
            }
        }
        OperatorMatrix::new(dim, e).unwrap()
    }

    fn state_from(raw: &[f64]) -> Option<StateVector> {
        let amps: Vec<_> = raw.chunks(2).map(|p| c(p[0], p[1])).collect();
        StateVector::normalized(amps).ok()
    }

    #[test]
    fn eigen_oracle_matches_known_spectrum() {
        let m = OperatorMatrix::from_real(2, &[2.0, 1.0, 1.0, 2.0]).unwrap();
        let (lo, hi) = eigen_extremes(&m).unwrap();
        assert!((lo - 1.0).abs() < 1e-9 && (hi - 3.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn born_probabilities_sum_to_one(raw in prop::collection::vec(-1.0f64..1.0, 8),
                                         theta in 0.0f64..6.3) {
            let s = state_from(&raw);
            prop_assume!(s.is_some());
            let s = s.unwrap();
            let (sn, cs) = theta.sin_cos();
            let v = StateVector::from_real(&[cs, 0.0, sn, 0.0]).unwrap();
            let w = StateVector::from_real(&[-sn, 0.0, cs, 0.0]).unwrap();
            let m = ProjectiveMeasurement::from_basis(&[
                v, w, StateVector::basis(4, 1).unwrap(), StateVector::basis(4, 3).unwrap(),
            ]).unwrap();
            let p = born_probabilities(&m, &s).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(p.iter().all(|x| (0.0..=1.0).contains(x)));
        }

        #[test]
        fn tensor_is_associative(u in prop::collection::vec(-1.0f64..1.0, 4),
                                 v in prop::collection::vec(-1.0f64..1.0, 6),
                                 w in prop::collection::vec(-1.0f64..1.0, 4)) {
            let (u, v, w) = (state_from(&u), state_from(&v), state_from(&w));
            prop_assume!(u.is_some() && v.is_some() && w.is_some());
            let (u, v, w) = (u.unwrap(), v.unwrap(), w.unwrap());
            let left = tensor(&tensor(&u, &v).unwrap(), &w).unwrap();
            let right = tensor(&u, &tensor(&v, &w).unwrap()).unwrap();
            for (a, b) in left.amplitudes().iter().zip(right.amplitudes()) {
                prop_assert!((a - b).norm() <= 1e-12);
            }
        }

        #[test]
        fn expectation_lies_within_spectrum_2(raw in prop::collection::vec(-1.0f64..1.0, 4),
                                              st in prop::collection::vec(-1.0f64..1.0, 4)) {
            let m = hermitian_from(2, &raw);
            let s = state_from(&st);
            let ext = eigen_extremes(&m);
            prop_assume!(s.is_some() && ext.is_some());
            let (lo, hi) = ext.unwrap();
            let e = expectation(&m, &s.unwrap()).unwrap();
            prop_assert!(e >= lo - 1e-9 && e <= hi + 1e-9);
        }

        #[test]
        fn expectation_lies_within_spectrum_4(raw in prop::collection::vec(-1.0f64..1.0, 16),
                                              st in prop::collection::vec(-1.0f64..1.0, 8)) {
            let m = hermitian_from(4, &raw);
            let s = state_from(&st);
            let ext = eigen_extremes(&m);
            prop_assume!(s.is_some() && ext.is_some());
            let (lo, hi) = ext.unwrap();
            let e = expectation(&m, &s.unwrap()).unwrap();
            prop_assert!(e >= lo - 1e-7 && e <= hi + 1e-7);
        }

        #[test]
        fn unitaries_preserve_norm(theta in 0.0f64..6.3, phi in 0.0f64..6.3,
                                   st in prop::collection::vec(-1.0f64..1.0, 4)) {
            let s = state_from(&st);
            prop_assume!(s.is_some());
            let (sn, cs) = theta.sin_cos();
            let ph = Complex64::from_polar(1.0, phi);
            let u = OperatorMatrix::new(2, vec![c(cs, 0.), -ph.conj() * sn, ph * sn, c(cs, 0.)]).unwrap();
            prop_assert!(u.is_unitary());
            let image = u.mul_vec(s.unwrap().amplitudes());
            prop_assert!((norm_sq(&image) - 1.0).abs() <= 1e-10);
        }
    }
}
