//! CHSH and KCBS evaluation.
//!
//! CHSH uses `S = |E(a,b) + E(a,b′) + E(a′,b) − E(a′,b′)|` maximized over the
//! placement of the minus sign, which makes the statistic invariant under
//! relabeling parties, settings and outcome signs. KCBS uses the correlator form
//! `Σ ⟨A_i A_{i+1}⟩` with `A_i = 2|v_i⟩⟨v_i| − 1`, noncontextual bound −3.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::hilbert::{self, OperatorMatrix, StateVector};
use crate::lhv::{self, CorrelationTable, LhvModel, SettingSpace};
use crate::numeric::Tolerances;
use crate::{Error, Result};

/// The four placements of the minus sign over `E(0,0), E(0,1), E(1,0), E(1,1)`.
pub const CHSH_SIGNS: [[f64; 4]; 4] = [
    [-1.0, 1.0, 1.0, 1.0],
    [1.0, -1.0, 1.0, 1.0],
    [1.0, 1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0, -1.0],
];

/// The four signed CHSH sums, one per minus-sign placement.
pub fn chsh_sums(t: &CorrelationTable) -> Result<[f64; 4]> {
    if t.alice_settings() != 2 || t.bob_settings() != 2 {
        return Err(Error::input(
            "correlators",
            format!(
                "CHSH needs a 2x2 setting table, got {}x{}",
                t.alice_settings(),
                t.bob_settings()
            ),
        ));
    }
    let e = t.correlators();
    Ok(CHSH_SIGNS.map(|signs| signs.iter().zip(e).map(|(s, x)| s * x).sum()))
}

/// Symmetrized CHSH value in `[0, 4]`.
pub fn chsh_value(t: &CorrelationTable) -> Result<f64> {
    Ok(chsh_sums(t)?.iter().map(|s| s.abs()).fold(0.0, f64::max))
}

/// Two ±1 observables per party and a shared two-qubit state.
#[derive(Debug, Clone, PartialEq)]
pub struct ChshScenario {
    alice: [OperatorMatrix; 2],
    bob: [OperatorMatrix; 2],
    state: StateVector,
}

impl ChshScenario {
    pub fn new(alice: [OperatorMatrix; 2], bob: [OperatorMatrix; 2], state: StateVector) -> Result<Self> {
        let tol = Tolerances::DEFAULT.structure;
        for (party, ops) in [("alice", &alice), ("bob", &bob)] {
            for (i, op) in ops.iter().enumerate() {
                let field = format!("{party}[{i}]");
                if op.dim() != 2 {
                    return Err(Error::input(field, "observable must be 2x2"));
                }
                if !op.is_hermitian() {
                    return Err(Error::input(field, "observable must be hermitian"));
                }
                if !op.matmul(op)?.approx_eq(&OperatorMatrix::identity(2), tol) {
                    return Err(Error::input(field, "observable must square to the identity"));
                }
            }
        }
        if state.dim() != 4 {
            return Err(Error::input("state", "CHSH state must be a two-qubit vector"));
        }
        Ok(Self { alice, bob, state })
    }

    /// Alice measures `σ_z` or `(σ_z + σ_x)/√2`, Bob measures `(σ_z ± σ_x)/√2`, on
    /// `|φ₀₀⟩`.
    pub fn tilted_alice() -> Self {
        Self::new(
            [OperatorMatrix::pauli_z(), OperatorMatrix::spin_xz(PI / 4.0)],
            [
                OperatorMatrix::spin_xz(PI / 4.0),
                OperatorMatrix::spin_xz(-PI / 4.0),
            ],
            hilbert::phi00(),
        )
        .expect("valid observables")
    }

    /// `σ_z, σ_x` against `(σ_z ± σ_x)/√2` on `|φ₀₀⟩`: reaches `2√2`.
    pub fn tsirelson_optimal() -> Self {
        Self::new(
            [OperatorMatrix::pauli_z(), OperatorMatrix::pauli_x()],
            [
                OperatorMatrix::spin_xz(PI / 4.0),
                OperatorMatrix::spin_xz(-PI / 4.0),
            ],
            hilbert::phi00(),
        )
        .expect("valid observables")
    }

    pub fn alice_observables(&self) -> &[OperatorMatrix; 2] {
        &self.alice
    }

    pub fn bob_observables(&self) -> &[OperatorMatrix; 2] {
        &self.bob
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }
}

/// Quantum correlators `E(a_i, b_j) = ⟨A_i ⊗ B_j⟩` with the matching joint
/// outcome probabilities.
pub fn chsh_quantum(s: &ChshScenario) -> Result<CorrelationTable> {
    let mut probs = Vec::with_capacity(4);
    for a in &s.alice {
        for b in &s.bob {
            let (pa, pb) = (eigen_projectors(a)?, eigen_projectors(b)?);
            let mut p = [0.0; 4];
            for (k, (x, y)) in lhv::OUTCOME_PAIRS.iter().enumerate() {
                let proj = pa[usize::from(*x < 0)].kron(&pb[usize::from(*y < 0)]);
                p[k] = hilbert::expectation(&proj, &s.state)?.clamp(0.0, 1.0);
            }
            let total: f64 = p.iter().sum();
            if (total - 1.0).abs() > Tolerances::DEFAULT.normalization {
                return Err(Error::Internal(format!(
                    "joint outcome probabilities sum to {total}"
                )));
            }
            // Rounding residue only; keeps the table exactly normalized.
            p.iter_mut().for_each(|x| *x /= total);
            probs.push(p);
        }
    }
    let table = CorrelationTable::from_probabilities(2, 2, probs)?;
    for (k, (a, b)) in s
        .alice
        .iter()
        .flat_map(|a| s.bob.iter().map(move |b| (a, b)))
        .enumerate()
    {
        let direct = hilbert::expectation(&a.kron(b), &s.state)?;
        if (direct - table.correlators()[k]).abs() > 1e-9 {
            return Err(Error::Internal(
                "correlator disagrees with outcome probabilities".into(),
            ));
        }
    }
    Ok(table)
}

// (1 ± A)/2 for a ±1-valued observable.
fn eigen_projectors(op: &OperatorMatrix) -> Result<[OperatorMatrix; 2]> {
    let id = OperatorMatrix::identity(op.dim());
    let half = Complex64::new(0.5, 0.0);
    Ok([
        id.add(op)?.scale(half),
        id.add(&op.scale(Complex64::new(-1.0, 0.0)))?.scale(half),
    ])
}

/// Deterministic local strategies for a 2x2 scenario: every assignment of ±1 to
/// each party's two settings.
pub fn deterministic_strategies(settings: &SettingSpace) -> Result<Vec<LhvModel>> {
    const OUTPUTS: [[i8; 2]; 4] = [[1, 1], [1, -1], [-1, 1], [-1, -1]];
    let mut models = Vec::with_capacity(16);
    for alice in OUTPUTS {
        for bob in OUTPUTS {
            models.push(LhvModel::deterministic(settings.clone(), &alice, &bob)?);
        }
    }
    Ok(models)
}

/// Largest CHSH value over the 16 deterministic measurement-independent strategies.
pub fn lhv_chsh_max(settings: &SettingSpace) -> Result<f64> {
    if settings.alice_settings() != 2 || settings.bob_settings() != 2 {
        return Err(Error::input("settings", "CHSH needs two settings per party"));
    }
    deterministic_strategies(settings)?
        .par_iter()
        .map(|m| chsh_value(&lhv::predict(m)))
        .collect::<Result<Vec<f64>>>()
        .map(|values| values.into_iter().fold(0.0, f64::max))
}

/// Five real unit vectors with orthogonal cyclic neighbours and a qutrit state.
#[derive(Debug, Clone, PartialEq)]
pub struct KcbsScenario {
    vectors: [[f64; 3]; 5],
    state: StateVector,
}

impl KcbsScenario {
    pub fn new(vectors: [[f64; 3]; 5], state: StateVector) -> Result<Self> {
        let tol = Tolerances::DEFAULT.structure;
        for (i, v) in vectors.iter().enumerate() {
            if (dot(v, v).sqrt() - 1.0).abs() > tol {
                return Err(Error::input(format!("vectors[{i}]"), "vector is not unit length"));
            }
            let next = &vectors[(i + 1) % 5];
            if dot(v, next).abs() > tol {
                return Err(Error::input(
                    format!("vectors[{i}]"),
                    format!("not orthogonal to vectors[{}]", (i + 1) % 5),
                ));
            }
        }
        if state.dim() != 3 {
            return Err(Error::input("state", "KCBS state must be a qutrit"));
        }
        Ok(Self { vectors, state })
    }

    /// Pentagram arrangement around the z axis: `v_k` at azimuth
    /// `offset + 4πk/5` and the polar angle that makes neighbours orthogonal.
    pub fn pentagram_vectors(offset: f64) -> [[f64; 3]; 5] {
        let step = 4.0 * PI / 5.0;
        // v_k · v_{k+1} = sin²θ cos(step) + cos²θ = 0.
        let cos_sq = -step.cos() / (1.0 - step.cos());
        let (cos_t, sin_t) = (cos_sq.sqrt(), (1.0 - cos_sq).sqrt());
        std::array::from_fn(|k| {
            let phi = offset + step * k as f64;
            [sin_t * phi.cos(), sin_t * phi.sin(), cos_t]
        })
    }

    /// Pentagram vectors with the symmetry-axis state `(0, 0, 1)`.
    pub fn pentagram() -> Self {
        let apex = StateVector::basis(3, 2).expect("qutrit");
        Self::new(Self::pentagram_vectors(0.0), apex).expect("orthogonal by construction")
    }

    pub fn with_state(&self, state: StateVector) -> Result<Self> {
        Self::new(self.vectors, state)
    }

    pub fn vectors(&self) -> &[[f64; 3]; 5] {
        &self.vectors
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    pub fn observable(&self, i: usize) -> OperatorMatrix {
        let v = StateVector::from_real(&self.vectors[i % 5]).expect("unit vector");
        OperatorMatrix::projector(&v)
            .scale(Complex64::new(2.0, 0.0))
            .add(&OperatorMatrix::identity(3).scale(Complex64::new(-1.0, 0.0)))
            .expect("3x3")
    }
}

/// `Σ_i ⟨A_i A_{i+1}⟩` over the cyclic pentagram.
pub fn kcbs_value(s: &KcbsScenario) -> Result<f64> {
    (0..5)
        .map(|i| {
            let product = s.observable(i).matmul(&s.observable(i + 1))?;
            hilbert::expectation(&product, &s.state)
        })
        .sum()
}

/// `Σ x_i x_{i+1}` for one noncontextual ±1 assignment.
pub fn kcbs_assignment_value(x: &[i8; 5]) -> i32 {
    (0..5).map(|i| i32::from(x[i]) * i32::from(x[(i + 1) % 5])).sum()
}

/// Minimum of the KCBS sum over all 32 noncontextual ±1 assignments.
pub fn kcbs_classical_min() -> f64 {
    (0u8..32)
        .map(|bits| {
            let x: [i8; 5] = std::array::from_fn(|i| if bits >> i & 1 == 1 { -1 } else { 1 });
            kcbs_assignment_value(&x)
        })
        .min()
        .map(f64::from)
        .expect("nonempty enumeration")
}

/// The singlet `(|01⟩ − |10⟩)/√2`.
pub fn singlet() -> StateVector {
    StateVector::from_real(&[0.0, FRAC_1_SQRT_2, -FRAC_1_SQRT_2, 0.0]).expect("unit vector")
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::SQRT_2;

    fn table(e: [f64; 4]) -> CorrelationTable {
        CorrelationTable::from_correlators(2, 2, &e).unwrap()
    }

    #[test]
    fn all_plus_one_caps_at_two() {
        // Every placement of the minus sign leaves 1 + 1 + 1 − 1.
        for sum in chsh_sums(&table([1.0; 4])).unwrap() {
            assert_eq!(sum, 2.0);
        }
        assert_eq!(chsh_value(&table([1.0; 4])).unwrap(), 2.0);
        assert_eq!(chsh_value(&table([1.0, 1.0, 1.0, -1.0])).unwrap(), 4.0);
    }

    #[test]
    fn chsh_rejects_wrong_shape() {
        let t = CorrelationTable::from_correlators(1, 2, &[1.0, 1.0]).unwrap();
        assert!(chsh_value(&t).is_err());
    }

    // E(θ_a, θ_b) = cos(θ_a − θ_b) for x–z spin observables on |φ₀₀⟩.
    fn phi00_oracle(alice: [f64; 2], bob: [f64; 2]) -> f64 {
        let e: Vec<f64> = alice
            .iter()
            .flat_map(|a| bob.iter().map(move |b| (a - b).cos()))
            .collect();
        CHSH_SIGNS
            .iter()
            .map(|s| s.iter().zip(&e).map(|(x, y)| x * y).sum::<f64>().abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn tsirelson_optimal_scenario() {
        let s = chsh_value(&chsh_quantum(&ChshScenario::tsirelson_optimal()).unwrap()).unwrap();
        assert!((s - 2.0 * SQRT_2).abs() < 1e-9);
    }

    #[test]
    fn tilted_alice_falls_short_of_tsirelson() {
        let t = chsh_quantum(&ChshScenario::tilted_alice()).unwrap();
        let expected = phi00_oracle([0.0, PI / 4.0], [PI / 4.0, -PI / 4.0]);
        assert!((expected - (1.0 + SQRT_2)).abs() < 1e-12);
        assert!((chsh_value(&t).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn same_observables_are_perfectly_correlated() {
        let alice = [OperatorMatrix::pauli_z(), OperatorMatrix::spin_xz(PI / 4.0)];
        let s = ChshScenario::new(alice.clone(), alice, hilbert::phi00()).unwrap();
        let t = chsh_quantum(&s).unwrap();
        assert!((t.correlator(0, 0) - 1.0).abs() < 1e-12);
        assert!((t.correlator(1, 1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singlet_reaches_tsirelson() {
        let s = ChshScenario::new(
            [OperatorMatrix::pauli_z(), OperatorMatrix::pauli_x()],
            [
                OperatorMatrix::spin_xz(PI / 4.0),
                OperatorMatrix::spin_xz(-PI / 4.0),
            ],
            singlet(),
        )
        .unwrap();
        let v = chsh_value(&chsh_quantum(&s).unwrap()).unwrap();
        assert!((v - 2.0 * SQRT_2).abs() < 1e-9);
    }

    #[test]
    fn scenario_rejects_non_involutions() {
        let half_z = OperatorMatrix::pauli_z().scale(Complex64::new(0.5, 0.0));
        let bad = ChshScenario::new(
            [half_z, OperatorMatrix::pauli_x()],
            [OperatorMatrix::pauli_z(), OperatorMatrix::pauli_x()],
            hilbert::phi00(),
        );
        assert!(bad.is_err());
    }

    #[test]
    fn deterministic_bound_is_two() {
        assert_eq!(lhv_chsh_max(&SettingSpace::default()).unwrap(), 2.0);
        let skewed = SettingSpace::new(2, 2, vec![0.7, 0.1, 0.1, 0.1]).unwrap();
        assert_eq!(lhv_chsh_max(&skewed).unwrap(), 2.0);
        let constants = [[1, 1], [-1, -1]];
        let best = constants
            .iter()
            .flat_map(|a| constants.iter().map(move |b| (a, b)))
            .map(|(a, b)| {
                let m = LhvModel::deterministic(SettingSpace::default(), a, b).unwrap();
                chsh_value(&lhv::predict(&m)).unwrap()
            })
            .fold(0.0, f64::max);
        assert_eq!(best, 2.0);
    }

    #[test]
    fn kcbs_bounds() {
        assert_eq!(kcbs_classical_min(), -3.0);
        assert_eq!(kcbs_assignment_value(&[1; 5]), 5);
        assert_eq!(kcbs_assignment_value(&[1, -1, 1, -1, 1]), -3);
    }

    #[test]
    fn pentagram_reaches_quantum_minimum() {
        let v = kcbs_value(&KcbsScenario::pentagram()).unwrap();
        assert!((v - (5.0 - 4.0 * 5f64.sqrt())).abs() < 1e-9);
    }

    #[test]
    fn kcbs_state_on_a_vertex() {
        let p = KcbsScenario::pentagram();
        let v1 = StateVector::from_real(&p.vectors()[0]).unwrap();
        let value = kcbs_value(&p.with_state(v1).unwrap()).unwrap();
        // ⟨A_i A_{i+1}⟩ = 1 − 2⟨P_i⟩ − 2⟨P_{i+1}⟩; only v₁ and its two
        // non-neighbours contribute.
        let overlap = |k: usize| {
            p.vectors()[0]
                .iter()
                .zip(&p.vectors()[k])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                .powi(2)
        };
        let expected = 5.0 - 4.0 * (1.0 + overlap(2) + overlap(3));
        assert!((value - expected).abs() < 1e-12);
        assert!(value >= -3.0);
    }

    #[test]
    fn kcbs_rejects_non_orthogonal_neighbours() {
        let mut v = KcbsScenario::pentagram_vectors(0.0);
        v[1] = v[2];
        assert!(KcbsScenario::new(v, StateVector::basis(3, 0).unwrap()).is_err());
    }

    fn unit_observable(theta: f64, phi: f64) -> OperatorMatrix {
        let (st, ct) = theta.sin_cos();
        let e = Complex64::from_polar(st, -phi);
        OperatorMatrix::new(
            2,
            vec![Complex64::new(ct, 0.0), e, e.conj(), Complex64::new(-ct, 0.0)],
        )
        .unwrap()
    }

    proptest! {
        #[test]
        fn chsh_symmetries(e in prop::array::uniform4(-1.0f64..=1.0)) {
            let v = chsh_value(&table(e)).unwrap();
            prop_assert!((0.0..=4.0).contains(&v));
            // swap parties, swap Alice's settings, flip Alice's sign on setting 0
            let swapped = [e[0], e[2], e[1], e[3]];
            let relabeled = [e[2], e[3], e[0], e[1]];
            let flipped = [-e[0], -e[1], e[2], e[3]];
            for t in [swapped, relabeled, flipped] {
                prop_assert!((chsh_value(&table(t)).unwrap() - v).abs() <= 1e-15);
            }
        }

        #[test]
        fn quantum_chsh_respects_tsirelson(angles in prop::array::uniform8(0.0f64..6.3),
                                           st in prop::collection::vec(-1.0f64..1.0, 8)) {
            let amps: Vec<Complex64> = st.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect();
            let state = StateVector::normalized(amps);
            prop_assume!(state.is_ok());
            let obs = |k: usize| unit_observable(angles[2 * k], angles[2 * k + 1]);
            let s = ChshScenario::new([obs(0), obs(1)], [obs(2), obs(3)], state.unwrap()).unwrap();
            let v = chsh_value(&chsh_quantum(&s).unwrap()).unwrap();
            prop_assert!(v <= 2.0 * SQRT_2 + 1e-6);
        }

        #[test]
        fn product_states_stay_classical(angles in prop::array::uniform8(0.0f64..6.3)) {
            let obs = |k: usize| unit_observable(angles[2 * k], angles[2 * k + 1]);
            let s = ChshScenario::new([obs(0), obs(1)], [obs(2), obs(3)], StateVector::basis(4, 0).unwrap()).unwrap();
            prop_assert!(chsh_value(&chsh_quantum(&s).unwrap()).unwrap() <= 2.0 + 1e-9);
        }

        #[test]
        fn kcbs_within_range(offset in 0.0f64..6.3, st in prop::collection::vec(-1.0f64..1.0, 6)) {
            let amps: Vec<Complex64> = st.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect();
            let state = StateVector::normalized(amps);
            prop_assume!(state.is_ok());
            let s = KcbsScenario::new(KcbsScenario::pentagram_vectors(offset), state.unwrap()).unwrap();
            let v = kcbs_value(&s).unwrap();
            prop_assert!((-5.0..=5.0).contains(&v));
            prop_assert!(v >= 5.0 - 4.0 * 5f64.sqrt() - 1e-9);
        }

        #[test]
        fn every_assignment_respects_classical_min(bits in 0u8..32) {
            let x: [i8; 5] = std::array::from_fn(|i| if bits >> i & 1 == 1 { -1 } else { 1 });
            prop_assert!(f64::from(kcbs_assignment_value(&x)) >= kcbs_classical_min());
        }
    }
}
