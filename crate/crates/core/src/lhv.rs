//! Finite local hidden-variable models.
//!
//! A model fixes a distribution `p(λ | a, b)` for every joint setting and local
//! response tables `p(+1 | a, λ)`, `p(+1 | b, λ)`. Joint outcome statistics are only
//! ever formed as the product of the two local responses, so outcome independence
//! and parameter independence hold by construction. Measurement independence holds
//! exactly when every setting sees the same `λ` distribution.

use serde::{Deserialize, Serialize};

use crate::numeric::PROBABILITY_SUM_TOL;
use crate::{Error, Result};

/// Default upper bound on the hidden-variable alphabet.
pub const MAX_LAMBDA_COUNT: usize = 64;

/// Joint outcome order used in every probability quadruple:
/// `(+1,+1), (+1,−1), (−1,+1), (−1,−1)`.
pub const OUTCOME_PAIRS: [(i8, i8); 4] = [(1, 1), (1, -1), (-1, 1), (-1, -1)];

/// Measurement settings of both parties and their joint marginal.
///
/// Joint settings are indexed `a * bob_settings + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingSpace {
    alice: usize,
    bob: usize,
    marginal: Vec<f64>,
}

impl Default for SettingSpace {
    fn default() -> Self {
        Self::uniform(2, 2).expect("2x2")
    }
}

impl SettingSpace {
    pub fn new(alice: usize, bob: usize, marginal: Vec<f64>) -> Result<Self> {
        if alice == 0 || bob == 0 {
            return Err(Error::input("settings", "each party needs at least one setting"));
        }
        if marginal.len() != alice * bob {
            return Err(Error::distribution(
                "settings.marginal",
                format!("expected {} entries, got {}", alice * bob, marginal.len()),
            ));
        }
        check_distribution("settings.marginal", &marginal)?;
        Ok(Self { alice, bob, marginal })
    }

    pub fn uniform(alice: usize, bob: usize) -> Result<Self> {
        let n = alice * bob;
        Self::new(alice, bob, vec![1.0 / n as f64; n])
    }

    pub fn alice_settings(&self) -> usize {
        self.alice
    }

    pub fn bob_settings(&self) -> usize {
        self.bob
    }

    pub fn joint_count(&self) -> usize {
        self.alice * self.bob
    }

    pub fn marginal(&self) -> &[f64] {
        &self.marginal
    }

    pub fn joint_index(&self, a: usize, b: usize) -> usize {
        a * self.bob + b
    }

    /// `(a, b)` for a joint index.
    pub fn split(&self, joint: usize) -> (usize, usize) {
        (joint / self.bob, joint % self.bob)
    }
}

/// A factorizable hidden-variable model over a finite `λ` alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct LhvModel {
    lambda_count: usize,
    settings: SettingSpace,
    lambda_given_settings: Vec<Vec<f64>>,
    alice_response: Vec<Vec<f64>>,
    bob_response: Vec<Vec<f64>>,
}

impl LhvModel {
    /// Validates and builds a model.
    ///
    /// `lambda_given_settings[s][λ]` is `p(λ | s)` for joint setting `s`;
    /// `alice_response[a][λ]` and `bob_response[b][λ]` are the probabilities of
    /// outcome `+1`.
    pub fn new(
        settings: SettingSpace,
        lambda_given_settings: Vec<Vec<f64>>,
        alice_response: Vec<Vec<f64>>,
        bob_response: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let lambda_count = lambda_given_settings.first().map_or(0, Vec::len);
        if lambda_count == 0 || lambda_count > MAX_LAMBDA_COUNT {
            return Err(Error::input(
                "lambda_count",
                format!("{lambda_count} is outside 1..={MAX_LAMBDA_COUNT}"),
            ));
        }
        if lambda_given_settings.len() != settings.joint_count() {
            return Err(Error::distribution(
                "lambda_given_settings",
                format!(
                    "expected {} rows (one per joint setting), got {}",
                    settings.joint_count(),
                    lambda_given_settings.len()
                ),
            ));
        }
        for (s, column) in lambda_given_settings.iter().enumerate() {
            let field = format!("lambda_given_settings[{s}]");
            if column.len() != lambda_count {
                return Err(Error::distribution(
                    field,
                    format!("expected {lambda_count} entries, got {}", column.len()),
                ));
            }
            check_distribution(&field, column)?;
        }
        check_response("alice_response", &alice_response, settings.alice, lambda_count)?;
        check_response("bob_response", &bob_response, settings.bob, lambda_count)?;
        Ok(Self {
            lambda_count,
            settings,
            lambda_given_settings,
            alice_response,
            bob_response,
        })
    }

    /// Measurement-independent model sharing one `λ` distribution across settings.
    pub fn measurement_independent_from(
        settings: SettingSpace,
        lambda: Vec<f64>,
        alice_response: Vec<Vec<f64>>,
        bob_response: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let columns = vec![lambda; settings.joint_count()];
        Self::new(settings, columns, alice_response, bob_response)
    }

    /// Single-`λ` deterministic strategy with the given ±1 outputs per setting.
    pub fn deterministic(settings: SettingSpace, alice: &[i8], bob: &[i8]) -> Result<Self> {
        let table = |outs: &[i8]| {
            outs.iter()
                .map(|&x| vec![if x > 0 { 1.0 } else { 0.0 }])
                .collect()
        };
        Self::measurement_independent_from(settings, vec![1.0], table(alice), table(bob))
    }

    pub fn lambda_count(&self) -> usize {
        self.lambda_count
    }

    pub fn settings(&self) -> &SettingSpace {
        &self.settings
    }

    pub fn lambda_given_settings(&self) -> &[Vec<f64>] {
        &self.lambda_given_settings
    }

    pub fn alice_response(&self) -> &[Vec<f64>] {
        &self.alice_response
    }

    pub fn bob_response(&self) -> &[Vec<f64>] {
        &self.bob_response
    }

    /// Drops `λ` values that carry no weight under any setting.
    pub fn pruned(&self) -> Result<Self> {
        let keep: Vec<usize> = (0..self.lambda_count)
            .filter(|&l| self.lambda_given_settings.iter().any(|col| col[l] > 0.0))
            .collect();
        let pick = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
            rows.iter()
                .map(|r| keep.iter().map(|&l| r[l]).collect())
                .collect()
        };
        Self::new(
            self.settings.clone(),
            pick(&self.lambda_given_settings),
            pick(&self.alice_response),
            pick(&self.bob_response),
        )
    }

    /// Appends zero-weight `λ` values until the alphabet has `lambda_count` entries.
    pub fn padded(&self, lambda_count: usize) -> Result<Self> {
        if lambda_count < self.lambda_count {
            return Err(Error::input(
                "lambda_count",
                format!("cannot pad {} values down to {lambda_count}", self.lambda_count),
            ));
        }
        let extra = lambda_count - self.lambda_count;
        let pad = |rows: &[Vec<f64>], fill: f64| -> Vec<Vec<f64>> {
            rows.iter()
                .map(|r| {
                    r.iter()
                        .copied()
                        .chain(std::iter::repeat_n(fill, extra))
                        .collect()
                })
                .collect()
        };
        Self::new(
            self.settings.clone(),
            pad(&self.lambda_given_settings, 0.0),
            pad(&self.alice_response, 0.5),
            pad(&self.bob_response, 0.5),
        )
    }
}

/// Correlators and joint outcome probabilities for every joint setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    alice_settings: usize,
    bob_settings: usize,
    correlators: Vec<f64>,
    /// Per joint setting, probabilities in [`OUTCOME_PAIRS`] order.
    joint_probabilities: Vec<[f64; 4]>,
}

impl CorrelationTable {
    pub fn from_probabilities(
        alice_settings: usize,
        bob_settings: usize,
        joint_probabilities: Vec<[f64; 4]>,
    ) -> Result<Self> {
        if joint_probabilities.len() != alice_settings * bob_settings {
            return Err(Error::input(
                "joint_probabilities",
                format!(
                    "expected {} joint settings, got {}",
                    alice_settings * bob_settings,
                    joint_probabilities.len()
                ),
            ));
        }
        for (s, p) in joint_probabilities.iter().enumerate() {
            check_distribution(&format!("joint_probabilities[{s}]"), p)?;
        }
        let correlators = joint_probabilities.iter().map(correlator).collect();
        Ok(Self {
            alice_settings,
            bob_settings,
            correlators,
            joint_probabilities,
        })
    }

    /// Table with unbiased marginals: `p(x, y) = (1 + x·y·E) / 4`.
    pub fn from_correlators(alice_settings: usize, bob_settings: usize, correlators: &[f64]) -> Result<Self> {
        if let Some(e) = correlators.iter().find(|e| !(-1.0..=1.0).contains(*e)) {
            return Err(Error::input("correlators", format!("{e} is outside [-1, 1]")));
        }
        let probs = correlators
            .iter()
            .map(|&e| OUTCOME_PAIRS.map(|(x, y)| (1.0 + f64::from(x * y) * e) / 4.0))
            .collect();
        Self::from_probabilities(alice_settings, bob_settings, probs)
    }

    pub fn alice_settings(&self) -> usize {
        self.alice_settings
    }

    pub fn bob_settings(&self) -> usize {
        self.bob_settings
    }

    pub fn correlators(&self) -> &[f64] {
        &self.correlators
    }

    pub fn correlator(&self, a: usize, b: usize) -> f64 {
        self.correlators[a * self.bob_settings + b]
    }

    pub fn joint_probabilities(&self) -> &[[f64; 4]] {
        &self.joint_probabilities
    }

    /// Largest entrywise deviation in correlators and joint probabilities.
    pub fn max_deviation(&self, other: &CorrelationTable) -> f64 {
        if self.correlators.len() != other.correlators.len() {
            return f64::INFINITY;
        }
        let e = self
            .correlators
            .iter()
            .zip(&other.correlators)
            .map(|(a, b)| (a - b).abs());
        let p = self
            .joint_probabilities
            .iter()
            .zip(&other.joint_probabilities)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()));
        e.chain(p).fold(0.0, f64::max)
    }
}

/// Exact outcome statistics `p(x,y|a,b) = Σ_λ p(λ|a,b) p(x|a,λ) p(y|b,λ)`.
pub fn predict(model: &LhvModel) -> CorrelationTable {
    let settings = &model.settings;
    let joint_probabilities: Vec<[f64; 4]> = (0..settings.joint_count())
        .map(|s| {
            let (a, b) = settings.split(s);
            let mut p = [0.0; 4];
            for (l, &w) in model.lambda_given_settings[s].iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let pa = model.alice_response[a][l];
                let pb = model.bob_response[b][l];
                p[0] += w * pa * pb;
                p[1] += w * pa * (1.0 - pb);
                p[2] += w * (1.0 - pa) * pb;
                p[3] += w * (1.0 - pa) * (1.0 - pb);
            }
            p
        })
        .collect();
    let correlators = joint_probabilities.iter().map(correlator).collect();
    CorrelationTable {
        alice_settings: settings.alice,
        bob_settings: settings.bob,
        correlators,
        joint_probabilities,
    }
}

/// Builds a model whose hidden variable carries the joint setting together with
/// both local outcomes, so it reproduces any target table exactly.
///
/// `λ = (s, x, y)` is supported only under joint setting `s`, with weight
/// `p(x, y | s)`; responses output `x` and `y` deterministically.
pub fn brans_construct(target: &CorrelationTable, settings: &SettingSpace) -> Result<LhvModel> {
    if target.alice_settings != settings.alice || target.bob_settings != settings.bob {
        return Err(Error::input(
            "settings",
            "target table and setting space have different shapes",
        ));
    }
    let joint = settings.joint_count();
    let lambda_count = joint * OUTCOME_PAIRS.len();
    if lambda_count > MAX_LAMBDA_COUNT {
        return Err(Error::input(
            "settings",
            format!("needs {lambda_count} hidden values, above {MAX_LAMBDA_COUNT}"),
        ));
    }
    let mut columns = vec![vec![0.0; lambda_count]; joint];
    let mut alice_out = vec![0.0; lambda_count];
    let mut bob_out = vec![0.0; lambda_count];
    for (s, probs) in target.joint_probabilities.iter().enumerate() {
        for (k, (&p, (x, y))) in probs.iter().zip(OUTCOME_PAIRS).enumerate() {
            let l = s * OUTCOME_PAIRS.len() + k;
            columns[s][l] = p;
            alice_out[l] = if x > 0 { 1.0 } else { 0.0 };
            bob_out[l] = if y > 0 { 1.0 } else { 0.0 };
        }
    }
    LhvModel::new(
        settings.clone(),
        columns,
        vec![alice_out; settings.alice],
        vec![bob_out; settings.bob],
    )
}

/// True when `p(λ | a, b)` agrees across all joint settings within `tolerance`.
pub fn measurement_independent(model: &LhvModel, tolerance: f64) -> bool {
    let (first, rest) = model
        .lambda_given_settings
        .split_first()
        .expect("at least one joint setting");
    rest.iter()
        .all(|col| col.iter().zip(first).all(|(a, b)| (a - b).abs() <= tolerance))
}

fn correlator(p: &[f64; 4]) -> f64 {
    p[0] - p[1] - p[2] + p[3]
}

pub(crate) fn check_distribution(field: &str, p: &[f64]) -> Result<()> {
    if let Some(x) = p.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::distribution(
            field,
            format!("entry {x} is negative or not finite"),
        ));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > PROBABILITY_SUM_TOL {
        return Err(Error::distribution(field, format!("entries sum to {total}")));
    }
    Ok(())
}

fn check_response(field: &str, table: &[Vec<f64>], settings: usize, lambda_count: usize) -> Result<()> {
    if table.len() != settings {
        return Err(Error::distribution(
            field,
            format!("expected {settings} rows, got {}", table.len()),
        ));
    }
    for (i, row) in table.iter().enumerate() {
        if row.len() != lambda_count {
            return Err(Error::distribution(
                format!("{field}[{i}]"),
                format!("expected {lambda_count} entries, got {}", row.len()),
            ));
        }
        if let Some(x) = row.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::distribution(
                format!("{field}[{i}]"),
                format!("{x} is not a probability"),
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inequalities::chsh_value;
    use proptest::prelude::*;

    fn uniform() -> SettingSpace {
        SettingSpace::default()
    }

    #[test]
    fn constant_responses_give_perfect_correlation() {
        let m = LhvModel::measurement_independent_from(
            uniform(),
            vec![0.3, 0.7],
            vec![vec![1.0, 1.0]; 2],
            vec![vec![1.0, 1.0]; 2],
        )
        .unwrap();
        assert!(predict(&m).correlators().iter().all(|&e| e == 1.0));
    }

    #[test]
    fn fair_coins_are_uncorrelated() {
        let m = LhvModel::measurement_independent_from(
            uniform(),
            vec![1.0],
            vec![vec![0.5]; 2],
            vec![vec![0.5]; 2],
        )
        .unwrap();
        let t = predict(&m);
        assert!(t.correlators().iter().all(|&e| e == 0.0));
        assert!(t
            .joint_probabilities()
            .iter()
            .all(|p| p.iter().all(|&x| x == 0.25)));
    }

    #[test]
    fn construction_rejects_bad_tables() {
        let bad_col = LhvModel::new(
            uniform(),
            vec![vec![0.5, 0.4]; 4],
            vec![vec![1.0, 1.0]; 2],
            vec![vec![1.0, 1.0]; 2],
        );
        match bad_col {
            Err(Error::InvalidDistribution { field, .. }) => assert_eq!(field, "lambda_given_settings[0]"),
            other => panic!("unexpected {other:?}"),
        }
        let bad_resp = LhvModel::new(
            uniform(),
            vec![vec![0.5, 0.5]; 4],
            vec![vec![1.0, 1.5]; 2],
            vec![vec![1.0, 1.0]; 2],
        );
        assert!(matches!(bad_resp, Err(Error::InvalidDistribution { .. })));
        let too_big = LhvModel::measurement_independent_from(
            uniform(),
            vec![1.0 / 65.0; 65],
            vec![vec![1.0; 65]; 2],
            vec![vec![1.0; 65]; 2],
        );
        assert!(too_big.is_err());
        assert!(SettingSpace::new(2, 2, vec![0.5, 0.5, 0.5, -0.5]).is_err());
    }

    #[test]
    fn brans_reproduces_target_and_breaks_independence() {
        let target = CorrelationTable::from_correlators(2, 2, &[1.0, 1.0, 1.0, -1.0]).unwrap();
        let model = brans_construct(&target, &uniform()).unwrap();
        assert!(predict(&model).max_deviation(&target) <= 1e-12);
        assert!(!measurement_independent(&model, 1e-9));
        assert_eq!(chsh_value(&predict(&model)).unwrap(), 4.0);

        let zero = CorrelationTable::from_correlators(2, 2, &[0.0; 4]).unwrap();
        let model = brans_construct(&zero, &uniform()).unwrap();
        assert_eq!(chsh_value(&predict(&model)).unwrap(), 0.0);
    }

    #[test]
    fn prune_and_pad_preserve_predictions() {
        let target = CorrelationTable::from_correlators(2, 2, &[1.0, 1.0, 1.0, -1.0]).unwrap();
        let model = brans_construct(&target, &uniform()).unwrap();
        let pruned = model.pruned().unwrap();
        assert_eq!(pruned.lambda_count(), 8);
        let padded = pruned.padded(12).unwrap();
        assert_eq!(padded.lambda_count(), 12);
        assert!(predict(&padded).max_deviation(&target) <= 1e-12);
        assert!(pruned.padded(3).is_err());
    }

    #[test]
    fn independence_tolerance() {
        let tol = 1e-6;
        let cols = vec![
            vec![0.5, 0.5],
            vec![0.5 + 0.5 * tol, 0.5 - 0.5 * tol],
            vec![0.5, 0.5],
            vec![0.5, 0.5],
        ];
        let m = LhvModel::new(uniform(), cols, vec![vec![1.0, 0.0]; 2], vec![vec![1.0, 0.0]; 2]).unwrap();
        assert!(measurement_independent(&m, tol));
        assert!(!measurement_independent(&m, 0.1 * tol));
    }

    fn simplex(raw: &[f64]) -> Vec<f64> {
        let total: f64 = raw.iter().sum();
        let mut v: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let residue = 1.0 - v.iter().sum::<f64>();
        v[0] += residue;
        v
    }

    fn columns(raw: &[f64], lambda: usize) -> Vec<Vec<f64>> {
        raw.chunks(lambda).map(simplex).collect()
    }

    fn responses(raw: &[f64], lambda: usize) -> Vec<Vec<f64>> {
        raw.chunks(lambda).map(<[f64]>::to_vec).collect()
    }

    proptest! {
        #[test]
        fn brans_round_trip(raw in prop::collection::vec(0.01f64..1.0, 16)) {
            let probs: Vec<[f64; 4]> = raw.chunks(4).map(|c| {
                let s = simplex(c);
                [s[0], s[1], s[2], s[3]]
            }).collect();
            let target = CorrelationTable::from_probabilities(2, 2, probs).unwrap();
            let model = brans_construct(&target, &uniform()).unwrap();
            prop_assert!(predict(&model).max_deviation(&target) <= 1e-12);
        }

        #[test]
        fn predict_is_linear_in_lambda_distribution(
            c1 in prop::collection::vec(0.01f64..1.0, 12),
            c2 in prop::collection::vec(0.01f64..1.0, 12),
            ra in prop::collection::vec(0.0f64..=1.0, 6),
            rb in prop::collection::vec(0.0f64..=1.0, 6),
            w in 0.0f64..=1.0,
        ) {
            let (c1, c2) = (columns(&c1, 3), columns(&c2, 3));
            let mixed: Vec<Vec<f64>> = c1.iter().zip(&c2)
                .map(|(x, y)| simplex(&x.iter().zip(y).map(|(p, q)| w * p + (1.0 - w) * q).collect::<Vec<_>>()))
                .collect();
            let build = |cols| LhvModel::new(uniform(), cols, responses(&ra, 3), responses(&rb, 3)).unwrap();
            let (t1, t2, tm) = (predict(&build(c1)), predict(&build(c2)), predict(&build(mixed)));
            for s in 0..4 {
                let e = w * t1.correlators()[s] + (1.0 - w) * t2.correlators()[s];
                prop_assert!((e - tm.correlators()[s]).abs() <= 1e-12);
            }
        }

        #[test]
        fn predicted_correlators_match_probabilities(
            cols in prop::collection::vec(0.01f64..1.0, 16),
            ra in prop::collection::vec(0.0f64..=1.0, 8),
            rb in prop::collection::vec(0.0f64..=1.0, 8),
        ) {
            let m = LhvModel::new(uniform(), columns(&cols, 4), responses(&ra, 4), responses(&rb, 4)).unwrap();
            let t = predict(&m);
            for (e, p) in t.correlators().iter().zip(t.joint_probabilities()) {
                let direct: f64 = OUTCOME_PAIRS.iter().zip(p).map(|((x, y), q)| f64::from(x * y) * q).sum();
                prop_assert!((e - direct).abs() <= 1e-12);
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
        }
    }
}
