//! Search over measurement-dependent hidden-variable models.
//!
//! The search state is the set of setting-conditional distributions `p(λ | s)`.
//! For fixed distributions the CHSH value is linear in the response tables and the
//! dependence measure does not involve them at all, so responses are always set to
//! the exact per-`λ` best deterministic reply (enumerating the 16 local strategies
//! for each of the four CHSH sign placements). Simulated annealing then only has
//! to move the distributions, which it does with Dirichlet-perturbation proposals,
//! single-entry zeroing steps and partial mixing of two distributions, all of which
//! stay on the product of simplices.
//!
//! Restarts run in parallel, each with its own ChaCha stream `(seed, round·R + r)`.
//! The reduction walks restarts in index order, so results do not depend on the
//! thread count.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::inequalities::{chsh_value, CHSH_SIGNS};
use crate::infotheory::{self, CmdReport};
use crate::lhv::{self, CorrelationTable, LhvModel, SettingSpace};
use crate::{Error, Result};

/// Slack for comparing a model's dependence against a budget. Pure rounding.
const BUDGET_SLACK: f64 = 1e-9;

/// Concentrations used by the Dirichlet proposal, picked uniformly per step.
const CONCENTRATIONS: [f64; 4] = [30.0, 300.0, 3_000.0, 30_000.0];

/// Floor added to every Dirichlet parameter so empty entries can refill.
const DIRICHLET_FLOOR: f64 = 0.01;

/// Maximum number of penalty doublings when every restart ends infeasible.
const MAX_PENALTY_ROUNDS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub lambda_count: usize,
    pub restarts: usize,
    pub max_iterations: usize,
    pub initial_temperature: f64,
    /// Per-iteration geometric cooling factor.
    pub temperature_decay: f64,
    pub penalty_weight: f64,
    pub seed: u64,
    pub tolerance_s: f64,
    pub tolerance_cmd: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            lambda_count: 8,
            restarts: 32,
            max_iterations: 20_000,
            initial_temperature: 0.01,
            temperature_decay: 0.9995,
            penalty_weight: 10.0,
            seed: 1,
            tolerance_s: 1e-3,
            tolerance_cmd: 1e-3,
        }
    }
}

impl SearchConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive_count = [
            ("lambda_count", self.lambda_count),
            ("restarts", self.restarts),
            ("max_iterations", self.max_iterations),
        ];
        for (key, v) in positive_count {
            if v == 0 {
                return Err(Error::input(key, "must be positive"));
            }
        }
        if self.lambda_count > lhv::MAX_LAMBDA_COUNT {
            return Err(Error::input(
                "lambda_count",
                format!("must not exceed {}", lhv::MAX_LAMBDA_COUNT),
            ));
        }
        let positive_real = [
            ("initial_temperature", self.initial_temperature),
            ("penalty_weight", self.penalty_weight),
            ("tolerance_s", self.tolerance_s),
            ("tolerance_cmd", self.tolerance_cmd),
        ];
        for (key, v) in positive_real {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::input(key, "must be a positive number"));
            }
        }
        if !(self.temperature_decay > 0.0 && self.temperature_decay < 1.0) {
            return Err(Error::input("temperature_decay", "must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Parses flat `key = value` text. Blank lines and `#` comments are skipped;
    /// every key is optional and unknown keys are rejected.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::input(format!("line {}", n + 1), "expected key = value"))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |_| Error::input(key, format!("cannot parse `{value}`"));
            match key {
                "lambda_count" => cfg.lambda_count = value.parse().map_err(bad)?,
                "restarts" => cfg.restarts = value.parse().map_err(bad)?,
                "max_iterations" => cfg.max_iterations = value.parse().map_err(bad)?,
                "seed" => cfg.seed = value.parse().map_err(bad)?,
                _ => {
                    let v: f64 = value
                        .parse()
                        .map_err(|_| Error::input(key, format!("cannot parse `{value}`")))?;
                    match key {
                        "initial_temperature" => cfg.initial_temperature = v,
                        "temperature_decay" => cfg.temperature_decay = v,
                        "penalty_weight" => cfg.penalty_weight = v,
                        "tolerance_s" => cfg.tolerance_s = v,
                        "tolerance_cmd" => cfg.tolerance_cmd = v,
                        _ => return Err(Error::input(key, "unknown configuration key")),
                    }
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// All fields as `key = value` lines, defaults included.
    pub fn to_kv_string(&self) -> String {
        use crate::io::fmt17;
        format!(
            "lambda_count = {}\nrestarts = {}\nmax_iterations = {}\ninitial_temperature = {}\n\
             temperature_decay = {}\npenalty_weight = {}\nseed = {}\ntolerance_s = {}\n\
             tolerance_cmd = {}\n",
            self.lambda_count,
            self.restarts,
            self.max_iterations,
            fmt17(self.initial_temperature),
            fmt17(self.temperature_decay),
            fmt17(self.penalty_weight),
            self.seed,
            fmt17(self.tolerance_s),
            fmt17(self.tolerance_cmd),
        )
    }
}

/// Where an incumbent came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    /// A constructed starting point (independent optimum or Brans-style model).
    Seed,
    Restart {
        round: usize,
        index: usize,
        iteration: usize,
    },
}

/// A model returned by the search, with independently recomputed statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Incumbent {
    pub model: LhvModel,
    /// `chsh_value(predict(model))`.
    pub chsh: f64,
    /// `cmd(model)`.
    pub cmd: CmdReport,
    /// CHSH value as computed inside the search.
    pub claimed_chsh: f64,
    /// Dependence in bits as computed inside the search.
    pub claimed_raw_bits: f64,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MinCmdOutcome {
    Certified(Incumbent),
    /// No model reached the target; carries the least-violating one.
    BudgetExhausted(Incumbent),
}

impl MinCmdOutcome {
    pub fn incumbent(&self) -> &Incumbent {
        match self {
            MinCmdOutcome::Certified(i) | MinCmdOutcome::BudgetExhausted(i) => i,
        }
    }

    pub fn is_certified(&self) -> bool {
        matches!(self, MinCmdOutcome::Certified(_))
    }
}

impl fmt::Display for MinCmdOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = self.incumbent();
        let tag = if self.is_certified() {
            "certified"
        } else {
            "budget exhausted"
        };
        write!(f, "{tag}: S = {}, C_MD = {} bits", i.chsh, i.cmd.raw_bits)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffPoint {
    pub cmd_budget_bits: f64,
    pub best_chsh: f64,
    pub model: LhvModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffCurve {
    pub points: Vec<TradeoffPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinCmdPoint {
    pub target_s: f64,
    pub outcome: MinCmdOutcome,
}

/// Smallest dependence found that reaches `target_s`.
pub fn min_cmd_for_chsh(target_s: f64, cfg: &SearchConfig) -> Result<MinCmdOutcome> {
    cfg.validate()?;
    if target_s.is_nan() || target_s <= 2.0 {
        return Err(Error::input(
            "target_s",
            format!("{target_s} is reachable without any setting dependence (bound 2)"),
        ));
    }
    if target_s > 4.0 {
        return Err(Error::input(
            "target_s",
            format!("{target_s} exceeds the algebraic maximum 4"),
        ));
    }
    let problem = Problem::new(Goal::ReachChsh(target_s), cfg);
    let seeds = brans_seed(cfg.lambda_count)?.into_iter().collect::<Vec<_>>();
    let best = problem.search(&seeds)?;
    let feasible = best.feasible;
    let incumbent = best.into_incumbent(&problem)?;
    if feasible && incumbent.chsh >= target_s - cfg.tolerance_s {
        Ok(MinCmdOutcome::Certified(incumbent))
    } else {
        Ok(MinCmdOutcome::BudgetExhausted(incumbent))
    }
}

/// Largest CHSH value found among models whose dependence stays within `budget_bits`.
pub fn max_chsh_under_budget(budget_bits: f64, cfg: &SearchConfig) -> Result<Incumbent> {
    cfg.validate()?;
    if !budget_bits.is_finite() || budget_bits < 0.0 {
        return Err(Error::input("budget_bits", "must be a finite nonnegative number"));
    }
    let problem = Problem::new(Goal::WithinBudget(budget_bits), cfg);
    let mut seeds = vec![independent_seed(cfg.lambda_count)];
    seeds.extend(brans_seed(cfg.lambda_count)?);
    let best = problem.search(&seeds)?;
    if !best.feasible {
        return Err(Error::Internal(
            "independent seed should always be feasible".into(),
        ));
    }
    best.into_incumbent(&problem)
}

/// `max_chsh_under_budget` for each budget, then a nondecreasing envelope: a model
/// within a smaller budget is also within every larger one.
pub fn tradeoff_curve(budgets: &[f64], cfg: &SearchConfig) -> Result<TradeoffCurve> {
    if budgets.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::input("budgets", "must be sorted ascending"));
    }
    let mut points: Vec<TradeoffPoint> = Vec::with_capacity(budgets.len());
    for &budget in budgets {
        let found = max_chsh_under_budget(budget, cfg)?;
        let point = match points.last() {
            Some(prev) if prev.best_chsh > found.chsh => TradeoffPoint {
                cmd_budget_bits: budget,
                best_chsh: prev.best_chsh,
                model: prev.model.clone(),
            },
            _ => TradeoffPoint {
                cmd_budget_bits: budget,
                best_chsh: found.chsh,
                model: found.model,
            },
        };
        points.push(point);
    }
    Ok(TradeoffCurve { points })
}

/// `min_cmd_for_chsh` over ascending targets, with the envelope that a model
/// certified for a higher target also certifies every lower one.
pub fn min_cmd_curve(targets: &[f64], cfg: &SearchConfig) -> Result<Vec<MinCmdPoint>> {
    if targets.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::input("targets", "must be sorted ascending"));
    }
    let mut points = targets
        .iter()
        .map(|&t| {
            Ok(MinCmdPoint {
                target_s: t,
                outcome: min_cmd_for_chsh(t, cfg)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    for i in (0..points.len().saturating_sub(1)).rev() {
        let (head, tail) = points.split_at_mut(i + 1);
        let (here, next) = (&mut head[i], &tail[0]);
        if next.outcome.is_certified()
            && (!here.outcome.is_certified()
                || next.outcome.incumbent().cmd.raw_bits < here.outcome.incumbent().cmd.raw_bits)
        {
            here.outcome = next.outcome.clone();
        }
    }
    Ok(points)
}

#[derive(Debug, Clone, Copy)]
enum Goal {
    /// Minimize dependence subject to CHSH ≥ target.
    ReachChsh(f64),
    /// Maximize CHSH subject to dependence ≤ budget.
    WithinBudget(f64),
}

/// Column set `p(λ | s)`, indexed `[s][λ]`.
type Columns = Vec<Vec<f64>>;

#[derive(Debug, Clone)]
struct Evaluated {
    columns: Columns,
    chsh: f64,
    mi: f64,
    feasible: bool,
    origin: Origin,
}

impl Evaluated {
    fn into_incumbent(self, problem: &Problem) -> Result<Incumbent> {
        let model = problem.model_for(&self.columns)?;
        let chsh = chsh_value(&lhv::predict(&model))?;
        let cmd = infotheory::cmd(&model)?;
        Ok(Incumbent {
            model,
            chsh,
            cmd,
            claimed_chsh: self.chsh,
            claimed_raw_bits: self.mi,
            origin: self.origin,
        })
    }
}

struct Problem<'a> {
    goal: Goal,
    cfg: &'a SearchConfig,
    settings: SettingSpace,
}

impl<'a> Problem<'a> {
    fn new(goal: Goal, cfg: &'a SearchConfig) -> Self {
        Self {
            goal,
            cfg,
            settings: SettingSpace::default(),
        }
    }

    fn evaluate(&self, columns: Columns, origin: Origin) -> Evaluated {
        let chsh = best_response_chsh(&columns).0;
        let mi = dependence_bits(&columns, self.settings.marginal());
        let feasible = match self.goal {
            Goal::ReachChsh(target) => chsh >= target,
            Goal::WithinBudget(budget) => mi <= budget + BUDGET_SLACK,
        };
        Evaluated {
            columns,
            chsh,
            mi,
            feasible,
            origin,
        }
    }

    fn energy(&self, e: &Evaluated, weight: f64) -> f64 {
        match self.goal {
            Goal::ReachChsh(target) => e.mi + weight * (target - e.chsh).max(0.0),
            Goal::WithinBudget(budget) => -e.chsh + weight * (e.mi - budget).max(0.0),
        }
    }

    /// Strict improvement in the incumbent order; ties keep the earlier candidate.
    fn better(&self, a: &Evaluated, b: &Evaluated, weight: f64) -> bool {
        match (a.feasible, b.feasible) {
            (true, false) => true,
            (false, true) => false,
            (false, false) => self.energy(a, weight) < self.energy(b, weight),
            (true, true) => match self.goal {
                Goal::ReachChsh(_) => a.mi < b.mi,
                Goal::WithinBudget(_) => a.chsh > b.chsh || (a.chsh == b.chsh && a.mi < b.mi),
            },
        }
    }

    fn model_for(&self, columns: &Columns) -> Result<LhvModel> {
        let (_, alice, bob) = best_response_chsh(columns);
        LhvModel::new(self.settings.clone(), columns.clone(), alice, bob)
    }

    fn search(&self, seeds: &[Columns]) -> Result<Evaluated> {
        let mut best: Option<Evaluated> = None;
        let mut weight = self.cfg.penalty_weight;
        let seeded: Vec<Evaluated> = seeds
            .iter()
            .map(|c| self.evaluate(c.clone(), Origin::Seed))
            .collect();
        for round in 0..MAX_PENALTY_ROUNDS {
            let chains: Vec<(Evaluated, f64)> = (0..self.cfg.restarts)
                .into_par_iter()
                .map(|index| self.anneal(round, index, weight, seeds))
                .collect();
            // The penalty is too soft if the chains' energy minima sit outside the
            // constraint; the optimum of the penalized problem then is not the
            // constrained optimum.
            let penalty_exact = chains.iter().any(|(_, v)| *v <= self.tolerance());
            let pool = if round == 0 { seeded.clone() } else { Vec::new() };
            for candidate in pool.into_iter().chain(chains.into_iter().map(|(c, _)| c)) {
                best = match best {
                    Some(b) if !self.better(&candidate, &b, weight) => Some(b),
                    _ => Some(candidate),
                };
            }
            if penalty_exact {
                break;
            }
            weight *= 2.0;
        }
        best.ok_or_else(|| Error::Internal("search produced no candidate".into()))
    }

    fn violation(&self, e: &Evaluated) -> f64 {
        match self.goal {
            Goal::ReachChsh(target) => (target - e.chsh).max(0.0),
            Goal::WithinBudget(budget) => (e.mi - budget).max(0.0),
        }
    }

    fn tolerance(&self) -> f64 {
        match self.goal {
            Goal::ReachChsh(_) => self.cfg.tolerance_s,
            Goal::WithinBudget(_) => self.cfg.tolerance_cmd,
        }
    }

    /// One annealing chain. Returns its best candidate and the constraint violation
    /// of its lowest-energy state.
    fn anneal(&self, round: usize, index: usize, weight: f64, seeds: &[Columns]) -> (Evaluated, f64) {
        let cfg = self.cfg;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream((round * cfg.restarts + index) as u64);

        let start = match seeds.get(index) {
            Some(seed) if round == 0 => seed.clone(),
            _ => (0..self.settings.joint_count())
                .map(|_| dirichlet(&vec![1.0; cfg.lambda_count], &mut rng))
                .collect(),
        };
        let origin = |iteration| Origin::Restart {
            round,
            index,
            iteration,
        };
        let mut current = self.evaluate(start, origin(0));
        let mut current_energy = self.energy(&current, weight);
        let mut best = current.clone();
        let mut lowest = (current_energy, self.violation(&current));
        let mut temperature = cfg.initial_temperature;

        for iteration in 1..=cfg.max_iterations {
            let proposal = propose(&current.columns, &mut rng);
            let candidate = self.evaluate(proposal, origin(iteration));
            let candidate_energy = self.energy(&candidate, weight);
            let delta = candidate_energy - current_energy;
            let accept = delta <= 0.0 || rng.random::<f64>() < (-delta / temperature).exp();
            if accept {
                if self.better(&candidate, &best, weight) {
                    best = candidate.clone();
                }
                if candidate_energy < lowest.0 {
                    lowest = (candidate_energy, self.violation(&candidate));
                }
                current = candidate;
                current_energy = candidate_energy;
            }
            temperature *= cfg.temperature_decay;
        }
        (best, lowest.1)
    }
}

fn propose(columns: &Columns, rng: &mut ChaCha8Rng) -> Columns {
    let mut next = columns.clone();
    let s = rng.random_range(0..columns.len());
    let lambda_count = columns[s].len();
    match rng.random_range(0..10u8) {
        // Zero one entry and renormalize.
        0 => {
            let l = rng.random_range(0..lambda_count);
            let rest = 1.0 - next[s][l];
            if rest > 1e-9 {
                next[s][l] = 0.0;
                let col = next[s].iter().map(|x| x / rest).collect();
                next[s] = renormalize(col);
            }
        }
        // Pull the column toward another one.
        1 => {
            let other = rng.random_range(0..columns.len());
            let t: f64 = rng.random();
            let col = columns[s]
                .iter()
                .zip(&columns[other])
                .map(|(a, b)| (1.0 - t) * a + t * b)
                .collect();
            next[s] = renormalize(col);
        }
        _ => {
            let kappa = CONCENTRATIONS[rng.random_range(0..CONCENTRATIONS.len())];
            let alpha: Vec<f64> = columns[s].iter().map(|p| kappa * p + DIRICHLET_FLOOR).collect();
            next[s] = dirichlet(&alpha, rng);
        }
    }
    next
}

fn dirichlet(alpha: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let draws: Vec<f64> = alpha
            .iter()
            .map(|&a| Gamma::new(a, 1.0).expect("positive shape").sample(rng))
            .collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 && total.is_finite() {
            return renormalize(draws.into_iter().map(|x| x / total).collect());
        }
    }
}

/// Pushes the rounding residue of a near-normalized vector onto its largest entry.
fn renormalize(mut p: Vec<f64>) -> Vec<f64> {
    let residue = 1.0 - p.iter().sum::<f64>();
    if let Some(max) = p.iter_mut().max_by(|a, b| a.total_cmp(b)) {
        *max += residue;
    }
    p
}

/// `I(λ; s)` in bits for conditional columns and setting marginal.
fn dependence_bits(columns: &Columns, marginal: &[f64]) -> f64 {
    let lambda_count = columns[0].len();
    let mut total = 0.0;
    for l in 0..lambda_count {
        let p_lambda: f64 = columns.iter().zip(marginal).map(|(c, m)| m * c[l]).sum();
        for (c, m) in columns.iter().zip(marginal) {
            // Weighting by the product keeps subnormal entries from turning into 0·∞.
            let w = m * c[l];
            if w > 0.0 {
                total += w * (c[l] / p_lambda).log2();
            }
        }
    }
    // Rounding can leave a tiny negative total; NaN must stay visible.
    if total < 0.0 {
        0.0
    } else {
        total
    }
}

const LOCAL_STRATEGIES: [[f64; 2]; 4] = [[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]];

/// Best CHSH value over deterministic responses for fixed columns, with the
/// response tables that attain it (`p(+1)` per setting and `λ`).
///
/// Joint settings are ordered `(0,0), (0,1), (1,0), (1,1)`.
#[allow(clippy::needless_range_loop)]
fn best_response_chsh(columns: &Columns) -> (f64, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let lambda_count = columns[0].len();
    let mut best: Option<(f64, Vec<(usize, usize)>)> = None;
    for signs in CHSH_SIGNS {
        let mut total = 0.0;
        let mut choice = Vec::with_capacity(lambda_count);
        for l in 0..lambda_count {
            let mut top = (f64::NEG_INFINITY, (0, 0));
            for (ia, a) in LOCAL_STRATEGIES.iter().enumerate() {
                for (ib, b) in LOCAL_STRATEGIES.iter().enumerate() {
                    let v = signs[0] * columns[0][l] * a[0] * b[0]
                        + signs[1] * columns[1][l] * a[0] * b[1]
                        + signs[2] * columns[2][l] * a[1] * b[0]
                        + signs[3] * columns[3][l] * a[1] * b[1];
                    if v > top.0 {
                        top = (v, (ia, ib));
                    }
                }
            }
            total += top.0;
            choice.push(top.1);
        }
        if best.as_ref().is_none_or(|(v, _)| total > *v) {
            best = Some((total, choice));
        }
    }
    let (value, choice) = best.expect("four placements");
    let response = |pick: fn(&(usize, usize)) -> usize| -> Vec<Vec<f64>> {
        (0..2)
            .map(|setting| {
                choice
                    .iter()
                    .map(|c| {
                        if LOCAL_STRATEGIES[pick(c)][setting] > 0.0 {
                            1.0
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect()
    };
    (value, response(|c| c.0), response(|c| c.1))
}

/// Measurement-independent start: one `λ` carrying all weight, CHSH 2, no dependence.
fn independent_seed(lambda_count: usize) -> Columns {
    let mut col = vec![0.0; lambda_count];
    col[0] = 1.0;
    vec![col; 4]
}

/// Brans-style start for the `(+1, +1, +1, −1)` pattern: each joint setting gets its
/// own `λ` with deterministic outcomes, reaching CHSH 4 at full dependence.
fn brans_seed(lambda_count: usize) -> Result<Option<Columns>> {
    let pattern = [
        [1.0, 0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
    ];
    let target = CorrelationTable::from_probabilities(2, 2, pattern.to_vec())?;
    let model = lhv::brans_construct(&target, &SettingSpace::default())?.pruned()?;
    if model.lambda_count() > lambda_count {
        return Ok(None);
    }
    Ok(Some(model.padded(lambda_count)?.lambda_given_settings().to_vec()))
}
