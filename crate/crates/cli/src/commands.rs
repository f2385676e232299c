use std::path::Path;

use measdep::inequalities::{
    chsh_quantum, chsh_sums, chsh_value, deterministic_strategies, kcbs_classical_min, kcbs_value,
    KcbsScenario,
};
use measdep::infotheory::{cmd, mutual_information, CmdReport, JointDistribution};
use measdep::io::{self, fmt17};
use measdep::lhv::{predict, CorrelationTable, LhvModel, SettingSpace};
use measdep::mdsearch::{self, Incumbent, SearchConfig};
use measdep::teleport::{TeleportInput, TeleportProtocol, TeleportTranscript};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::manifest::{sibling, Run};
use crate::{ChshArgs, Failure, KcbsArgs, MiArgs, OptimizeArgs, TeleportArgs};

/// Total of a `--table` argument must be this close to 1 before renormalizing.
const TABLE_SUM_TOL: f64 = 1e-9;

fn print_json<T: Serialize>(value: &T) -> Result<String, Failure> {
    let text = io::to_json(value)?;
    print!("{text}");
    Ok(text)
}

#[derive(Serialize)]
struct TeleportSummary {
    trials: u64,
    seed: u64,
    outcome_counts: [u64; 4],
    outcome_frequencies: [f64; 4],
    min_fidelity: f64,
}

pub fn teleport(args: &TeleportArgs) -> Result<(), Failure> {
    let mut run = Run::start();
    let fixed = match args.a_re {
        Some(a_re) if !args.random => Some(TeleportInput::new(
            Complex64::new(a_re, args.a_im),
            Complex64::new(args.b_re, args.b_im),
        )?),
        _ => None,
    };
    let forced = args.force_outcome.map(usize::from);
    let protocol = TeleportProtocol::new();
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut transcripts: Vec<TeleportTranscript> = Vec::new();
    let mut counts = [0u64; 4];
    let mut min_fidelity = f64::INFINITY;
    for _ in 0..args.trials {
        let input = match fixed {
            Some(input) => input,
            None => TeleportInput::random(&mut rng),
        };
        let t = protocol.run_with_rng(&input, forced, &mut rng)?;
        counts[t.outcome_index] += 1;
        min_fidelity = min_fidelity.min(t.fidelity);
        if args.out.is_some() {
            transcripts.push(t);
        }
    }
    let summary = TeleportSummary {
        trials: args.trials,
        seed: args.seed,
        outcome_counts: counts,
        outcome_frequencies: counts.map(|c| c as f64 / args.trials as f64),
        min_fidelity,
    };
    let summary_text = print_json(&summary)?;
    if let Some(out) = &args.out {
        run.write(out, &io::to_json(&transcripts)?)?;
        run.write(&sibling(out, "summary.json"), &summary_text)?;
        run.finish(&sibling(out, "manifest.json"), "teleport", Some(args.seed), args)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ChshReport {
    source: &'static str,
    chsh_value: f64,
    /// `|Σ ± E|` for each placement of the minus sign.
    sign_placements: [f64; 4],
    table: CorrelationTable,
    #[serde(skip_serializing_if = "Option::is_none")]
    strategy: Option<Strategy>,
}

#[derive(Serialize)]
struct Strategy {
    alice: [i8; 2],
    bob: [i8; 2],
}

pub fn chsh(args: &ChshArgs) -> Result<(), Failure> {
    let mut run = Run::start();
    let (source, table, strategy) = if let Some(path) = &args.scenario {
        let scenario = io::chsh_scenario_from_json(&run.read(path)?).map_err(|e| in_file(path, e))?;
        ("scenario", chsh_quantum(&scenario)?, None)
    } else if let Some(path) = &args.model {
        let model = read_model(&mut run, path)?;
        ("model", predict(&model), None)
    } else {
        let (table, strategy) = best_deterministic()?;
        ("deterministic-max", table, Some(strategy))
    };
    let report = ChshReport {
        source,
        chsh_value: chsh_value(&table)?,
        sign_placements: chsh_sums(&table)?.map(f64::abs),
        table,
        strategy,
    };
    let text = print_json(&report)?;
    if let Some(out) = &args.out {
        run.write(out, &text)?;
        run.finish(&sibling(out, "manifest.json"), "chsh", None, args)?;
    }
    Ok(())
}

fn best_deterministic() -> Result<(CorrelationTable, Strategy), Failure> {
    let strategies = deterministic_strategies(&SettingSpace::default())?;
    let mut best: Option<(f64, CorrelationTable, &LhvModel)> = None;
    for model in &strategies {
        let table = predict(model);
        let value = chsh_value(&table)?;
        if best.as_ref().is_none_or(|(v, _, _)| value > *v) {
            best = Some((value, table, model));
        }
    }
    let (_, table, model) = best.ok_or_else(|| Failure::Internal("no strategies".into()))?;
    let sign = |r: &[Vec<f64>], k: usize| if r[k][0] > 0.5 { 1 } else { -1 };
    let strategy = Strategy {
        alice: [sign(model.alice_response(), 0), sign(model.alice_response(), 1)],
        bob: [sign(model.bob_response(), 0), sign(model.bob_response(), 1)],
    };
    Ok((table, strategy))
}

fn in_file(path: &Path, e: measdep::Error) -> Failure {
    match Failure::from(e) {
        Failure::Input(m) => Failure::Input(format!("{}: {m}", path.display())),
        internal => internal,
    }
}

fn read_model(run: &mut Run, path: &Path) -> Result<LhvModel, Failure> {
    io::model_from_json(&run.read(path)?).map_err(|e| in_file(path, e))
}

#[derive(Serialize)]
struct MiReport {
    mutual_information_bits: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    cmd: Option<CmdReport>,
}

pub fn mi(args: &MiArgs) -> Result<(), Failure> {
    let report = if let Some(table) = &args.table {
        let joint = parse_table(table, args.cols as usize)?;
        MiReport {
            mutual_information_bits: mutual_information(&joint)?,
            cmd: None,
        }
    } else {
        let path = args.model.as_ref().expect("clap enforces one source");
        let model = read_model(&mut Run::start(), path)?;
        let report = cmd(&model)?;
        MiReport {
            mutual_information_bits: report.raw_bits,
            cmd: Some(report),
        }
    };
    print_json(&report)?;
    Ok(())
}

fn parse_table(text: &str, cols: usize) -> Result<JointDistribution, Failure> {
    let values = text
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Failure::input(format!("--table: cannot parse `{}`", v.trim())))
        })
        .collect::<Result<Vec<f64>, _>>()?;
    if values.len() % cols != 0 {
        return Err(Failure::input(format!(
            "--table: {} entries do not fill rows of {cols}",
            values.len()
        )));
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Failure::input(format!("--table: entry {v} is not a probability")));
    }
    let total: f64 = values.iter().sum();
    if (total - 1.0).abs() > TABLE_SUM_TOL {
        return Err(Failure::input(format!(
            "--table: entries sum to {}, not 1 within {TABLE_SUM_TOL:e}",
            fmt17(total)
        )));
    }
    let rows = values.len() / cols;
    Ok(JointDistribution::new(
        rows,
        cols,
        values.iter().map(|v| v / total).collect(),
    )?)
}

#[derive(Serialize)]
struct SearchReport {
    mode: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    target_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    budget_bits: Option<f64>,
    certified: bool,
    chsh: f64,
    raw_bits: f64,
    normalized: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    model_file: Option<String>,
}

#[derive(Serialize)]
struct ResolvedOptimize<'a> {
    args: &'a OptimizeArgs,
    search: &'a SearchConfig,
}

pub fn optimize(args: &OptimizeArgs) -> Result<(), Failure> {
    let mut run = Run::start();
    let mut cfg = match &args.config {
        Some(path) => SearchConfig::from_kv_str(&run.read(path)?).map_err(|e| in_file(path, e))?,
        None => SearchConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let out_dir = args.out_dir.as_deref();

    if let Some(budgets) = &args.curve {
        let budgets = parse_list(budgets, "--curve")?;
        let curve = mdsearch::tradeoff_curve(&budgets, &cfg)?;
        let mut csv = String::from("budget_bits,best_chsh,model_file\n");
        for (i, point) in curve.points.iter().enumerate() {
            let name = format!("model-{i:03}.json");
            let model_file = match out_dir {
                Some(dir) => {
                    run.write(&dir.join(&name), &io::model_to_json(&point.model)?)?;
                    name
                }
                None => String::new(),
            };
            csv.push_str(&format!(
                "{},{},{model_file}\n",
                fmt17(point.cmd_budget_bits),
                fmt17(point.best_chsh)
            ));
        }
        print!("{csv}");
        if let Some(dir) = out_dir {
            run.write(&dir.join("curve.csv"), &csv)?;
        }
    } else {
        let (mode, target_s, budget_bits, certified, incumbent) = if let Some(target) = args.target_s {
            let outcome = mdsearch::min_cmd_for_chsh(target, &cfg)?;
            let certified = outcome.is_certified();
            (
                "target",
                Some(target),
                None,
                certified,
                outcome.incumbent().clone(),
            )
        } else {
            let budget = args.budget.expect("clap enforces one mode");
            let found = mdsearch::max_chsh_under_budget(budget, &cfg)?;
            ("budget", None, Some(budget), true, found)
        };
        let Incumbent { model, chsh, cmd, .. } = incumbent;
        let model_file = out_dir.map(|_| "model.json".to_owned());
        let report = SearchReport {
            mode,
            target_s,
            budget_bits,
            certified,
            chsh,
            raw_bits: cmd.raw_bits,
            normalized: cmd.normalized,
            model_file,
        };
        let text = print_json(&report)?;
        if let Some(dir) = out_dir {
            run.write(&dir.join("model.json"), &io::model_to_json(&model)?)?;
            run.write(&dir.join("result.json"), &text)?;
        }
    }
    if let Some(dir) = out_dir {
        let resolved = ResolvedOptimize { args, search: &cfg };
        run.finish(&dir.join("manifest.json"), "optimize", Some(cfg.seed), &resolved)?;
    }
    Ok(())
}

fn parse_list(text: &str, flag: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Failure::input(format!("{flag}: cannot parse `{}`", v.trim())))
        })
        .collect()
}

#[derive(Serialize)]
struct KcbsReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    kcbs_value: Option<f64>,
    classical_min: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    violates: Option<bool>,
}

pub fn kcbs(args: &KcbsArgs) -> Result<(), Failure> {
    let classical_min = kcbs_classical_min();
    let scenario = if args.quantum_optimal {
        Some(KcbsScenario::pentagram())
    } else if let Some(path) = &args.scenario {
        let text = Run::start().read(path)?;
        Some(io::kcbs_scenario_from_json(&text).map_err(|e| in_file(path, e))?)
    } else {
        None
    };
    let value = scenario.as_ref().map(kcbs_value).transpose()?;
    print_json(&KcbsReport {
        kcbs_value: value,
        classical_min,
        violates: value.map(|v| v < classical_min),
    })?;
    Ok(())
}
