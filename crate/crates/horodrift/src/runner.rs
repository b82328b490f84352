//! Command-line front end: a flat `key=value` configuration grammar, one
//! subcommand per experiment, JSON reports plus plot-ready checkpoint CSVs,
//! and deterministic parallel execution.
//!
//! Every run writes `<out>.report.json` (estimates, errors, bounds,
//! pass/fail flags, seed, and the full config echo) and
//! `<out>.checkpoints.csv`. Outputs are byte-identical for identical
//! configurations regardless of the worker count. Exit codes: 0 success,
//! 1 configuration error, 2 a declared bound check failed, 3 a Monte Carlo
//! run could not retain enough survivors.

use crate::drift::DriftReport;
use crate::error::{Error, Result};
use crate::hyperbolic::Sides;
use crate::lyapunov::{furstenberg_formula, lyap_direct, stationary_direction, MatrixLaw};
use crate::percolation::BoundTable;
use crate::tiling::{
    dim_upper_bound, estimate_speed, hyperbolicity_scan, max_f_sum, speed_lower_bound,
    theorem_a_check, HyperbolicityReport, TheoremAReport, TilingSpec, WalkParams,
};
use crate::tree::{
    canopy_stationary_levels, conductance_bounds_at_depth, simulate_tree_walk, speed_formula,
    tree_theorem_a_check, ConductanceInterval, EdgeSplit, FiniteTree, TreeKind,
    TreeTheoremAReport, WeightedTree,
};
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const WORKERS_ENV: &str = "HORODRIFT_WORKERS";

const EXIT_OK: i32 = 0;
const EXIT_CONFIG: i32 = 1;
const EXIT_BOUND_FAILED: i32 = 2;
const EXIT_MC_FAILED: i32 = 3;

/// Parsed command line: a subcommand plus flat string parameters.
#[derive(Clone, Debug)]
pub struct ParsedConfig {
    pub command: String,
    pub params: BTreeMap<String, String>,
}

/// Parses `subcommand key=value ...`. A `config=FILE` pair loads more
/// `key=value` lines from the file (one per line, `#` comments); explicit
/// command-line pairs win over file entries.
pub fn parse_args<I: IntoIterator<Item = String>>(args: I) -> Result<ParsedConfig> {
    let mut it = args.into_iter();
    let command = it
        .next()
        .ok_or_else(|| Error::Config("missing subcommand".into()))?;
    let mut cli_pairs = Vec::new();
    let mut config_file: Option<String> = None;
    for token in it {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got `{token}`")))?;
        if key == "config" {
            config_file = Some(value.to_string());
        } else {
            cli_pairs.push((key.to_string(), value.to_string()));
        }
    }
    let mut params = BTreeMap::new();
    if let Some(path) = config_file {
        let text = std::fs::read_to_string(&path)?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::FileFormat {
                path: path.clone(),
                reason: format!("line {}: expected key=value", lineno + 1),
            })?;
            params.insert(key.trim().to_string(), value.trim().to_string());
        }
    }
    for (k, v) in cli_pairs {
        params.insert(k, v);
    }
    Ok(ParsedConfig { command, params })
}

struct Params<'a>(&'a BTreeMap<String, String>);

impl Params<'_> {
    fn u64(&self, key: &str, default: u64) -> Result<u64> {
        match self.0.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|e| Error::Config(format!("{key}={v}: {e}"))),
        }
    }

    fn f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.0.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|e| Error::Config(format!("{key}={v}: {e}"))),
        }
    }

    fn f64_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.0.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse()
                        .map_err(|e| Error::Config(format!("{key}={v}: {e}")))
                })
                .collect(),
        }
    }

    fn string(&self, key: &str, default: &str) -> String {
        self.0
            .get(key)
            .cloned()
            .unwrap_or_else(|| default.to_string())
    }

    fn sides(&self) -> Result<Sides> {
        match self.0.get("P") {
            None => Err(Error::Config("missing P=<sides|inf>".into())),
            Some(v) if v == "inf" => Ok(Sides::Ideal),
            Some(v) => v
                .parse()
                .map(Sides::Finite)
                .map_err(|e| Error::Config(format!("P={v}: {e}"))),
        }
    }

    fn valence(&self) -> Result<u32> {
        match self.0.get("Q") {
            None => Err(Error::Config("missing Q=<valence>".into())),
            Some(v) => v
                .parse()
                .map_err(|e| Error::Config(format!("Q={v}: {e}"))),
        }
    }

    fn tiling(&self) -> Result<TilingSpec> {
        TilingSpec::new(self.sides()?, self.valence()?)
    }

    fn walk_params(&self, default_n: u64, default_trials: u64) -> Result<WalkParams> {
        Ok(WalkParams {
            n_steps: self.u64("n", default_n)?,
            trials: self.u64("trials", default_trials)?,
            seed: self.u64("seed", 1)?,
            checkpoint_stride: self.u64("stride", 64)?,
        })
    }
}

#[derive(Serialize)]
struct ReportEnvelope<'a, T: Serialize> {
    command: &'a str,
    seed: u64,
    config: &'a BTreeMap<String, String>,
    passed: Option<bool>,
    #[serde(flatten)]
    body: T,
}

/// Where a run wrote its artifacts, and the exit code it decided on.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub report_path: PathBuf,
    pub csv_path: PathBuf,
}

fn write_outputs<T: Serialize>(
    cfg: &ParsedConfig,
    seed: u64,
    passed: Option<bool>,
    body: T,
    csv_header: &str,
    csv_rows: &[String],
) -> Result<(PathBuf, PathBuf)> {
    let out = Params(&cfg.params).string("out", &cfg.command);
    let report_path = PathBuf::from(format!("{out}.report.json"));
    let csv_path = PathBuf::from(format!("{out}.checkpoints.csv"));
    let envelope = ReportEnvelope {
        command: &cfg.command,
        seed,
        config: &cfg.params,
        passed,
        body,
    };
    let mut json = serde_json::to_vec_pretty(&envelope)?;
    json.push(b'\n');
    std::fs::write(&report_path, json)?;
    let mut csv = std::io::BufWriter::new(std::fs::File::create(&csv_path)?);
    writeln!(csv, "{csv_header}")?;
    for row in csv_rows {
        writeln!(csv, "{row}")?;
    }
    csv.flush()?;
    Ok((report_path, csv_path))
}

/// Executes a parsed configuration, writing the report and checkpoint files.
pub fn run(cfg: &ParsedConfig) -> Result<RunOutcome> {
    let workers = match cfg.params.get("workers") {
        Some(v) => Some(
            v.parse::<usize>()
                .map_err(|e| Error::Config(format!("workers={v}: {e}")))?,
        ),
        None => match std::env::var(WORKERS_ENV) {
            Ok(v) => Some(
                v.parse::<usize>()
                    .map_err(|e| Error::Config(format!("{WORKERS_ENV}={v}: {e}")))?,
            ),
            Err(_) => None,
        },
    };
    match workers {
        Some(n) if n > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?
            .install(|| dispatch(cfg)),
        _ => dispatch(cfg),
    }
}

fn dispatch(cfg: &ParsedConfig) -> Result<RunOutcome> {
    match cfg.command.as_str() {
        "tiling-speed" => tiling_speed(cfg),
        "tiling-bounds" => tiling_bounds(cfg),
        "perc-speed" => perc_speed(cfg),
        "dim-bound" => dim_bound(cfg),
        "tree-speed" => tree_speed(cfg),
        "canopy" => canopy(cfg),
        "lyapunov" => lyapunov_cmd(cfg),
        "theorem-a" => theorem_a(cfg),
        "hyperbolicity-check" => hyperbolicity_check_cmd(cfg),
        other => Err(Error::Config(format!(
            "unknown subcommand `{other}`; see `help`"
        ))),
    }
}

pub const USAGE: &str = "\
usage: horodrift <subcommand> [key=value ...] [config=FILE]

subcommands:
  tiling-speed        P= Q= [n= trials= seed= stride=]   walk speed on the {P,Q} tiling
  tiling-bounds       P= Q= [p= samples=]                edge length, f-sum maximum, speed lower bounds
  perc-speed          P= Q= [p=LIST n= trials= minradius= seed=]  cluster speed vs lower bound
  dim-bound           P= Q= [n= trials= seed=]           harmonic-measure dimension bound log(Q)/speed
  tree-speed          [d= | tree=FILE] [n= trials= seed=]  tree walk speed vs electrical formula
  canopy              [lambda= n= trials= seed=]         weighted canopy tree diagnostics
  lyapunov            [law=coin|FILE n= trials= burnin= samples= seed=]  exponent, both routes
  theorem-a           target=tiling|tree|canopy + params  speed = -E[xi(x1)] cross-check
  hyperbolicity-check P= Q= [samples=]                   generator horofunction sums are negative

common keys: out=NAME (output prefix), workers=N (or env HORODRIFT_WORKERS)
writes <out>.report.json and <out>.checkpoints.csv; exit 0 ok, 1 config error,
2 bound check failed, 3 not enough Monte Carlo survivors";

/// Parses arguments, runs, prints errors to stderr, returns the exit code.
pub fn run_cli<I: IntoIterator<Item = String>>(args: I) -> i32 {
    let cfg = match parse_args(args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            eprintln!("{USAGE}");
            return EXIT_CONFIG;
        }
    };
    if cfg.command == "help" || cfg.command == "--help" || cfg.command == "-h" {
        println!("{USAGE}");
        return EXIT_OK;
    }
    match run(&cfg) {
        Ok(outcome) => outcome.exit_code,
        Err(e @ Error::InsufficientSurvivors { .. }) => {
            eprintln!("error: {e}");
            EXIT_MC_FAILED
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}

#[derive(Serialize)]
struct TilingSpeedBody {
    p: String,
    q: u32,
    edge_length: f64,
    report: DriftReport,
}

fn tiling_speed(cfg: &ParsedConfig) -> Result<RunOutcome> {
    let params = Params(&cfg.params);
    let spec = params.tiling()?;
    let walk = params.walk_params(10_000, 100)?;
    let run = estimate_speed(&spec, &walk)?;
    let report = run.report;
    let passed = report.speed_estimate
        >= report.lower_bound.unwrap_or(f64::NEG_INFINITY) - 3.0 * report.std_error
        && report.speed_estimate
            <= report.upper_bound.unwrap_or(f64::INFINITY) + 3.0 * report.std_error;
    let mut rows = Vec::new();
    for (t, tr) in run.trajectories.iter().enumerate() {
        for &(step, d) in &tr.checkpoints {
            rows.push(format!("{t},{step},{d}"));
        }
    }
    let body = TilingSpeedBody {
        p: spec.sides().to_string(),
        q: spec.valence(),
        edge_length: spec.edge_length(),
        report,
    };
    let (report_path, csv_path) = write_outputs(
        cfg,
        walk.seed,
        Some(passed),
        body,
        "trial,step,distance",
        &rows,
    )?;
    Ok(RunOutcome {
        exit_code: if passed { EXIT_OK } else { EXIT_BOUND_FAILED },
        report_path,
        csv_path,
    })
}

#[derive(Serialize)]
struct TilingBoundsBody {
    p: String,
    q: u32,
    edge_length: f64,
    two_log_q: f64,
    max_f_sum: f64,
    lower_bounds: Vec<PBound>,
    hyperbolicity: HyperbolicityReport,
}

#[derive(Serialize)]
struct PBound {
    p: f64,
    lower_bound: f64,
}

fn tiling_bounds(cfg: &ParsedConfig) -> Result<RunOutcome> {
    let params = Params(&cfg.params);
    let spec = params.tiling()?;
    let p_list = params.f64_list("p", &[0.8, 0.9, 1.0])?;
    let samples = params.u64("samples", 64)?;
    let max_f = max_f_sum(&spec, params.f64("tol", 1e-6)?)?;
    let lower_bounds = p_list
        .iter()
        .map(|&p| speed_lower_bound(&spec, p).map(|lower_bound| PBound { p, lower_bound }))
        .collect::<Result<Vec<_>>>()?;
    let hyperbolicity = hyperbolicity_scan(&spec, samples)?;
    let passed = hyperbolicity.passed;
    // angle scan of the two generator sums over one fundamental domain
    let gens = spec.generators();
    let period = std::f64::consts::TAU / spec.valence() as f64;
    let rows: Vec<String> = (0..512)
        .map(|i| {
            let angle = period * i as f64 / 512.0;
            let b = crate::tiling::busemann_sum(&gens, angle);
            let f = crate::tiling::f_sum(&gens, angle);
            format!("{angle},{b},{f}")
        })
        .collect();
    let body = TilingBoundsBody {
        p: spec.sides().to_string(),
        q: spec.valence(),
        edge_length: spec.edge_length(),
        two_log_q: 2.0 * (spec.valence() as f64).ln(),
        max_f_sum: max_f,
        lower_bounds,
        hyperbolicity,
    };
    let (report_path, csv_path) = write_outputs(
        cfg,
        params.u64("seed", 1)?,
        Some(passed),
        body,
        "angle,busemann_sum,f_sum",
        &rows,
    )?;
    Ok(RunOutcome {
        exit_code: if passed { EXIT_OK } else { EXIT_BOUND_FAILED },
        report_path,
        csv_path,
    })
}

#[derive(Serialize)]
struct PercSpeedBody {
    p_gon: String,
    q: u32,
    edge_length: f64,
    min_survival_radius: u64,
    table: BoundTable,
}

fn perc_speed(cfg: &ParsedConfig) -> Result<RunOutcome> {
    let params = Params(&cfg.params);
    let spec = params.tiling()?;
    let walk = params.walk_params(10_000, 200)?;
    let p_list = params.f64_list("p", &[0.8, 0.9, 1.0])?;
    let min_radius = params.u64("minradius", 30)?;
    // single pass: build the bound table and the checkpoint rows together,
    // trial ids offset by p block
    let mut rows = Vec::new();
    let mut table_rows = Vec::with_capacity(p_list.len());
    let mut all_passed = true;
    let mut any_mc_failure = false;
    for (block, &p) in p_list.iter().enumerate() {
        let lower = speed_lower_bound(&spec, p)?;
        match crate::percolation::estimate_speed_p(&spec, p, &walk, min_radius) {
            Ok(run) => {
                for (t, checkpoints) in &run.retained_checkpoints {
                    let global = block as u64 * walk.trials + t;
                    for &(step, d) in checkpoints {
                        rows.push(format!("{global},{step},{d}"));
                    }
                }
                let d = &run.report.drift;
                let row_passed = d.speed_estimate >= lower - 3.0 * d.std_error;
                all_passed &= row_passed;
                table_rows.push(crate::percolation::BoundRow {
                    p,
                    lower_bound: lower,
                    speed_estimate: Some(d.speed_estimate),
                    std_error: Some(d.std_error),
                    retained_fraction: Some(run.report.retained_fraction),
                    passed: Some(row_passed),
                    error: None,
                });
            }
            Err(e @ Error::InsufficientSurvivors { .. }) => {
                any_mc_failure = true;
                table_rows.push(crate::percolation::BoundRow {
                    p,
                    lower_bound: lower,
                    speed_estimate: None,
                    std_error: None,
                    retained_fraction: None,
                    passed: None,
                    error: Some(e.to_string()),
                });
            }
            Err(e) => return Err(e),
        }
    }
    let table = BoundTable {
        rows: table_rows,
        all_passed,
        any_mc_failure,
    };
    let passed = table.all_passed;
    let mc_failed = table.any_mc_failure;
    let body = PercSpeedBody {
        p_gon: spec.sides().to_string(),
        q: spec.valence(),
        edge_length: spec.edge_length(),
        min_survival_radius: min_radius,
        table,
    };
    let (report_path, csv_path) = write_outputs(
        cfg,
        walk.seed,
        Some(passed),
        body,
        "trial,step,distance",
        &rows,
    )?;
    let exit_code = if !passed {
        EXIT_BOUND_FAILED
    } else if mc_failed {
        EXIT_MC_FAILED
    } else {
        EXIT_OK
    };
    Ok(RunOutcome {
        exit_code,
        report_path,
        csv_path,
    })
}

#[derive(Serialize)]
struct DimBoundBody {
    p: String,
    q: u32,
    speed: f64,
    std_error: f64,
    entropy_bound: f64,
    dim_upper_bound: f64,
}

fn dim_bound(cfg: &ParsedConfig) -> Result<RunOutcome> {
    let params = Params(&cfg.params);
    let spec = params.tiling()?;
    let walk = params.walk_params(10_000, 100)?;
    let run = estimate_speed(&spec, &walk)?;
    let dim = dim_upper_bound(&spec, run.report.speed_estimate)?;
    let mut rows = Vec::new();
    for (t, tr) in run.trajectories.iter().enumerate() {
        for &(step, d) in &tr.checkpoints {
            rows.push(format!("{t},{step},{d}"));
        }
    }
    let body = DimBoundBody {
        p: spec.sides().to_string(),
        q: spec.valence(),
        speed: run.report.speed_estimate,
        std_error: run.report.std_error,
        entropy_bound: (spec.valence() as f64).ln(),
        dim_upper_bound: dim,
    };
    let (report_path, csv_path) =
        write_outputs(cfg, walk.seed, None, body, "trial,step,distance", &rows)?;
    Ok(RunOutcome {
        exit_code: EXIT_OK,
        report_path,
        csv_path,
    })
}

#[derive(Serialize)]
struct TreeSpeedBody {
    kind: String,
    n_steps: u64,
    trials: u64,
    speed: f64,
    std_error: f64,
    formula_interval: Option<[f64; 2]>,
    formula_point: Option<f64>,
}

fn tree_speed(cfg: &ParsedConfig) -> Result<RunOutcome> {
    let params = Params(&cfg.params);
    let (tree, kind) = match cfg.params.get("tree") {
        Some(path) => (
            WeightedTree::finite(FiniteTree::from_file(Path::new(path))?),
            format!("file:{path}"),
        ),
        None => {
            let d = params.u64("d", 3)? as u32;
            (WeightedTree::regular(d)?, format!("regular-{d}"))
        }
    };
    let n = params.u64("n", 100_000)?;
    let trials = params.u64("trials", 50)?;
    let seed = params.u64("seed", 1)?;
    let stride = params.u64("stride", 64)?;

    let mut speeds = Vec::new();
    let mut rows = Vec::new();
    for t in 0..trials {
        let run = simulate_tree_walk(&tree, n, stride, seed.wrapping_add(t))?;
        speeds.push(run.final_distance as f64 / n as f64);
        for &(step, d) in &run.checkpoints {
            rows.push(format!("{t},{step},{d}"));
        }
    }
    let est = crate::drift::Estimate::from_samples(&speeds);

    // electrical route for the regular tree: wired truncation converges to
    // the true branch conductance, the free side of an infinite tree is zero
    let (formula_interval, formula_point, passed) = match tree.kind() {
        TreeKind::Regular { .. } => {
            let root = tree.root();
            let child = tree.neighbors(&root)[0].0.clone();
            let side = conductance_bounds_at_depth(&tree, &root, Some((&root, &child)), 96)?;
            let split = EdgeSplit::new(side, 1.0, side)?;
            let interval = speed_formula(&split)?;
            let point_split = EdgeSplit::new(
                ConductanceInterval::exact(side.upper),
                1.0,
                ConductanceInterval::exact(side.upper),
            )?;
            let point = speed_formula(&point_split)?.upper;
            let ok = (est.value - point).abs() <= 3.0 * est.std_error + 0.01;
            (
                Some([interval.lower, interval.upper]),
                Some(point),
                Some(ok),
            )
        }
        _ => (None, None, None),
    };

    let body = TreeSpeedBody {
        kind,
        n_steps: n,
        trials,
        speed: est.value,
        std_error: est.std_error,
        formula_interval,
        formula_point,
    };
    let (report_path, csv_path) =
        write_outputs(cfg, seed, passed, body, "trial,step,distance", &rows)?;
    Ok(RunOutcome {
        exit_code: match passed {
            Some(false) => EXIT_BOUND_FAILED,
            _ => EXIT_OK,
        },
        report_path,
        csv_path,
    })
}

#[derive(Serialize)]
struct CanopyBody {
    lambda: f64,
    n_steps: u64,
    trials: u64,
    speed: f64,
    speed_std_error: f64,
    up_frequency: f64,
    up_frequency_expected: f64,
    level_distribution_head: Vec<f64>,
    empirical_level_tv: f64,
    speed_small: bool,
    up_frequency_consistent: bool,
}

fn canopy(cfg: &ParsedConfig) -> Result<RunOutcome> {
    let params = Params(&cfg.params);
    let lambda = params.f64("lambda", 1.5)?;
    let n = params.u64("n", 100_000)?;
    let trials = params.u64("trials", 8)?;
    let seed = params.u64("seed", 1)?;
    let stride = params.u64("stride", 64)?;
    let tree = WeightedTree::canopy(lambda)?;
    let levels = canopy_stationary_levels(lambda, 16, params.f64("tol", 1e-8)?)?;

    let mut speeds = Vec::new();
    let mut up_moves = 0u64;
    let mut positive_moves = 0u64;
    let mut level_counts: Vec<f64> = Vec::new();
    let mut level_total = 0f64;
    let mut rows = Vec::new();
    for t in 0..trials {
        let run = simulate_tree_walk(&tree, n, stride, seed.wrapping_add(t))?;
        speeds.push(run.final_distance as f64 / n as f64);
        up_moves += run.up_moves_from_positive;
        positive_moves += run.moves_from_positive;
        let levels_at = run.levels.as_ref().expect("canopy walks record levels");
        for (&(step, d), &(_, l)) in run.checkpoints.iter().zip(levels_at) {
            rows.push(format!("{t},{step},{d},{l}"));
            if level_counts.len() <= l as usize {
                level_counts.resize(l as usize + 1, 0.0);
            }
            level_counts[l as usize] += 1.0;
            level_total += 1.0;
        }
    }
    let est = crate::drift::Estimate::from_samples(&speeds);
    let up_frequency = up_moves as f64 / positive_moves.max(1) as f64;
    let expected = lambda / (2.0 + lambda);
    let se_up = (expected * (1.0 - expected) / positive_moves.max(1) as f64).sqrt();

    let mut tv = 0.0;
    for k in 0..level_counts.len().max(levels.len()) {
        let emp = level_counts.get(k).copied().unwrap_or(0.0) / level_total.max(1.0);
        let sol = levels.get(k).copied().unwrap_or(0.0);
        tv += 0.5 * (emp - sol).abs();
    }

    let speed_small = est.value <= 0.02;
    let up_ok = (up_frequency - expected).abs() <= 3.0 * se_up + 1e-3;
    let passed = speed_small && up_ok;
    let body = CanopyBody {
        lambda,
        n_steps: n,
        trials,
        speed: est.value,
        speed_std_error: est.std_error,
        up_frequency,
        up_frequency_expected: expected,
        level_distribution_head: levels.iter().take(12).copied().collect(),
        empirical_level_tv: tv,
        speed_small,
        up_frequency_consistent: up_ok,
    };
    let (report_path, csv_path) = write_outputs(
        cfg,
        seed,
        Some(passed),
        body,
        "trial,step,distance,level",
        &rows,
    )?;
    Ok(RunOutcome {
        exit_code: if passed { EXIT_OK } else { EXIT_BOUND_FAILED },
        report_path,
        csv_path,
    })
}

#[derive(Serialize)]
struct LyapunovBody {
    law: String,
    n_steps: u64,
    trials: u64,
    chi_direct: f64,
    chi_direct_std_error: f64,
    chi_formula: f64,
    chi_formula_std_error: f64,
    symmetric_drift: f64,
    symmetric_drift_std_error: f64,
    agreement_ok: bool,
    drift_identity_ok: bool,
    non_proximal_warning: bool,
}

fn lyapunov_cmd(cfg: &ParsedConfig) -> Result<RunOutcome> {
    let params = Params(&cfg.params);
    let law_name = params.string("law", "coin");
    let law = if law_name == "coin" {
        MatrixLaw::coin()
    } else {
        MatrixLaw::from_file(Path::new(&law_name))?
    };
    let n = params.u64("n", 10_000)?;
    let trials = params.u64("trials", 100)?;
    let seed = params.u64("seed", 1)?;
    let burn_in = params.u64("burnin", 1000)?;
    let samples = params.u64("samples", 10_000)?;

    let run = lyap_direct(&law, n, trials, seed)?;
    let directions = stationary_direction(&law, burn_in, samples, seed)?;
    let formula = furstenberg_formula(&law, &directions)?;

    let joint = (run.direct.std_error.powi(2) + formula.std_error.powi(2)).sqrt();
    let agreement_ok = (run.direct.value - formula.value).abs() <= 3.0 * joint + 1e-9;
    let drift_identity_ok = (std::f64::consts::SQRT_2 * run.direct.value
        - run.symmetric_drift.value)
        .abs()
        <= 3.0 * (run.direct.std_error + run.symmetric_drift.std_error) + 1e-9;
    let passed = agreement_ok && drift_identity_ok;

    let rows: Vec<String> = directions
        .angles
        .iter()
        .enumerate()
        .map(|(i, a)| format!("{i},{a}"))
        .collect();
    let body = LyapunovBody {
        law: law_name,
        n_steps: n,
        trials,
        chi_direct: run.direct.value,
        chi_direct_std_error: run.direct.std_error,
        chi_formula: formula.value,
        chi_formula_std_error: formula.std_error,
        symmetric_drift: run.symmetric_drift.value,
        symmetric_drift_std_error: run.symmetric_drift.std_error,
        agreement_ok,
        drift_identity_ok,
        non_proximal_warning: directions.non_proximal_warning,
    };
    let (report_path, csv_path) =
        write_outputs(cfg, seed, Some(passed), body, "index,angle", &rows)?;
    Ok(RunOutcome {
        exit_code: if passed { EXIT_OK } else { EXIT_BOUND_FAILED },
        report_path,
        csv_path,
    })
}

#[derive(Serialize)]
#[serde(untagged)]
enum TheoremABody {
    Tiling {
        target: String,
        report: TheoremAReport,
        escaped: bool,
    },
    Tree {
        target: String,
        report: TreeTheoremAReport,
        escaped: bool,
    },
}

fn theorem_a(cfg: &ParsedConfig) -> Result<RunOutcome> {
    let params = Params(&cfg.params);
    let target = params.string("target", "tiling");
    let seed = params.u64("seed", 1)?;
    match target.as_str() {
        "tiling" => {
            let spec = params.tiling()?;
            let walk = params.walk_params(10_000, 1000)?;
            let run = theorem_a_check(&spec, &walk)?;
            let escape = crate::drift::escape_diagnostic(
                &run.backward_distances,
                &crate::drift::DEFAULT_ESCAPE_RADII,
            )?;
            let rows: Vec<String> = run
                .forward_checkpoints
                .iter()
                .map(|&(step, d, xi)| format!("0,{step},{d},{xi}"))
                .collect();
            let passed = run.report.passed && escape.escaped;
            let body = TheoremABody::Tiling {
                target,
                report: run.report,
                escaped: escape.escaped,
            };
            let (report_path, csv_path) = write_outputs(
                cfg,
                walk.seed,
                Some(passed),
                body,
                "trial,step,distance,xi",
                &rows,
            )?;
            Ok(RunOutcome {
                exit_code: if passed { EXIT_OK } else { EXIT_BOUND_FAILED },
                report_path,
                csv_path,
            })
        }
        "tree" | "canopy" => {
            let tree = if target == "tree" {
                WeightedTree::regular(params.u64("d", 3)? as u32)?
            } else {
                WeightedTree::canopy(params.f64("lambda", 1.5)?)?
            };
            let n = params.u64("n", 10_000)?;
            let trials = params.u64("trials", 1000)?;
            let run = tree_theorem_a_check(&tree, n, trials, seed)?;
            let escape = crate::drift::escape_diagnostic(
                &run.backward_distances,
                &crate::drift::DEFAULT_ESCAPE_RADII,
            )?;
            // cumulative xi along the lead trial
            let mut rows = Vec::new();
            let mut xi = 0.0;
            for (i, v) in run.increments.values.iter().enumerate() {
                xi -= v; // increments are xi(x_k) - xi(x_{k+1})
                let step = i as u64 + 1;
                if step % 64 == 0 || step == run.increments.values.len() as u64 {
                    rows.push(format!("0,{step},{xi}"));
                }
            }
            // canopy walks escape too slowly for the radius ladder; the
            // escape flag gates the transient regular tree only
            let passed = run.report.passed && (target == "canopy" || escape.escaped);
            let body = TheoremABody::Tree {
                target,
                report: run.report,
                escaped: escape.escaped,
            };
            let (report_path, csv_path) =
                write_outputs(cfg, seed, Some(passed), body, "trial,step,xi", &rows)?;
            Ok(RunOutcome {
                exit_code: if passed { EXIT_OK } else { EXIT_BOUND_FAILED },
                report_path,
                csv_path,
            })
        }
        other => Err(Error::Config(format!(
            "target={other}: expected tiling, tree, or canopy"
        ))),
    }
}

fn hyperbolicity_check_cmd(cfg: &ParsedConfig) -> Result<RunOutcome> {
    let params = Params(&cfg.params);
    let spec = params.tiling()?;
    let samples = params.u64("samples", 64)?;
    let report = hyperbolicity_scan(&spec, samples)?;
    let passed = report.passed;
    let gens = spec.generators();
    let period = std::f64::consts::TAU / spec.valence() as f64;
    let rows: Vec<String> = (0..512)
        .map(|i| {
            let angle = period * i as f64 / 512.0;
            format!("{angle},{}", crate::tiling::busemann_sum(&gens, angle))
        })
        .collect();
    let (report_path, csv_path) = write_outputs(
        cfg,
        params.u64("seed", 1)?,
        Some(passed),
        report,
        "angle,busemann_sum",
        &rows,
    )?;
    Ok(RunOutcome {
        exit_code: if passed { EXIT_OK } else { EXIT_BOUND_FAILED },
        report_path,
        csv_path,
    })
}
