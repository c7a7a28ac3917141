//! `riskbench`: excess-risk experiments and invariant probes for center and
//! subspace clustering.

mod config;
mod manifest;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use riskbench_core::complexity::{paired_complexity, random_rank_j_pool};
use riskbench_core::fit::{fit_points_from_rows, fit_power_law, FitOptions};
use riskbench_core::hard::{hard_scaling_experiment, EpsSchedule};
use riskbench_core::harness::{run_experiment, ExperimentConfig};
use riskbench_core::ingest::{fetch, DataFormat, HttpTransport, LabelColumn};
use riskbench_core::objectives::{Objective, PointSet};
use riskbench_core::reduction::{random_in_ball, reduction_sweep};
use riskbench_core::rng::{stream_id, SeededRng};
use riskbench_core::selftest::run_selftest;
use riskbench_core::solvers::EmptyClusterPolicy;
use riskbench_core::table::{read_risk_csv, write_risk_csv};

use config::{parse_f64_list, parse_usize_grid, usage, ConfigFile, UsageError};
use manifest::RunManifest;

#[derive(Parser, Debug)]
#[command(
    name = "riskbench",
    version,
    about = "Generalisation-risk laboratory for clustering"
)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Append-only JSON-lines run log.
    #[arg(
        long,
        global = true,
        env = "RISKBENCH_MANIFEST",
        default_value = "riskbench-manifest.jsonl"
    )]
    manifest: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Excess-risk experiment on a dataset (config file plus overrides).
    Run(Box<RunArgs>),
    /// Excess risk of the lower-bound instance over a grid of sample sizes.
    Hard(HardArgs),
    /// Fit c·k^q1/n^q2 to the mean excess of a risk CSV.
    Fit(FitArgs),
    /// Audit the adaptive projection on random instances (JSON lines).
    Reduce(ReduceArgs),
    /// Rademacher and Gaussian complexity of random rank-j pools.
    Complexity(ComplexityArgs),
    /// Download a file and verify its SHA-256.
    Fetch(FetchArgs),
    /// Quick invariant sweep over every module.
    Selftest(SeedArg),
}

#[derive(Args, Debug)]
struct SeedArg {
    /// Defaults to $RISKBENCH_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// `key = value` file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// File path, or `mixture:N:D:C:SIGMA` for a synthetic set.
    #[arg(long)]
    dataset: Option<String>,
    /// csv or libsvm (default: from the extension).
    #[arg(long)]
    format: Option<String>,
    /// `last` if the final CSV column holds labels.
    #[arg(long)]
    label_col: Option<String>,
    /// center or subspace.
    #[arg(long)]
    objective: Option<String>,
    #[arg(long)]
    z: Option<u32>,
    #[arg(long)]
    j: Option<usize>,
    #[arg(long)]
    k_grid: Option<String>,
    #[arg(long)]
    n_grid: Option<String>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    opt_restarts: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    with_replacement: bool,
    #[arg(long)]
    pool_trained_into_opt: bool,
    #[arg(long)]
    max_em_iters: Option<usize>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    gd_learning_rate: Option<f64>,
    #[arg(long)]
    gd_iters: Option<usize>,
    #[arg(long)]
    gd_patience: Option<usize>,
    #[arg(long)]
    gd_weight_decay: Option<f64>,
    /// Largest input that gets single-point moves after subspace EM (0 = off).
    #[arg(long)]
    refine_max_points: Option<usize>,
    /// reseed_farthest or drop.
    #[arg(long)]
    empty_cluster_policy: Option<String>,
}

#[derive(Args, Debug)]
struct HardArgs {
    #[arg(long)]
    k: usize,
    #[arg(long)]
    j: usize,
    /// Comma-separated list used at every n.
    #[arg(long, conflicts_with = "eps_scale")]
    eps: Option<String>,
    /// Use eps = C·sqrt(kj/n) at each n instead of a fixed list.
    #[arg(long)]
    eps_scale: Option<f64>,
    #[arg(long)]
    n_grid: String,
    #[arg(long, default_value_t = 200)]
    repeats: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long)]
    csv: PathBuf,
    /// Hold q1 fixed; defaults to 0 when the CSV has a single k.
    #[arg(long)]
    q1_fixed: Option<f64>,
    /// Also write the JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReduceArgs {
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// JSON-lines report (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ComplexityArgs {
    #[arg(long, default_value = "64,256,1024")]
    n_grid: String,
    #[arg(long, default_value = "1,2,4")]
    j_grid: String,
    #[arg(long, default_value_t = 8)]
    d: usize,
    #[arg(long, default_value_t = 100)]
    pool_size: usize,
    #[arg(long, default_value_t = 500)]
    trials: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV report (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FetchArgs {
    #[arg(long)]
    url: String,
    #[arg(long)]
    sha256: String,
    #[arg(long)]
    dest: PathBuf,
}

/// What a subcommand reports back for the manifest.
#[derive(Default)]
struct Outcome {
    seed: Option<u64>,
    config: Option<PathBuf>,
    outputs: Vec<PathBuf>,
    /// A checked invariant failed.
    violation: bool,
}

fn resolve_seed(flag: Option<u64>, file: Option<u64>) -> anyhow::Result<u64> {
    if let Some(s) = flag.or(file) {
        return Ok(s);
    }
    match std::env::var("RISKBENCH_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| usage(format!("RISKBENCH_SEED={v:?} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

fn parse_format(s: &str) -> anyhow::Result<DataFormat> {
    match s.to_ascii_lowercase().as_str() {
        "csv" => Ok(DataFormat::Csv),
        "libsvm" => Ok(DataFormat::Libsvm),
        _ => Err(usage(format!("unknown format {s:?} (csv or libsvm)"))),
    }
}

fn parse_label_col(s: &str) -> anyhow::Result<LabelColumn> {
    match s.to_ascii_lowercase().as_str() {
        "last" => Ok(LabelColumn::Last),
        "none" => Ok(LabelColumn::None),
        _ => Err(usage(format!("unknown label column {s:?} (last or none)"))),
    }
}

fn parse_policy(s: &str) -> anyhow::Result<EmptyClusterPolicy> {
    match s.to_ascii_lowercase().as_str() {
        "reseed_farthest" => Ok(EmptyClusterPolicy::ReseedFarthest),
        "drop" => Ok(EmptyClusterPolicy::Drop),
        _ => Err(usage(format!("unknown empty-cluster policy {s:?}"))),
    }
}

fn parse_bool(key: &str, s: &str) -> anyhow::Result<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(usage(format!(
            "config key {key}: expected true or false, got {s:?}"
        ))),
    }
}

const RUN_KEYS: &[&str] = &[
    "dataset",
    "format",
    "label_col",
    "objective",
    "z",
    "j",
    "k_grid",
    "n_grid",
    "repeats",
    "opt_restarts",
    "seed",
    "out",
    "with_replacement",
    "pool_trained_into_opt",
    "max_em_iters",
    "rel_tol",
    "gd_learning_rate",
    "gd_iters",
    "gd_patience",
    "gd_weight_decay",
    "refine_max_points",
    "empty_cluster_policy",
];

fn build_run_config(args: &RunArgs) -> anyhow::Result<(ExperimentConfig, PathBuf)> {
    let file = match &args.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    if let Some(k) = file.keys().find(|k| !RUN_KEYS.contains(k)) {
        return Err(usage(format!(
            "unknown config key {k:?}; known keys: {}",
            RUN_KEYS.join(", ")
        )));
    }
    let text = |flag: &Option<String>, key: &str| {
        flag.clone().or_else(|| file.get(key).map(str::to_string))
    };

    let dataset = text(&args.dataset, "dataset").ok_or_else(|| usage("missing dataset"))?;
    let k_grid =
        parse_usize_grid(&text(&args.k_grid, "k_grid").ok_or_else(|| usage("missing k_grid"))?)?;
    let n_grid =
        parse_usize_grid(&text(&args.n_grid, "n_grid").ok_or_else(|| usage("missing n_grid"))?)?;
    let out = args
        .out
        .clone()
        .or_else(|| file.get("out").map(PathBuf::from))
        .ok_or_else(|| usage("missing out"))?;

    let z = args
        .z
        .map_or_else(|| file.parsed("z"), |v| Ok(Some(v)))?
        .unwrap_or(2);
    let j = args
        .j
        .map_or_else(|| file.parsed("j"), |v| Ok(Some(v)))?
        .unwrap_or(1);
    let objective = match text(&args.objective, "objective")
        .as_deref()
        .unwrap_or("center")
    {
        "center" => Objective::Center { z },
        "subspace" => Objective::Subspace { j, z },
        other => {
            return Err(usage(format!(
                "unknown objective {other:?} (center or subspace)"
            )))
        }
    };

    let mut cfg = ExperimentConfig::new(dataset, objective, k_grid, n_grid);
    cfg.seed = resolve_seed(args.seed, file.parsed("seed")?)?;
    if let Some(f) = text(&args.format, "format") {
        cfg.data_format = Some(parse_format(&f)?);
    }
    if let Some(l) = text(&args.label_col, "label_col") {
        cfg.label_col = parse_label_col(&l)?;
    }
    macro_rules! number {
        ($field:expr, $flag:expr, $key:literal) => {
            if let Some(v) = $flag.map_or_else(|| file.parsed($key), |v| Ok(Some(v)))? {
                $field = v;
            }
        };
    }
    number!(cfg.repeats, args.repeats, "repeats");
    number!(cfg.opt_restarts, args.opt_restarts, "opt_restarts");
    number!(cfg.solver.max_em_iters, args.max_em_iters, "max_em_iters");
    number!(cfg.solver.rel_tol, args.rel_tol, "rel_tol");
    number!(
        cfg.solver.gd_learning_rate,
        args.gd_learning_rate,
        "gd_learning_rate"
    );
    number!(cfg.solver.gd_iters, args.gd_iters, "gd_iters");
    number!(cfg.solver.gd_patience, args.gd_patience, "gd_patience");
    number!(
        cfg.solver.gd_weight_decay,
        args.gd_weight_decay,
        "gd_weight_decay"
    );
    number!(
        cfg.solver.refine_max_points,
        args.refine_max_points,
        "refine_max_points"
    );
    if let Some(p) = text(&args.empty_cluster_policy, "empty_cluster_policy") {
        cfg.solver.empty_cluster_policy = parse_policy(&p)?;
    }
    cfg.with_replacement = args.with_replacement
        || file
            .get("with_replacement")
            .map(|v| parse_bool("with_replacement", v))
            .transpose()?
            .unwrap_or(false);
    cfg.pool_trained_into_opt = args.pool_trained_into_opt
        || file
            .get("pool_trained_into_opt")
            .map(|v| parse_bool("pool_trained_into_opt", v))
            .transpose()?
            .unwrap_or(false);
    Ok((cfg, out))
}

fn cmd_run(args: &RunArgs) -> anyhow::Result<Outcome> {
    let (cfg, out) = build_run_config(args)?;
    let result = run_experiment(&cfg, &out)?;
    eprintln!(
        "wrote {} rows to {} (metadata {})",
        result.rows.len(),
        out.display(),
        result.meta_path.display()
    );
    Ok(Outcome {
        seed: Some(cfg.seed),
        config: args.config.clone(),
        outputs: vec![out, result.meta_path],
        violation: false,
    })
}

fn cmd_hard(args: &HardArgs) -> anyhow::Result<Outcome> {
    let seed = resolve_seed(args.seed, None)?;
    let schedule = match (&args.eps, args.eps_scale) {
        (Some(list), None) => EpsSchedule::Fixed(parse_f64_list(list)?),
        (None, Some(c)) => EpsSchedule::Scaled { c },
        _ => return Err(usage("give exactly one of --eps and --eps-scale")),
    };
    let n_grid = parse_usize_grid(&args.n_grid)?;
    let runs = hard_scaling_experiment(args.k, args.j, &schedule, &n_grid, args.repeats, seed)?;
    let violation = runs
        .iter()
        .any(|r| (r.excess - r.predicted_excess()).abs() > 1e-12);
    let rows: Vec<_> = runs.iter().map(|r| r.to_risk_row()).collect();
    write_risk_csv(&args.out, &rows)?;
    eprintln!("wrote {} rows to {}", rows.len(), args.out.display());
    if violation {
        eprintln!("excess accounting identity violated");
    }
    Ok(Outcome {
        seed: Some(seed),
        outputs: vec![args.out.clone()],
        violation,
        ..Outcome::default()
    })
}

#[derive(Serialize)]
struct FitReport {
    c: f64,
    q1: f64,
    q2: f64,
    lse: f64,
    rows: usize,
    iterations: usize,
    q1_fixed: bool,
}

fn cmd_fit(args: &FitArgs) -> anyhow::Result<Outcome> {
    let rows = read_risk_csv(&args.csv)?;
    let points = fit_points_from_rows(&rows);
    let single_k = points.windows(2).all(|w| w[0].k == w[1].k);
    let opts = FitOptions {
        q1_fixed: args.q1_fixed.or(single_k.then_some(0.0)),
        ..FitOptions::default()
    };
    let f = fit_power_law(&points, &opts).map_err(|e| usage(e.to_string()))?;
    let report = FitReport {
        c: f.c,
        q1: f.q1,
        q2: f.q2,
        lse: f.lse,
        rows: f.rows,
        iterations: f.iterations,
        q1_fixed: f.q1_fixed,
    };
    let json = serde_json::to_string_pretty(&report)? + "\n";
    print!("{json}");
    let mut outputs = Vec::new();
    if let Some(out) = &args.out {
        fs::write(out, &json).with_context(|| format!("writing {}", out.display()))?;
        outputs.push(out.clone());
    }
    Ok(Outcome {
        outputs,
        ..Outcome::default()
    })
}

fn write_or_print(out: Option<&Path>, text: &str) -> anyhow::Result<Vec<PathBuf>> {
    match out {
        Some(p) => {
            fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
            Ok(vec![p.to_path_buf()])
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(Vec::new())
        }
    }
}

fn cmd_reduce(args: &ReduceArgs) -> anyhow::Result<Outcome> {
    let seed = resolve_seed(args.seed, None)?;
    let trials = reduction_sweep(args.trials, seed)?;
    let mut text = String::new();
    for t in &trials {
        text.push_str(&serde_json::to_string(t)?);
        text.push('\n');
    }
    let failed = trials.iter().filter(|t| !t.passed).count();
    eprintln!("{} trials, {failed} failed", trials.len());
    Ok(Outcome {
        seed: Some(seed),
        outputs: write_or_print(args.out.as_deref(), &text)?,
        violation: failed > 0,
        ..Outcome::default()
    })
}

fn cmd_complexity(args: &ComplexityArgs) -> anyhow::Result<Outcome> {
    let seed = resolve_seed(args.seed, None)?;
    let n_grid = parse_usize_grid(&args.n_grid)?;
    let j_grid = parse_usize_grid(&args.j_grid)?;
    if let Some(&j) = j_grid.iter().find(|&&j| j > args.d) {
        return Err(usage(format!("j={j} exceeds d={}", args.d)));
    }
    let mut text = String::from("n,j,kind,estimate,stderr,bound\n");
    let mut violation = false;
    for &n in &n_grid {
        for &j in &j_grid {
            let mut rng = SeededRng::new(seed, stream_id(&[n as u64, j as u64]));
            let rows: Vec<Vec<f64>> = (0..n).map(|_| random_in_ball(args.d, &mut rng)).collect();
            let points = PointSet::from_rows("complexity", &rows)?;
            let pool = random_rank_j_pool(&points, j, args.pool_size, &mut rng)?;
            let est = paired_complexity(&pool, args.trials, &mut rng)?;
            let bound = (j as f64 / n as f64).sqrt();
            let rad_ok = est.rademacher.value <= bound + 3.0 * est.rademacher.stderr;
            let pair_ok = est.comparison_holds(5.0);
            if !(rad_ok && pair_ok) {
                eprintln!(
                    "n={n} j={j}: rank-j bound ok={rad_ok}, rademacher-vs-gaussian ok={pair_ok}"
                );
            }
            violation |= !(rad_ok && pair_ok);
            text.push_str(&format!(
                "{n},{j},rademacher,{},{},{bound}\n",
                est.rademacher.value, est.rademacher.stderr
            ));
            // no standalone upper bound is checked for the Gaussian estimate
            text.push_str(&format!(
                "{n},{j},gaussian,{},{},\n",
                est.gaussian.value, est.gaussian.stderr
            ));
        }
    }
    Ok(Outcome {
        seed: Some(seed),
        outputs: write_or_print(args.out.as_deref(), &text)?,
        violation,
        ..Outcome::default()
    })
}

fn cmd_fetch(args: &FetchArgs) -> anyhow::Result<Outcome> {
    let path = fetch(&args.url, &args.sha256, &args.dest, &HttpTransport)?;
    eprintln!("{} verified", path.display());
    Ok(Outcome {
        outputs: vec![path],
        ..Outcome::default()
    })
}

fn cmd_selftest(args: &SeedArg) -> anyhow::Result<Outcome> {
    let seed = resolve_seed(args.seed, None)?;
    let report = run_selftest(seed)?;
    for c in &report.checks {
        println!(
            "{:<11} {:<26} {} ({} trials, {} failures, detail {:.3e})",
            c.module,
            c.check,
            if c.passed() { "ok" } else { "FAILED" },
            c.trials,
            c.failures,
            c.detail
        );
    }
    Ok(Outcome {
        seed: Some(seed),
        violation: !report.passed(),
        ..Outcome::default()
    })
}

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::Run(_) => "run",
        Command::Hard(_) => "hard",
        Command::Fit(_) => "fit",
        Command::Reduce(_) => "reduce",
        Command::Complexity(_) => "complexity",
        Command::Fetch(_) => "fetch",
        Command::Selftest(_) => "selftest",
    }
}

fn is_usage(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<UsageError>().is_some()
            || matches!(
                c.downcast_ref::<riskbench_core::Error>(),
                Some(
                    riskbench_core::Error::Config(_)
                        | riskbench_core::Error::SampleTooLarge { .. }
                        | riskbench_core::Error::InvalidK { .. }
                )
            )
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started_at = manifest::now();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
        {
            eprintln!("error: cannot size the worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Hard(a) => cmd_hard(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Reduce(a) => cmd_reduce(a),
        Command::Complexity(a) => cmd_complexity(a),
        Command::Fetch(a) => cmd_fetch(a),
        Command::Selftest(a) => cmd_selftest(a),
    };
    let (code, outcome) = match result {
        Ok(o) if o.violation => (1, o),
        Ok(o) => (0, o),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = if is_usage(&e) { 2 } else { 1 };
            if code == 2 {
                eprintln!(
                    "run `riskbench {} --help` for usage",
                    subcommand_name(&cli.command)
                );
            }
            (code, Outcome::default())
        }
    };
    let record = RunManifest {
        subcommand: subcommand_name(&cli.command).to_string(),
        argv: std::env::args().collect(),
        config: outcome.config,
        seed: outcome.seed,
        outputs: outcome.outputs,
        tool_version: env!("CARGO_PKG_VERSION"),
        started_at,
        finished_at: manifest::now(),
        exit_code: code,
    };
    if let Err(e) = manifest::append(&cli.manifest, &record) {
        eprintln!(
            "warning: cannot append to manifest {}: {e}",
            cli.manifest.display()
        );
    }
    ExitCode::from(code as u8)
}
