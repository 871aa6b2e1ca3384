//! Batch front end: parses a JSON run config, fans it out across seeds,
//! and writes per-seed CSV traces plus an aggregated JSON summary. Exit
//! codes: 0 success, 2 config validation failure, 3 invariant violations
//! above the configured threshold.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use hierlearn::harness::{run_seeds, Algorithm, RunConfig};
use hierlearn::trace::{aggregate, RegretTrace};

#[derive(Parser)]
#[command(name = "hierlearn", version, about = "Hierarchical bandit/MDP experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Two-agent hierarchical bandit runs (config algorithm: hier-bandit).
    RunBandit(RunArgs),
    /// Two-agent hierarchical MDP runs (config algorithm: hier-mdp).
    RunMdp(RunArgs),
    /// Multi-follower bandit runs (config algorithm: multi-follower).
    RunMulti(RunArgs),
    /// Deep-hierarchy bandit runs (config algorithm: deep).
    RunDeep(RunArgs),
    /// Centralized baseline runs (config algorithm: ci-bandit or ci-mdp).
    RunBaseline(RunArgs),
    /// Cartesian parameter sweep over a base config.
    Sweep(RunArgs),
    /// MDP run with optimism/dominance checks against the exact oracle.
    CheckInvariants(CheckArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to the JSON run config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing; reruns overwrite identically).
    #[arg(long)]
    out: PathBuf,
    /// Seed list: comma-separated integers and inclusive ranges, e.g. 1..20.
    #[arg(long)]
    seeds: String,
    /// Maximum number of concurrently running seeds.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Largest acceptable violation fraction for either invariant.
    #[arg(long, default_value_t = 0.0)]
    max_violation_fraction: f64,
}

enum CliError {
    /// Bad configuration or flags: exit 2.
    Config(String),
    /// Invariant violations above threshold: exit 3.
    Violations(String),
    /// IO or internal failure: exit 1.
    Runtime(String),
}

impl From<hierlearn::Error> for CliError {
    fn from(e: hierlearn::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::RunBandit(args) => run_command(args, &[Algorithm::HierBandit]),
        Command::RunMdp(args) => run_command(args, &[Algorithm::HierMdp]),
        Command::RunMulti(args) => run_command(args, &[Algorithm::MultiFollower]),
        Command::RunDeep(args) => run_command(args, &[Algorithm::Deep]),
        Command::RunBaseline(args) => {
            run_command(args, &[Algorithm::CiBandit, Algorithm::CiMdp])
        }
        Command::Sweep(args) => sweep_command(args),
        Command::CheckInvariants(args) => check_invariants_command(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Violations(msg)) => {
            eprintln!("invariant check failed: {msg}");
            ExitCode::from(3)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn parse_seeds(list: &str) -> Result<Vec<u64>, CliError> {
    let mut seeds = Vec::new();
    for token in list.split(',') {
        let token = token.trim();
        if token.is_empty() {
            continue;
        }
        if let Some((lo, hi)) = token.split_once("..") {
            let lo: u64 = lo
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("bad seed range `{token}`")))?;
            let hi: u64 = hi
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("bad seed range `{token}`")))?;
            if hi < lo {
                return Err(CliError::Config(format!("empty seed range `{token}`")));
            }
            seeds.extend(lo..=hi);
        } else {
            let seed: u64 = token
                .parse()
                .map_err(|_| CliError::Config(format!("bad seed `{token}`")))?;
            seeds.push(seed);
        }
    }
    if seeds.is_empty() {
        return Err(CliError::Config("seed list must be nonempty".into()));
    }
    Ok(seeds)
}

fn load_config(path: &Path, allowed: &[Algorithm]) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let config = RunConfig::from_json_str(&text)?;
    if !allowed.contains(&config.algorithm) {
        let names: Vec<&str> = allowed.iter().map(|a| a.name()).collect();
        return Err(CliError::Config(format!(
            "this subcommand runs algorithms {names:?}, config says `{}`",
            config.algorithm.name()
        )));
    }
    Ok(config)
}

fn write_outputs(
    out: &Path,
    traces: &[RegretTrace],
    extra: Option<(&str, &Value)>,
) -> Result<(), CliError> {
    fs::create_dir_all(out)?;
    for trace in traces {
        fs::write(
            out.join(format!("trace_seed{}.csv", trace.seed)),
            trace.to_csv(),
        )?;
        if !trace.snapshots.is_empty() {
            let doc = serde_json::to_string_pretty(&trace.snapshots)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            fs::write(
                out.join(format!("snapshots_seed{}.json", trace.seed)),
                doc + "\n",
            )?;
        }
    }
    let summary = aggregate(traces)?;
    let doc = serde_json::to_string_pretty(&summary)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::write(out.join("summary.json"), doc + "\n")?;
    if let Some((name, value)) = extra {
        let doc =
            serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
        fs::write(out.join(name), doc + "\n")?;
    }
    Ok(())
}

fn run_command(args: &RunArgs, allowed: &[Algorithm]) -> Result<(), CliError> {
    let config = load_config(&args.config, allowed)?;
    let seeds = parse_seeds(&args.seeds)?;
    let traces = run_seeds(&config, &seeds, args.jobs)?;
    write_outputs(&args.out, &traces, None)
}

fn check_invariants_command(args: &CheckArgs) -> Result<(), CliError> {
    let mut config = load_config(&args.run.config, &[Algorithm::HierMdp])?;
    config.diagnostics.check_invariants = true;
    let seeds = parse_seeds(&args.run.seeds)?;
    let traces = run_seeds(&config, &seeds, args.run.jobs)?;

    let hierlearn::Instance::Mdp(inst) = &config.instance else {
        unreachable!("hier-mdp validated above");
    };
    let per_run_q2 = config.horizon
        * (inst.horizon() * inst.num_states() * inst.num_leader_actions()
            * inst.num_follower_actions()) as u64;
    let per_run_q1 = config.horizon
        * (inst.horizon() * inst.num_states() * inst.num_leader_actions()) as u64;
    let optimism: u64 = traces.iter().map(|t| t.total_optimism_violations()).sum();
    let dominance: u64 = traces.iter().map(|t| t.total_dominance_violations()).sum();
    let monotonicity: u64 = traces
        .iter()
        .map(|t| t.q2_monotonicity_violations.unwrap_or(0))
        .sum();
    let runs = traces.len() as u64;
    let optimism_fraction = optimism as f64 / (per_run_q2 * runs) as f64;
    let dominance_fraction = dominance as f64 / (per_run_q1 * runs) as f64;
    let pass = optimism_fraction <= args.max_violation_fraction
        && dominance_fraction <= args.max_violation_fraction
        && monotonicity == 0;

    let report = json!({
        "optimism_violations": optimism,
        "dominance_violations": dominance,
        "q2_monotonicity_violations": monotonicity,
        "checked_q2_entries": per_run_q2 * runs,
        "checked_q1_entries": per_run_q1 * runs,
        "optimism_fraction": optimism_fraction,
        "dominance_fraction": dominance_fraction,
        "max_violation_fraction": args.max_violation_fraction,
        "pass": pass,
    });
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    write_outputs(&args.run.out, &traces, Some(("report.json", &report)))?;
    if !pass {
        return Err(CliError::Violations(format!(
            "optimism fraction {optimism_fraction}, dominance fraction {dominance_fraction}, \
             monotonicity violations {monotonicity} (threshold {})",
            args.max_violation_fraction
        )));
    }
    Ok(())
}

/// Sets a dotted path like `constants.c` inside a JSON object tree.
fn set_path(root: &mut Value, path: &str, value: &Value) -> Result<(), CliError> {
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let map = node
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("grid key `{path}` does not address an object")))?;
        if i + 1 == parts.len() {
            map.insert((*part).to_string(), value.clone());
            return Ok(());
        }
        node = map
            .entry((*part).to_string())
            .or_insert_with(|| json!({}));
    }
    Ok(())
}

fn sweep_command(args: &RunArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.config).map_err(|e| {
        CliError::Config(format!("cannot read config {}: {e}", args.config.display()))
    })?;
    let doc: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("not valid JSON: {e}")))?;
    let base = doc
        .get("base")
        .ok_or_else(|| CliError::Config("missing key `base`".into()))?;
    let grid = doc
        .get("grid")
        .and_then(|g| g.as_object())
        .ok_or_else(|| CliError::Config("missing key `grid` (object of value lists)".into()))?;
    if grid.is_empty() {
        return Err(CliError::Config("grid must list at least one parameter".into()));
    }
    // serde_json objects iterate in sorted key order, which fixes the cell
    // enumeration order.
    let mut dimensions: Vec<(&String, &Vec<Value>)> = Vec::new();
    for (key, values) in grid {
        let values = values
            .as_array()
            .ok_or_else(|| CliError::Config(format!("grid key `{key}` must hold an array")))?;
        if values.is_empty() {
            return Err(CliError::Config(format!("grid key `{key}` has no values")));
        }
        dimensions.push((key, values));
    }

    let seeds = parse_seeds(&args.seeds)?;
    let cells: usize = dimensions.iter().map(|(_, v)| v.len()).product();
    let mut index = Vec::with_capacity(cells);
    for cell in 0..cells {
        let mut rem = cell;
        let mut overrides = serde_json::Map::new();
        let mut cell_doc = base.clone();
        for (key, values) in &dimensions {
            let pick = rem % values.len();
            rem /= values.len();
            set_path(&mut cell_doc, key, &values[pick])?;
            overrides.insert((*key).clone(), values[pick].clone());
        }
        let config = RunConfig::from_json_str(&cell_doc.to_string())?;
        let name = format!("cell_{cell:03}");
        let traces = run_seeds(&config, &seeds, args.jobs)?;
        write_outputs(&args.out.join(&name), &traces, None)?;
        index.push(json!({
            "cell": name,
            "overrides": Value::Object(overrides),
            "summary": format!("cell_{cell:03}/summary.json"),
        }));
    }
    fs::create_dir_all(&args.out)?;
    let doc = serde_json::to_string_pretty(&Value::Array(index))
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::write(args.out.join("index.json"), doc + "\n")?;
    Ok(())
}
