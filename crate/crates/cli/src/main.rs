//! `tensorcx`: runs complexity, prediction and diagnostic experiments from a JSON
//! config, with every knob overridable on the command line.

mod commands;
mod config;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use config::{Format, MethodChoice};

#[derive(Debug)]
pub enum CliError {
    /// Unreadable or invalid configuration or input files; exit code 2.
    Config(String),
    /// A computation failed; exit code 3.
    Compute(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Compute(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Compute(m) => write!(f, "compute error: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "tensorcx", version, about = "Average-case approximation complexity of tensor products")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; tables go to stdout without it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(flatten)]
    knobs: Knobs,
}

#[derive(Args)]
struct Knobs {
    /// Problem family (flat, two_atom, weights, euler, regvar, loglog, euler_family, random).
    #[arg(long, global = true)]
    family: Option<String>,
    /// Problem parameter, e.g. `--param l=3`.
    #[arg(long = "param", global = true, value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// Comma-separated ascending d-list.
    #[arg(long, global = true, value_delimiter = ',')]
    d: Vec<u64>,
    /// Comma-separated ε-list.
    #[arg(long, global = true, value_delimiter = ',')]
    eps: Vec<f64>,
    #[arg(long, global = true, value_enum)]
    method: Option<MethodChoice>,
    #[arg(long, global = true)]
    n_cap: Option<u64>,
    #[arg(long, global = true)]
    step: Option<f64>,
    #[arg(long, global = true)]
    x_max: Option<f64>,
    /// Results JSON read by `report`.
    #[arg(long, global = true)]
    results: Option<PathBuf>,
    /// Any config key by dotted path, e.g. `--set abc.n=null`.
    #[arg(long = "set", global = true, value_name = "PATH=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Exact or bracketed n(ε) over the (d, ε) grid.
    Complexity,
    /// Regime predictor next to the bracketed ln n.
    Predict,
    /// Regime of a degree marginal.
    Classify,
    /// Finite-d limit conditions and boundedness per d.
    Criteria,
    /// Quantiles and CDF values of a limit law.
    Dist,
    /// Tractability statistics for a smoothness rule r_j.
    Tract,
    /// Summary table and plot data from a predict results file.
    Report,
}

impl Cmd {
    fn stem(self) -> &'static str {
        match self {
            Cmd::Complexity => "complexity",
            Cmd::Predict => "predict",
            Cmd::Classify => "classify",
            Cmd::Criteria => "criteria",
            Cmd::Dist => "dist",
            Cmd::Tract => "tract",
            Cmd::Report => "report",
        }
    }
}

fn to_json<T: serde::Serialize>(v: T) -> Value {
    serde_json::to_value(v).expect("flag values serialize")
}

fn resolve(cli: &Cli) -> Result<config::ExperimentConfig, CliError> {
    let mut tree = config::load_tree(cli.config.as_deref())?;
    let k = &cli.knobs;
    if let Some(fam) = &k.family {
        if tree.pointer("/problem/family").and_then(Value::as_str) != Some(fam.as_str()) {
            tree["problem"] = serde_json::json!({ "family": fam });
        }
    }
    for p in &k.params {
        let (key, v) = config::assignment(p)?;
        config::set_path(&mut tree, &format!("problem.{key}"), v)?;
    }
    for s in &k.sets {
        let (k, v) = config::assignment(s)?;
        config::set_path(&mut tree, &k, v)?;
    }
    let mut set = |path: &str, v: Option<Value>| v.map_or(Ok(()), |v| config::set_path(&mut tree, path, v));
    set("d", (!k.d.is_empty()).then(|| to_json(&k.d)))?;
    set("eps", (!k.eps.is_empty()).then(|| to_json(&k.eps)))?;
    set("method", k.method.map(to_json))?;
    set("n_cap", k.n_cap.map(to_json))?;
    set("grid.step", k.step.map(to_json))?;
    set("grid.x_max", k.x_max.map(to_json))?;
    set("results", k.results.as_ref().map(to_json))?;
    set("out", cli.out.as_ref().map(to_json))?;
    set("threads", cli.threads.map(to_json))?;
    set("seed", cli.seed.map(to_json))?;
    set("format", cli.format.map(to_json))?;
    let cfg = config::parse(tree)?;
    cfg.validate_common()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve(cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let out = pool.install(|| match cli.cmd {
        Cmd::Complexity => commands::complexity(&cfg),
        Cmd::Predict => commands::predict(&cfg),
        Cmd::Classify => commands::classify(&cfg),
        Cmd::Criteria => commands::criteria(&cfg),
        Cmd::Dist => commands::dist(&cfg),
        Cmd::Tract => commands::tract(&cfg),
        Cmd::Report => commands::report(&cfg),
    })?;
    table::emit(&out.table, cfg.out.as_deref(), cli.cmd.stem(), cfg.format)?;
    if let Some(dir) = &cfg.out {
        for (name, bytes) in &out.extras {
            std::fs::write(dir.join(name), bytes).map_err(|e| CliError::Config(format!("writing {name}: {e}")))?;
        }
    }
    if !out.failures.is_empty() {
        return Err(CliError::Compute(format!("{} cell(s) failed: {}", out.failures.len(), out.failures.join("; "))));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tensorcx: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
