use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mscv_core::error::Error;
use mscv_core::experiments::config::{parse_table, parse_value};
use mscv_core::experiments::output::write_outputs;
use mscv_core::experiments::{resolve, run_experiment, ExperimentResult};
use mscv_core::uq::{allocate_samples, CostModel};
use mscv_core::validation::run_invariant_suite;

#[derive(Parser)]
#[command(name = "mscv", version, about = "Control variate Monte Carlo for uncertain kinetic equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one benchmark test and write its CSV outputs.
    Run(RunArgs),
    /// Fine ensemble sizes of the BGK and Euler control variates.
    Allocate {
        /// TOML file with the cost constants (c, c1, c2, n_a, n_v, ...).
        #[arg(long)]
        cost_config: PathBuf,
    },
    /// Run the invariant suite.
    Validate,
}

#[derive(Args)]
struct RunArgs {
    /// Test number, 1 to 5.
    #[arg(long)]
    test: Option<i64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    samples: Option<i64>,
    /// Control variates, comma separated (none, equilibrium, bgk, euler).
    #[arg(long, value_delimiter = ',')]
    cv: Vec<String>,
    /// λ rules, comma separated (zero, one, optimal, optimal-moment, cost-corrected).
    #[arg(long, value_delimiter = ',')]
    lambda: Vec<String>,
    #[arg(long)]
    me: Option<i64>,
    #[arg(long)]
    seed: Option<i64>,
    #[arg(long, value_parser = ["desk", "paper"])]
    scale: Option<String>,
    /// Output directory (default `out/test<N>`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// TOML file of configuration keys; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Any configuration key, `key=value`; applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn table_from(args: &RunArgs) -> Result<toml::Table, Error> {
    let mut table = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            parse_table(&text)?
        }
        None => toml::Table::new(),
    };
    let mut put = |k: &str, v: toml::Value| {
        table.insert(k.to_string(), v);
    };
    if let Some(t) = args.test {
        put("test", t.into());
    }
    if let Some(e) = args.eps {
        put("eps", e.into());
    }
    if let Some(m) = args.samples {
        put("samples", m.into());
    }
    if !args.cv.is_empty() {
        put("cv", args.cv.clone().into());
    }
    if !args.lambda.is_empty() {
        put("lambda", args.lambda.clone().into());
    }
    if let Some(m) = args.me {
        put("me", m.into());
    }
    if let Some(s) = args.seed {
        put("seed", s.into());
    }
    if let Some(s) = &args.scale {
        put("scale", s.clone().into());
    }
    for kv in &args.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("--set expects key=value, got '{kv}'")))?;
        put(k.trim(), parse_value(v.trim()));
    }
    Ok(table)
}

fn progress(result: &ExperimentResult) {
    let norm = &result.config.norms[0];
    for (k, t) in result.times.iter().enumerate() {
        let errors: Vec<String> = result
            .curves
            .iter()
            .filter(|c| &c.norm == norm)
            .map(|c| format!("{}={:.3e}", c.estimator, c.errors[k]))
            .collect();
        println!("t={t:.4} {norm} {}", errors.join(" "));
    }
}

fn run(args: &RunArgs) -> Result<(), Error> {
    let resolved = resolve(&table_from(args)?)?;
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from(format!("out/test{}", resolved.config.test)));
    let result = run_experiment(&resolved)?;
    progress(&result);
    write_outputs(&out, &result)?;
    println!("wrote {} ({:.1} s)", out.display(), result.wall_time_s);
    Ok(())
}

fn allocate(path: &PathBuf) -> Result<(), Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let cost: CostModel =
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))?;
    let (me1, me2) = allocate_samples(&cost, cost.samples)?;
    println!("M_E1={me1}");
    println!("M_E2={me2}");
    Ok(())
}

fn validate() -> ExitCode {
    let checks = run_invariant_suite();
    for c in &checks {
        println!("{} {:<24} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if checks.iter().all(|c| c.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parameter(_) | Error::Io(_) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(args) => run(args),
        Command::Allocate { cost_config } => allocate(cost_config),
        Command::Validate => return validate(),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
