use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use asyncbo::acquisition::Rule;
use asyncbo::objectives::Family;
use asyncbo::verify::{duration_check, fantasy_ucb_check, log_ei_check};
use asyncbo_cli::analyze::{analyze, AnalyzeOptions};
use asyncbo_cli::batch::execute;
use asyncbo_cli::spec::{ConfigFile, ExperimentSpec, ModeSelection, OUT_ENV};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "asyncbo", version, about = "Asynchronous Bayesian optimization benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment grid and write traces plus manifest.json.
    Run(RunArgs),
    /// Compute regret, distance, lengthscale and comparison tables from traces.
    Analyze(AnalyzeArgs),
    /// List objectives and acquisition rules.
    List,
    /// Run the numerical self-checks.
    Verify,
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    objective: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    rule: Option<Vec<Rule>>,
    #[arg(long, value_delimiter = ',')]
    workers: Option<Vec<usize>>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    seed_base: Option<u64>,
    #[arg(long)]
    budget_time: Option<f64>,
    #[arg(long)]
    budget_evals: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<ModeSelection>,
    /// Output directory.
    #[arg(long, env = OUT_ENV)]
    out: Option<PathBuf>,
    /// Parallel runs.
    #[arg(long)]
    jobs: Option<usize>,
}

impl RunArgs {
    fn into_config(self) -> ConfigFile {
        ConfigFile {
            objectives: self.objective,
            rules: self.rule,
            workers: self.workers,
            seeds: self.seeds,
            seed_base: self.seed_base,
            budget_time: self.budget_time,
            budget_evals: self.budget_evals,
            mode: self.mode,
            out: self.out,
            jobs: self.jobs,
        }
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Directory holding traces.
    dir: PathBuf,
    /// Where to write tables; defaults to the trace directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Compare rules at this simulated time instead of the end of each run.
    #[arg(long)]
    at: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    rules: Option<Vec<Rule>>,
}

fn run(args: RunArgs) -> Result<ExitCode> {
    let base = match &args.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let spec = ExperimentSpec::from_config(base.overlay(args.into_config()))?;
    if spec.is_empty() {
        log::warn!("experiment grid is empty");
    }
    let manifest = execute(&spec)?;
    let failed = manifest.failures();
    println!("{} runs written to {}, {failed} not complete", manifest.runs.len(), spec.out.display());
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn verify() -> Result<ExitCode> {
    let mut ok = true;
    let mut line = |pass: bool, text: String| {
        ok &= pass;
        println!("[{}] {text}", if pass { "PASS" } else { "FAIL" });
    };
    let f = fantasy_ucb_check(50, 2000, 2.0, 2024)?;
    line(f.agreeing() >= 48, format!("fantasy-averaged UCB: {}/50 cases agree with Kriging Believer", f.agreeing()));
    let l = log_ei_check(-30.0, 5.0, 351, 10_000, 7);
    line(
        l.max_rel_error <= 1e-6 && l.non_finite == 0,
        format!("LogEI: max rel err {:.2e} at z={:.2}, {} non-finite", l.max_rel_error, l.worst_z, l.non_finite),
    );
    let d = duration_check(100_000, 17);
    line((d.mean - 1.0).abs() <= 0.02 && d.min >= 0.0, format!("durations: mean {:.4}, min {:.2e}", d.mean, d.min));
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn list() {
    println!("objectives:");
    for f in Family::ALL {
        println!("  {}-<d>  {}", f.name(), f.dims_help());
    }
    println!("rules:");
    for r in Rule::ALL {
        println!("  {r}");
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Analyze(args) => {
            let out = args.out.clone().unwrap_or_else(|| args.dir.clone());
            let opts = AnalyzeOptions { rules: args.rules, at: args.at };
            analyze(&args.dir, &out, &opts).map(|written| {
                for p in written {
                    println!("{}", p.display());
                }
                ExitCode::SUCCESS
            })
        }
        Command::List => {
            list();
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify => verify(),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(2)
    })
}
