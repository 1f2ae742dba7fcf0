use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fbsde_core::harness::{emit_table, fast_checks, run_experiment};
use fbsde_core::problems::ProblemKind;
use fbsde_core::FbsdeError;

use fbsde_cli::config::{ConfigError, RawConfig};

const EXIT_SOLVER: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "fbsde", version, about = "Regression-tree FBSDE solver and benchmark runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its error table.
    Run(Box<RunArgs>),
    /// Print the problem catalog.
    ListProblems,
    /// Run the quick accuracy checks.
    Verify,
}

/// Flags override the matching keys of `--config`.
#[derive(Args, Default)]
struct RunArgs {
    /// Flat key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Catalog name, e.g. `oscillatory` or `rainbow:10`.
    #[arg(long)]
    problem: Option<String>,
    /// Time steps per cell, comma separated.
    #[arg(long)]
    nt: Option<String>,
    /// Samples per cell, comma separated.
    #[arg(long)]
    m: Option<String>,
    /// Group size.
    #[arg(long)]
    g: Option<String>,
    #[arg(long)]
    theta1: Option<String>,
    #[arg(long)]
    theta2: Option<String>,
    #[arg(long)]
    theta3: Option<String>,
    /// Picard iterations per step.
    #[arg(long)]
    picard: Option<String>,
    #[arg(long)]
    runs: Option<String>,
    #[arg(long)]
    seed_a: Option<String>,
    #[arg(long)]
    seed_b: Option<String>,
    /// Minimum leaf size or `auto`.
    #[arg(long)]
    min_leaf: Option<String>,
    /// Holdout fraction used when pruning.
    #[arg(long)]
    holdout: Option<String>,
    /// Prune trees on a holdout sample (linear problems only).
    #[arg(long)]
    prune: bool,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<String>,
    /// `csv` or `markdown`.
    #[arg(long)]
    format: Option<String>,
    /// Volatility; required for rainbow.
    #[arg(long)]
    sigma: Option<String>,
    /// Dimension for rainbow and rates.
    #[arg(long)]
    dims: Option<String>,
    /// `absolute` or `relative`.
    #[arg(long)]
    error: Option<String>,
    /// Reference Y0 overriding the catalog value.
    #[arg(long)]
    reference: Option<String>,
    /// Add mean runtimes per run to the table.
    #[arg(long)]
    timing: bool,
}

impl RunArgs {
    fn raw_config(&self) -> Result<RawConfig, String> {
        let mut raw = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
                RawConfig::parse(&text).map_err(|e| e.to_string())?
            }
            None => RawConfig::default(),
        };
        let flags = [
            ("problem", &self.problem),
            ("nt", &self.nt),
            ("m", &self.m),
            ("g", &self.g),
            ("theta1", &self.theta1),
            ("theta2", &self.theta2),
            ("theta3", &self.theta3),
            ("picard", &self.picard),
            ("runs", &self.runs),
            ("seed_a", &self.seed_a),
            ("seed_b", &self.seed_b),
            ("min_leaf", &self.min_leaf),
            ("holdout", &self.holdout),
            ("out", &self.out),
            ("format", &self.format),
            ("sigma", &self.sigma),
            ("dims", &self.dims),
            ("error", &self.error),
            ("reference", &self.reference),
        ];
        let set = |raw: &mut RawConfig, k: &str, v: &str| raw.set(k, v).map_err(|e: ConfigError| e.to_string());
        for (key, value) in flags {
            if let Some(v) = value {
                set(&mut raw, key, v)?;
            }
        }
        if self.prune {
            set(&mut raw, "prune", "true")?;
        }
        if self.timing {
            set(&mut raw, "timing", "true")?;
        }
        Ok(raw)
    }
}

fn config_error(message: &str) -> ExitCode {
    eprintln!("error: {message}\n\nUsage: fbsde run [--config FILE] [--problem NAME --nt LIST --m LIST ...]");
    eprintln!("Run `fbsde run --help` for all flags.");
    ExitCode::from(EXIT_CONFIG)
}

fn init_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("FBSDE_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("FBSDE_THREADS must be a positive integer, got `{value}`"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn run(args: &RunArgs) -> ExitCode {
    let cfg = match args.raw_config().and_then(|raw| raw.resolve().map_err(|e| e.to_string())) {
        Ok(cfg) => cfg,
        Err(msg) => return config_error(&msg),
    };
    let stats = match run_experiment(&cfg.spec) {
        Ok(stats) => stats,
        Err(e @ FbsdeError::NumericalFailure { .. }) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_SOLVER);
        }
        Err(e) => return config_error(&e.to_string()),
    };
    let table = emit_table(&stats, cfg.format, cfg.timing);
    match &cfg.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &table) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(EXIT_SOLVER);
            }
        }
        None => print!("{table}"),
    }
    for cell in stats.cells.iter().filter(|c| c.failure.is_some()) {
        eprintln!(
            "cell N_T={} M={} failed: {}",
            cell.cell.n_steps,
            cell.cell.n_samples,
            cell.failure.as_deref().unwrap_or_default()
        );
    }
    if stats.any_failed() {
        ExitCode::from(EXIT_SOLVER)
    } else {
        ExitCode::SUCCESS
    }
}

fn verify() -> ExitCode {
    let outcomes = fast_checks(|c| {
        let status = if c.passed { "PASS" } else { "FAIL" };
        if c.detail.is_empty() {
            println!("{status} {}", c.name);
        } else {
            println!("{status} {} ({})", c.name, c.detail);
        }
    });
    if outcomes.iter().all(|c| c.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_SOLVER)
    }
}

fn main() -> ExitCode {
    let cli = Cli::try_parse().unwrap_or_else(|e| e.exit());
    if let Err(msg) = init_threads() {
        return config_error(&msg);
    }
    match cli.command {
        Command::Run(args) => run(&args),
        Command::ListProblems => {
            for name in ProblemKind::NAMES {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
        Command::Verify => verify(),
    }
}
