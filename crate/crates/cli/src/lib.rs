//! `roughcalc` command line: parses flags and config overrides, runs an
//! experiment and writes its JSON and CSV report.
//!
//! Exit codes: 0 when every criterion passed, 1 for usage or configuration
//! errors, 2 for numerical or file-system failures, 3 when a criterion failed.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use roughcalc::experiments::{self, ExperimentConfig, Suite, EXPERIMENTS};
use roughcalc::gaussian::write_ensemble;
use roughcalc::malliavin::CATALOG;
use roughcalc::par::with_workers;
use roughcalc::report::{write_report, Report};
use roughcalc::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_CRITERIA: i32 = 3;

/// Default output directory when `--out` is absent.
pub const OUT_DIR_ENV: &str = "ROUGHCALC_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "roughcalc", version, about = "Energy-space Malliavin calculus experiments for fractional Brownian motion")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Config file with `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    hurst: Option<f64>,
    #[arg(long = "grid-n", global = true)]
    grid_n: Option<usize>,
    #[arg(long, global = true)]
    paths: Option<usize>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Config override, repeatable: `--set method=mc`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Output directory [default: $ROUGHCALC_OUT_DIR or ./reports].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample paths and cross-check the samplers.
    Simulate {
        /// Also write the Cholesky ensemble as a binary `.paths` file.
        #[arg(long)]
        export: bool,
    },
    /// Duality check E[F δ(u)] = E[<DF, u>].
    Adjointness,
    /// Clark–Ocone residual over the grid sweep.
    Factorize,
    /// Remainder scaling of the martingale expansion.
    Remainder,
    /// Energy pairing against pathwise regression.
    Gubinelli,
    /// Isometry defect of the divergence.
    Isometry,
    /// Projection against Gaussian regression.
    Lemma,
    /// Increment-norm identity.
    Increments,
    /// Mixed Brownian/fractional model.
    Mixed,
    /// Every experiment, plus an index report.
    VerifyAll,
    /// Print the functional catalog and the experiments.
    List,
}

impl Command {
    fn experiment(&self) -> Option<&'static str> {
        Some(match self {
            Command::Simulate { .. } => "simulate",
            Command::Adjointness => "adjointness",
            Command::Factorize => "factorize",
            Command::Remainder => "remainder",
            Command::Gubinelli => "gubinelli",
            Command::Isometry => "isometry",
            Command::Lemma => "lemma",
            Command::Increments => "increments",
            Command::Mixed => "mixed",
            Command::VerifyAll | Command::List => return None,
        })
    }
}

/// Process exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Domain(_) | Error::Unsupported(_) => EXIT_USAGE,
        _ => EXIT_NUMERICAL,
    }
}

fn build_config(c: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    if let Some(v) = c.hurst {
        cfg.set("hurst", &v.to_string())?;
    }
    if let Some(v) = c.grid_n {
        cfg.set("grid_n", &v.to_string())?;
    }
    if let Some(v) = c.paths {
        cfg.paths = v;
    }
    if let Some(v) = c.workers {
        cfg.workers = v;
    }
    for kv in &c.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    Ok(cfg)
}

fn out_dir(c: &Common) -> PathBuf {
    c.out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("reports"))
}

fn emit(report: &Report, dir: &Path) -> Result<(), Error> {
    log::info!("{} done after {:.2?}", report.file_stem(), started().elapsed());
    let (json, csv) = write_report(report, dir)?;
    println!("{}: {}", report.experiment, json.display());
    println!("{}: {}", report.experiment, csv.display());
    for c in &report.criteria {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        if c.detail.is_empty() {
            println!("  {tag} {}", c.id);
        } else {
            println!("  {tag} {} ({})", c.id, c.detail);
        }
    }
    Ok(())
}

fn started() -> &'static Instant {
    static START: OnceLock<Instant> = OnceLock::new();
    START.get_or_init(Instant::now)
}

fn list() {
    println!("functionals:");
    for (name, about) in CATALOG {
        println!("  {name:<16} {about}");
    }
    println!("experiments:");
    for (name, about) in EXPERIMENTS {
        println!("  {name:<16} {about}");
    }
    println!("  {:<16} every experiment above plus an index report", "verify-all");
}

fn execute(cmd: &Command, cfg: &ExperimentConfig, dir: &Path) -> Result<bool, Error> {
    match cmd {
        Command::List => unreachable!(),
        Command::VerifyAll => {
            let Suite { reports, summary } = experiments::verify_all(cfg)?;
            for r in &reports {
                emit(r, dir)?;
            }
            emit(&summary, dir)?;
            Ok(summary.passed())
        }
        Command::Simulate { export } => {
            let (report, ens) = experiments::simulate_with_ensemble(cfg)?;
            emit(&report, dir)?;
            if *export || cfg.export {
                let p = dir.join(format!("{}.paths", report.file_stem()));
                write_ensemble(&p, &ens)?;
                println!("simulate: {}", p.display());
            }
            Ok(report.passed())
        }
        other => {
            let name = other.experiment().expect("experiment subcommand");
            let report = experiments::run(name, cfg)?;
            emit(&report, dir)?;
            Ok(report.passed())
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();

    if let Command::List = cli.command {
        list();
        return EXIT_OK;
    }
    let cfg = match build_config(&cli.common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("roughcalc: {e}");
            return exit_code(&e);
        }
    };
    let dir = out_dir(&cli.common);
    started();
    match with_workers(cfg.workers, || execute(&cli.command, &cfg, &dir)) {
        Ok(true) => EXIT_OK,
        Ok(false) => {
            eprintln!("roughcalc: one or more criteria failed");
            EXIT_CRITERIA
        }
        Err(e) => {
            eprintln!("roughcalc: {e}");
            exit_code(&e)
        }
    }
}
