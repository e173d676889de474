use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use brwtie_cli::commands;
use brwtie_cli::config::{DomainKind, ExperimentConfig, Overrides};
use brwtie_cli::error::{exit_code, CheckFailed, ConfigError};
use brwtie_cli::output::Output;
use brwtie_cli::verify;
use clap::{Parser, Subcommand};
use serde::Serialize;

/// Constants, PDE checks and Monte Carlo for branching random walks in
/// time-inhomogeneous environments.
#[derive(Parser)]
#[command(name = "brwtie", version)]
struct Cli {
    /// Experiment config (TOML, or JSON with a .json extension).
    #[arg(long, global = true)]
    env: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed for Monte Carlo commands; overrides simulate.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Grid size: optimal-path cells, or PDE cells for `pde`.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Tolerance for KKT residuals and λ bisection.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Monte Carlo trials; overrides simulate.trials.
    #[arg(long, global = true)]
    trials: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal speed profile, v*, l*, contact set and KKT report.
    Speed,
    /// l*, λ_c, λ* and g^0_1.
    Constants,
    /// Ψ(h) for a list or range of h.
    Psi {
        /// Values of h.
        #[arg(allow_negative_numbers = true)]
        h: Vec<f64>,
        /// Evenly spaced values, as start:stop:count.
        #[arg(long, allow_hyphen_values = true)]
        range: Option<String>,
    },
    /// Feynman–Kac decay rate and leading profile.
    Pde {
        #[arg(long, allow_negative_numbers = true)]
        h: Option<f64>,
        #[arg(long, value_enum)]
        domain: Option<DomainKind>,
    },
    /// Branching random walk trials along the optimal path.
    Simulate,
    /// Run the acceptance suite; exits 1 if any criterion fails.
    Verify {
        /// Run only these criteria.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

fn workers() -> Result<()> {
    let Ok(v) = std::env::var("BRWTIE_WORKERS") else { return Ok(()) };
    let n: usize = v.parse().ok().filter(|n| *n > 0).ok_or_else(|| ConfigError::new(format!("BRWTIE_WORKERS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli.env.as_ref().ok_or_else(|| ConfigError::new("this command needs --env <config>"))?;
    let mut cfg = ExperimentConfig::load(path)?;
    cfg.apply(&Overrides { seed: cli.seed, grid: cli.grid, tol: cli.tol, trials: cli.trials })?;
    Ok(cfg)
}

fn print<T: Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    workers()?;
    let out = cli.out.clone();
    match &cli.command {
        Command::Speed => print(&commands::speed(&load(&cli)?, &out)?),
        Command::Constants => print(&commands::constants(&load(&cli)?, &out)?),
        Command::Psi { h, range } => {
            let mut hs = h.clone();
            if let Some(r) = range {
                hs.extend(commands::parse_range(r)?);
            }
            if hs.is_empty() && cli.env.is_some() {
                hs = load(&cli)?.psi.map(|p| p.h).unwrap_or_default();
            }
            let rows = commands::psi_table(&hs, &out)?;
            println!("h,psi");
            for r in rows {
                println!("{},{}", r.h, r.psi);
            }
            Ok(())
        }
        Command::Pde { h, domain } => {
            let params = if cli.env.is_some() { load(&cli)?.pde } else { None };
            let h = h.or(params.as_ref().map(|p| p.h)).ok_or_else(|| ConfigError::new("pde needs --h or a [pde] section"))?;
            let domain = domain.or(params.as_ref().map(|p| p.domain)).unwrap_or(DomainKind::Interval);
            let cells = cli.grid.or(params.and_then(|p| p.cells));
            print(&commands::pde(h, domain, cells, &out)?)
        }
        Command::Simulate => print(&commands::simulate(&load(&cli)?, &out)?),
        Command::Verify { only } => verify_all(&cli, only, &out),
    }
}

#[derive(Serialize)]
struct VerifyReport {
    results: Vec<verify::CriterionResult>,
    passed: usize,
    failed: usize,
}

fn verify_all(cli: &Cli, only: &[u32], out: &Path) -> Result<()> {
    let wanted = |id: u32| only.is_empty() || only.contains(&id);
    let mut results = Vec::new();
    for c in verify::criteria().iter().filter(|c| wanted(c.id)) {
        let r = verify::run_criterion(c);
        println!("{}", r.line());
        results.push(r);
    }
    if wanted(13) {
        let r = verify::run_determinism(&out.join("verify-determinism"));
        println!("{}", r.line());
        results.push(r);
    }
    if cli.env.is_some() {
        let r = verify::run_config(&load(cli)?, &out.join("verify-config"));
        println!("{}", r.line());
        results.push(r);
    }
    let failed = results.iter().filter(|r| !r.pass).count();
    let report = VerifyReport { passed: results.len() - failed, failed, results };
    let hash = match &cli.env {
        Some(_) => load(cli)?.hash(),
        None => String::from("none"),
    };
    Output::new(out, hash)?.json("verify.json", &report)?;
    println!("{} passed, {} failed", report.passed, report.failed);
    if failed > 0 {
        return Err(CheckFailed(format!("{failed} criteria failed")).into());
    }
    Ok(())
}
