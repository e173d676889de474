use std::f64::consts::PI;
use std::path::Path;

use anyhow::{Context, Result};
use brwtie::airy::psi;
use brwtie::environment::{EnvironmentModel, IndicatorSet, ScalarField};
use brwtie::ode::{find_lambda_c, find_lambda_star, selection_frontier, OdeOptions, OdeProblem};
use brwtie::optimal_path::{solve_auto, KktReport, OptimalPath, PathKind};
use brwtie::pde::{feynman_kac_run, Resolution};
use brwtie::simulate::{brw_run, path_sums, BrwConfig};
use brwtie::takacs_constant;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{hex, DomainKind, ExperimentConfig};
use crate::error::{CheckFailed, ConfigError};
use crate::output::Output;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpeedReport {
    pub config_hash: String,
    pub name: Option<String>,
    pub grid: usize,
    pub kind: PathKind,
    pub v_star: f64,
    pub l_star: f64,
    pub t_star: Option<f64>,
    pub contact_set: IndicatorSet,
    pub kkt: KktReport,
    pub kkt_tol: f64,
    pub kkt_pass: bool,
}

#[derive(Debug, Clone, Serialize)]
struct SpeedRow {
    t: f64,
    v: f64,
    theta_bar: f64,
    a: f64,
    theta: f64,
    energy: f64,
}

/// Optimal speed profile: speed.json and path.csv.
pub fn speed(cfg: &ExperimentConfig, out: &Path) -> Result<SpeedReport> {
    let out = Output::new(out, cfg.hash())?;
    let env = cfg.env();
    let path = solve_auto(env, cfg.speed.grid).context("optimal path")?;
    let rows: Vec<SpeedRow> = path
        .table(env, 200)?
        .into_iter()
        .map(|r| Ok(SpeedRow { t: r.t, v: env.natural_speed(r.t)?.0, theta_bar: r.theta_bar, a: r.a, theta: r.theta, energy: r.energy }))
        .collect::<brwtie::Result<_>>()?;
    out.csv("path.csv", &rows)?;
    let report = SpeedReport {
        config_hash: out.hash().to_string(),
        name: cfg.name.clone(),
        grid: path.grid,
        kind: path.kind,
        v_star: path.v_star,
        l_star: path.l_star,
        t_star: path.t_star,
        contact_set: path.contact_set.clone(),
        kkt: path.kkt_report,
        kkt_tol: cfg.speed.tol,
        kkt_pass: path.kkt_report.passes(cfg.speed.tol),
    };
    out.json("speed.json", &report)?;
    if !report.kkt_pass {
        return Err(CheckFailed(format!("KKT residuals above {}: {:?}", cfg.speed.tol, path.kkt_report)).into());
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub config_hash: String,
    pub name: Option<String>,
    pub mu: f64,
    pub tol: f64,
    pub v_star: f64,
    pub l_star: f64,
    pub lambda_c: f64,
    pub lambda_star: f64,
    /// g^0_1 for the maximal-displacement spec; equals l*.
    pub g0_1: f64,
    /// (3π²σ²/(2θ))^{1/3}, for a homogeneous Gaussian environment with μ = 0.
    pub lambda_star_homogeneous: Option<f64>,
    /// λ* ≤ −l*.
    pub bound_holds: bool,
    /// λ* ≥ −l*, reported for comparison.
    pub reversed_bound_holds: bool,
}

/// l*, λ_c, λ* and g^0_1 in constants.json. Fails after writing when
/// λ* ≤ −l* does not hold.
pub fn constants(cfg: &ExperimentConfig, out: &Path) -> Result<ConstantsReport> {
    let out = Output::new(out, cfg.hash())?;
    let env = cfg.env();
    let path = solve_auto(env, cfg.speed.grid).context("optimal path")?;
    let report = constants_report(env, &path, cfg.constants.mu, cfg.constants.tol, out.hash())?;
    let report = ConstantsReport { name: cfg.name.clone(), ..report };
    out.json("constants.json", &report)?;
    if !report.bound_holds {
        return Err(CheckFailed(format!(
            "lambda* = {} exceeds -l* = {} (lambda* <= -l* does not hold)",
            report.lambda_star, -report.l_star
        ))
        .into());
    }
    Ok(report)
}

pub fn constants_report(env: &EnvironmentModel, path: &OptimalPath, mu: f64, tol: f64, hash: &str) -> Result<ConstantsReport> {
    let opts = OdeOptions::default();
    let cmd = OdeProblem::cmd(env, path, mu);
    let lambda_c = find_lambda_c(&cmd, &opts, tol).context("lambda_c")?;
    let lambda_star = find_lambda_star(&cmd, path.l_star, &opts, tol).context("lambda*")?;
    let g0_1 = selection_frontier(&OdeProblem::max_displacement(env, path), &opts).context("g^0_1")?;
    let lambda_star_homogeneous = match env {
        EnvironmentModel::GaussianBinary { sigma: ScalarField::Constant(s) } if mu == 0.0 => {
            let theta = (2.0 * std::f64::consts::LN_2).sqrt() / s;
            Some((3.0 * PI * PI * s * s / (2.0 * theta)).cbrt())
        }
        _ => None,
    };
    Ok(ConstantsReport {
        config_hash: hash.to_string(),
        name: None,
        mu,
        tol,
        v_star: path.v_star,
        l_star: path.l_star,
        lambda_c,
        lambda_star,
        g0_1,
        lambda_star_homogeneous,
        bound_holds: lambda_star <= -path.l_star + tol,
        reversed_bound_holds: lambda_star >= -path.l_star - tol,
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PsiRow {
    pub h: f64,
    pub psi: f64,
}

fn param_hash<T: Serialize>(tag: &str, v: &T) -> String {
    let mut d = Sha256::new();
    d.update(tag.as_bytes());
    d.update(serde_json::to_vec(v).expect("parameters serialise"));
    hex(&d.finalize())
}

/// Ψ on a list of h: psi.csv.
pub fn psi_table(hs: &[f64], out: &Path) -> Result<Vec<PsiRow>> {
    if hs.is_empty() || hs.iter().any(|h| !h.is_finite()) {
        return Err(ConfigError::new("psi needs at least one finite h").into());
    }
    let out = Output::new(out, param_hash("psi", &hs))?;
    let rows: Vec<PsiRow> = hs.iter().map(|&h| PsiRow { h, psi: psi(h) }).collect();
    out.csv("psi.csv", &rows)?;
    Ok(rows)
}

/// Parses `start:stop:count` into `count` evenly spaced values.
pub fn parse_range(s: &str) -> Result<Vec<f64>, ConfigError> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || ConfigError::new(format!("range must be start:stop:count, got {s:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    match n {
        0 => Err(bad()),
        1 => Ok(vec![a]),
        _ => Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PdeReport {
    pub config_hash: String,
    pub h: f64,
    pub domain: DomainKind,
    pub length: f64,
    pub cells: usize,
    pub dt: f64,
    pub decay_rate: f64,
    /// Ψ(h) on the interval, (α₁/2^{1/3})h^{2/3} on the half-line.
    pub reference: f64,
    pub difference: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
struct ProfileRow {
    x: f64,
    u: f64,
}

/// Feynman–Kac decay rate: pde.json and profile.csv.
pub fn pde(h: f64, kind: DomainKind, cells: Option<usize>, out: &Path) -> Result<PdeReport> {
    if !h.is_finite() {
        return Err(ConfigError::new(format!("h must be finite, got {h}")).into());
    }
    if kind == DomainKind::Halfline && h <= 0.0 {
        return Err(ConfigError::new(format!("the half-line needs h > 0, got {h}")).into());
    }
    let domain = kind.domain(h);
    let mut res = Resolution::auto(h, domain);
    if let Some(c) = cells {
        if c < 4 {
            return Err(ConfigError::new("--grid must be at least 4 cells").into());
        }
        let scale = res.cells as f64 / c as f64;
        res = Resolution { cells: c, dt: res.dt * scale, ..res };
    }
    let out = Output::new(out, param_hash("pde", &(h, kind, res.cells)))?;
    let run = feynman_kac_run(h, domain, &res).context("Feynman-Kac run")?;
    let reference = match kind {
        DomainKind::Interval => psi(h),
        DomainKind::Halfline => takacs_constant() * h.powf(2.0 / 3.0),
    };
    let stride = (run.profile.len() / 400).max(1);
    let rows: Vec<ProfileRow> = run.profile.iter().step_by(stride).map(|&(x, u)| ProfileRow { x, u }).collect();
    out.csv("profile.csv", &rows)?;
    let report = PdeReport {
        config_hash: out.hash().to_string(),
        h,
        domain: kind,
        length: domain.length(),
        cells: run.grid,
        dt: run.dt,
        decay_rate: run.decay_rate,
        reference,
        difference: run.decay_rate - reference,
        t_end: run.t_end,
    };
    out.json("pde.json", &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub config_hash: String,
    pub seed: u64,
    pub n: usize,
    pub trials: usize,
    pub completed: usize,
    pub survived: usize,
    pub capped: usize,
    pub v_star: f64,
    /// b̄_n along the optimal path.
    pub path_total: f64,
    /// Mean and standard error of M_n / n over completed trials.
    pub mean_max_over_n: f64,
    pub std_error_max_over_n: f64,
    /// Mean and standard error of Λ_n over completed trials.
    pub mean_cmd: f64,
    pub std_error_cmd: f64,
    /// Fraction of completed trials with Λ_n ≤ b̄_n − M_n.
    pub cmd_bound_fraction: f64,
}

#[derive(Debug, Clone, Serialize)]
struct TrialRow {
    trial: usize,
    survived: bool,
    capped: bool,
    max_displacement: f64,
    cmd: f64,
    barrier_margin: f64,
    final_population: usize,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, f64::NAN);
    }
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Branching random walk along the optimal path: trials.csv and
/// summary.json.
pub fn simulate(cfg: &ExperimentConfig, out: &Path) -> Result<SimulateSummary> {
    let sim = cfg.simulate.as_ref().ok_or_else(|| ConfigError::new("simulate needs a [simulate] section"))?;
    let seed = sim.seed.ok_or_else(|| ConfigError::new("simulate needs a seed (simulate.seed or --seed)"))?;
    let out = Output::new(out, cfg.hash())?;
    let env = cfg.env();
    let path = solve_auto(env, cfg.speed.grid).context("optimal path")?;
    let config = BrwConfig { env: env.clone(), n: sim.n, control: sim.control.clone(), trials: sim.trials, seed };
    let res = brw_run(&config, &path.a).context("simulation")?;
    let rows: Vec<TrialRow> = res
        .trials
        .iter()
        .map(|t| TrialRow {
            trial: t.trial,
            survived: t.survived,
            capped: t.capped,
            max_displacement: t.max_displacement,
            cmd: t.cmd,
            barrier_margin: t.barrier_margin,
            final_population: t.population.last().copied().unwrap_or(0),
        })
        .collect();
    out.csv("trials.csv", &rows)?;
    let total = path_sums(&path.a, sim.n)[sim.n];
    let done: Vec<_> = res.completed().collect();
    let m: Vec<f64> = done.iter().map(|t| t.max_displacement / sim.n as f64).collect();
    let l: Vec<f64> = done.iter().map(|t| t.cmd).collect();
    let (mean_m, se_m) = mean_se(&m);
    let (mean_l, se_l) = mean_se(&l);
    let held = done.iter().filter(|t| t.cmd <= total - t.max_displacement).count();
    let summary = SimulateSummary {
        config_hash: out.hash().to_string(),
        seed,
        n: sim.n,
        trials: sim.trials,
        completed: done.len(),
        survived: res.trials.iter().filter(|t| t.survived).count(),
        capped: res.trials.iter().filter(|t| t.capped).count(),
        v_star: path.v_star,
        path_total: total,
        mean_max_over_n: mean_m,
        std_error_max_over_n: se_m,
        mean_cmd: mean_l,
        std_error_cmd: se_l,
        cmd_bound_fraction: if done.is_empty() { f64::NAN } else { held as f64 / done.len() as f64 },
    };
    out.json("summary.json", &summary)?;
    Ok(summary)
}
