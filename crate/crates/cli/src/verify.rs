//! The acceptance suite. Each criterion reports pass/fail against its
//! tolerance and its runtime budget.

use std::f64::consts::{LN_2, PI};
use std::path::Path;
use std::time::{Duration, Instant};

use anyhow::{anyhow, Result};
use brwtie::airy::{ai, airy_zero, psi};
use brwtie::environment::{EnvironmentModel, IndicatorSet, ScalarField};
use brwtie::functional::BarrierSpec;
use brwtie::ode::{find_lambda_star, integral_residual, solve_g_lambda, OdeOptions, OdeProblem};
use brwtie::optimal_path::{check_optimality, correction_l_star, solve_auto, solve_optimal_profile, solve_special_case, SpecialCase};
use brwtie::pde::{feynman_kac_decay, Domain, Resolution};
use brwtie::simulate::{brw_run, path_sums, rw_weighted_expectation, spine_expectation, tree_expectation, BrwConfig, PopulationControl, SpineWalk};
use brwtie::{takacs_constant, AIRY_ALPHA1};
use serde::Serialize;

use crate::commands;
use crate::config::{shipped, ExperimentConfig};

pub struct Outcome {
    pub pass: bool,
    pub detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Outcome { pass, detail }
    }
}

pub struct Criterion {
    pub id: u32,
    pub title: &'static str,
    pub budget: Option<Duration>,
    pub run: fn() -> Result<Outcome>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub title: String,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
    pub budget_seconds: Option<f64>,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        let budget = self.budget_seconds.map_or(String::new(), |b| format!(" of {b} s"));
        format!("[{tag}] {:>2} {} ({:.2} s{budget}): {}", self.id, self.title, self.seconds, self.detail)
    }
}

pub fn run_criterion(c: &Criterion) -> CriterionResult {
    timed(c.id, c.title, c.budget, c.run)
}

fn timed<F: FnOnce() -> Result<Outcome>>(id: u32, title: &str, budget: Option<Duration>, f: F) -> CriterionResult {
    let start = Instant::now();
    let outcome = f().unwrap_or_else(|e| Outcome::new(false, format!("error: {e:#}")));
    let elapsed = start.elapsed();
    let in_time = budget.is_none_or(|b| elapsed <= b);
    let detail = if in_time { outcome.detail } else { format!("{}; over the runtime budget", outcome.detail) };
    CriterionResult {
        id,
        title: title.to_string(),
        pass: outcome.pass && in_time,
        detail,
        seconds: elapsed.as_secs_f64(),
        budget_seconds: budget.map(|b| b.as_secs_f64()),
    }
}

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

/// Criteria 1 to 12. Criterion 13 writes files; see [`run_determinism`].
pub fn criteria() -> Vec<Criterion> {
    vec![
        Criterion { id: 1, title: "Airy constants", budget: secs(1), run: airy_constants },
        Criterion { id: 2, title: "psi at 0", budget: secs(1), run: psi_at_zero },
        Criterion { id: 3, title: "psi reflection", budget: secs(1), run: psi_reflection },
        Criterion { id: 4, title: "psi vs Feynman-Kac", budget: secs(120), run: psi_vs_pde },
        Criterion { id: 5, title: "psi asymptotics", budget: secs(5), run: psi_asymptotics },
        Criterion { id: 6, title: "optimal-path solver", budget: secs(60), run: optimal_path_solver },
        Criterion { id: 7, title: "correction l*", budget: secs(1), run: correction },
        Criterion { id: 8, title: "lambda* closed form and bound", budget: secs(10), run: lambda_star },
        Criterion { id: 9, title: "ODE identities", budget: secs(30), run: ode_identities },
        Criterion { id: 10, title: "many-to-one equivalence", budget: secs(120), run: many_to_one },
        Criterion { id: 11, title: "Mogulskii trend", budget: secs(300), run: mogulskii },
        Criterion { id: 12, title: "BRW first order", budget: secs(300), run: brw_first_order },
    ]
}

fn gauss(sigma: ScalarField) -> Result<EnvironmentModel> {
    Ok(EnvironmentModel::gaussian_binary(sigma)?)
}

fn airy_constants() -> Result<Outcome> {
    let a1 = airy_zero(1);
    let worst = (1..=50).map(|n| ai(airy_zero(n)).abs()).fold(0.0, f64::max);
    let ok = (a1 + 2.3381).abs() <= 5e-4 && worst <= 1e-8;
    Ok(Outcome::new(ok, format!("alpha_1 = {a1:.10}, max |Ai(alpha_n)| (n <= 50) = {worst:.2e}")))
}

fn psi_at_zero() -> Result<Outcome> {
    let exact = -PI * PI / 2.0;
    let d0 = (psi(0.0) - exact).abs();
    let d1 = (psi(1e-4) - psi(0.0)).abs();
    Ok(Outcome::new(
        d0 <= 1e-9 && d1 <= 1e-5,
        format!("|psi(0) + pi^2/2| = {d0:.1e} (tol 1e-9), |psi(1e-4) - psi(0)| = {d1:.3e} (tol 1e-5)"),
    ))
}

fn psi_reflection() -> Result<Outcome> {
    let worst = [0.1, 1.0, 10.0, 100.0].iter().map(|&h| (psi(h) - psi(-h) + h).abs()).fold(0.0, f64::max);
    Ok(Outcome::new(worst <= 1e-9, format!("max |psi(h) - psi(-h) + h| = {worst:.1e}")))
}

fn psi_vs_pde() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for h in [0.0, 0.5, 1.0, 2.0, 5.0] {
        let d = (feynman_kac_decay(h, Domain::Interval, &Resolution::auto(h, Domain::Interval))? - psi(h)).abs();
        worst = worst.max(d);
        parts.push(format!("I({h}) {d:.1e}"));
    }
    for h in [0.5, 1.0, 2.0] {
        let dom = Domain::halfline(h);
        let d = (feynman_kac_decay(h, dom, &Resolution::auto(h, dom))? - takacs_constant() * h.powf(2.0 / 3.0)).abs();
        worst = worst.max(d);
        parts.push(format!("H({h}) {d:.1e}"));
    }
    Ok(Outcome::new(worst <= 1e-3, format!("max deviation {worst:.2e} [{}]", parts.join(", "))))
}

fn psi_asymptotics() -> Result<Outcome> {
    let r: Vec<f64> = [10.0, 100.0, 1e3, 1e4].iter().map(|&h: &f64| psi(h) / (takacs_constant() * h.powf(2.0 / 3.0))).collect();
    let d: Vec<f64> = r.iter().map(|x| (x - 1.0).abs()).collect();
    let close = d[3] <= 0.1;
    // from h = 1e3 on the ratio is 1 to rounding; allow a few ulps
    let monotone = d.windows(2).all(|w| w[1] <= w[0] + 1e-14);
    Ok(Outcome::new(close && monotone, format!("|ratio - 1| at h = 10, 100, 1e3, 1e4: {:?}", d.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>())))
}

fn optimal_path_solver() -> Result<Outcome> {
    let n = 2048;
    let regimes = [
        ("2-t", ScalarField::affine(2.0, -1.0), SpecialCase::Nondecreasing),
        ("1+t", ScalarField::affine(1.0, 1.0), SpecialCase::Nonincreasing),
        ("1+|t-1/2|", ScalarField::kink(1.0, 1.0, 0.5), SpecialCase::Mixed),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, sigma, case) in regimes {
        let env = gauss(sigma)?;
        let g = solve_optimal_profile(&env, n)?;
        let s = solve_special_case(&env, n, case)?;
        let dv = (g.v_star - s.v_star).abs();
        let dth = (0..n).map(|i| (i as f64 + 0.5) / n as f64).map(|t| (g.theta.eval(t) - s.theta.eval(t)).abs()).fold(0.0, f64::max);
        let kkt = check_optimality(&env, &g)?.worst().max(check_optimality(&env, &s)?.worst());
        ok &= dv <= 1e-4 && dth <= 1e-3 && kkt <= 1e-6;
        parts.push(format!("{name}: dv* {dv:.1e}, dtheta {dth:.1e}, kkt {kkt:.1e}"));
    }
    Ok(Outcome::new(ok, parts.join("; ")))
}

fn correction() -> Result<Outcome> {
    let env = gauss(ScalarField::affine(2.0, -1.0))?;
    let path = solve_special_case(&env, 2048, SpecialCase::Nondecreasing)?;
    let l = correction_l_star(&env, &path)?;
    // ∫₀¹ (2 − t)^{1/3} dt = (3/4)(2^{4/3} − 1)
    let closed = AIRY_ALPHA1 / (2f64.cbrt() * (2.0 * LN_2).powf(1.0 / 6.0)) * 0.75 * (2f64.powf(4.0 / 3.0) - 1.0);
    let hom = solve_auto(&gauss(1.0.into())?, 2048)?;
    let l0 = correction_l_star(&gauss(1.0.into())?, &hom)?;
    let ok = (l - closed).abs() <= 1e-6 && l0 == 0.0;
    Ok(Outcome::new(ok, format!("l* = {l:.10} vs {closed:.10}, homogeneous l* = {l0}")))
}

fn lambda_star() -> Result<Outcome> {
    let opts = OdeOptions::default();
    let flat = OdeProblem { phi: 1.0.into(), sigma: 1.0.into(), f: 0.0.into(), f_set: IndicatorSet::full(), g_set: IndicatorSet::full() };
    let ls = find_lambda_star(&flat, 0.0, &opts, 1e-10)?;
    let closed = (3.0 * PI * PI / 2.0).cbrt();
    let rel = (ls / closed - 1.0).abs();
    let mut parts = vec![format!("homogeneous lambda* = {ls:.8} vs {closed:.8} (rel {rel:.1e})")];
    let mut bound = true;
    for (name, text) in shipped() {
        let cfg = ExperimentConfig::from_toml(text)?;
        let path = solve_auto(cfg.env(), cfg.speed.grid)?;
        let r = commands::constants_report(cfg.env(), &path, 0.0, cfg.constants.tol, "")?;
        bound &= r.bound_holds;
        parts.push(format!("{name}: lambda* {:.4} vs -l* {:.4}", r.lambda_star, -r.l_star));
    }
    Ok(Outcome::new(rel <= 1e-4 && bound, parts.join("; ")))
}

fn ode_identities() -> Result<Outcome> {
    let opts = OdeOptions::default();
    let env = gauss(ScalarField::affine(2.0, -1.0))?;
    let path = solve_auto(&env, 2048)?;
    let base = OdeProblem::cmd(&env, &path, 0.0);
    let mut shift: f64 = 0.0;
    let mut resid: f64 = 0.0;
    for (lam, mu) in [(3.0, 0.5), (4.0, 1.0), (2.8, 2.0)] {
        let shifted = base.shifted_barrier(mu);
        let a = solve_g_lambda(&shifted, lam - mu, &opts)?;
        let b = solve_g_lambda(&base, lam, &opts)?;
        if a.hit_lower != b.hit_lower {
            return Ok(Outcome::new(false, format!("stopping differs at lambda {lam}, mu {mu}")));
        }
        for i in 0..=200 {
            let t = a.t_max.min(b.t_max) * i as f64 / 200.0;
            shift = shift.max((a.g_at(t) - b.g_at(t) + mu).abs());
        }
        resid = resid.max(integral_residual(&shifted, &a)?).max(integral_residual(&base, &b)?);
    }
    let others = [OdeProblem::max_displacement(&env, &path), OdeProblem::cmd(&env, &path, 1.5)];
    for p in &others {
        for lam in [0.5, 2.5, 4.0] {
            resid = resid.max(integral_residual(p, &solve_g_lambda(p, lam, &opts)?)?);
        }
    }
    Ok(Outcome::new(shift <= 1e-8 && resid <= 1e-7, format!("shift identity {shift:.1e}, max residual {resid:.1e}")))
}

fn many_to_one() -> Result<Outcome> {
    let env = gauss(ScalarField::affine(1.0, 0.5))?;
    let n = 6;
    let walk = SpineWalk::new(&env, &env.theta_bar_field(), n)?;
    let bbar = walk.bbar.clone();
    type Functional = Box<dyn Fn(&[f64]) -> f64 + Sync>;
    let fs: Vec<(&str, Functional)> = vec![
        ("end above 2", Box::new(|p: &[f64]| f64::from(p[6] > 2.0))),
        ("stays above path - 3", Box::new(move |p: &[f64]| f64::from((1..=6).all(|k| p[k] - bbar[k] > -3.0)))),
        ("exp(-|S_3|)", Box::new(|p: &[f64]| (-p[3].abs()).exp())),
        ("max below 3", Box::new(|p: &[f64]| f64::from(p.iter().cloned().fold(f64::NEG_INFINITY, f64::max) < 3.0))),
        ("|tanh(S_6 - S_2)|", Box::new(|p: &[f64]| (p[6] - p[2]).tanh().abs())),
    ];
    let mut worst: f64 = 0.0;
    for (i, (_, f)) in fs.iter().enumerate() {
        let a = tree_expectation(&env, n, 20_000, 1000 + i as u64, f)?;
        let b = spine_expectation(&walk, 100_000, 2000 + i as u64, f);
        let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
        worst = worst.max((a.mean - b.mean).abs() / se);
    }
    Ok(Outcome::new(worst <= 4.0, format!("largest gap {worst:.2} combined standard errors over {} functionals", fs.len())))
}

fn mogulskii() -> Result<Outcome> {
    let spec = BarrierSpec {
        f: (-1.0).into(),
        g: 1.0.into(),
        f_set: IndicatorSet::full(),
        g_set: IndicatorSet::full(),
        h: 0.0.into(),
    };
    let lim = -PI * PI / 8.0;
    let mut vals = Vec::new();
    for (i, n) in [1000usize, 10_000, 100_000].into_iter().enumerate() {
        vals.push(rw_weighted_expectation(&1.0.into(), &spec, n, 10_000, 31 + i as u64)?);
    }
    let last = vals[2].scaled;
    let close = (last / lim - 1.0).abs() <= 0.15;
    let monotone = vals.windows(2).all(|w| (w[1].scaled - lim).abs() < (w[0].scaled - lim).abs());
    let list: Vec<String> = vals.iter().map(|v| format!("n={}: {:.4} ± {:.4}", v.n, v.scaled, v.std_error)).collect();
    Ok(Outcome::new(close && monotone, format!("limit {lim:.4}; {}", list.join(", "))))
}

fn brw_first_order() -> Result<Outcome> {
    let env = gauss(1.0.into())?;
    let n = 16;
    let path = solve_auto(&env, 2048)?;
    let cfg = BrwConfig { env, n, control: PopulationControl::FullTree { max_pop: 1 << 22 }, trials: 2000, seed: 2016 };
    let res = brw_run(&cfg, &path.a)?;
    let total = path_sums(&path.a, n)[n];
    let done: Vec<_> = res.completed().collect();
    if done.len() != cfg.trials {
        return Err(anyhow!("{} of {} trials incomplete", cfg.trials - done.len(), cfg.trials));
    }
    let mean = done.iter().map(|t| t.max_displacement).sum::<f64>() / (done.len() * n) as f64;
    let v = path.v_star;
    let first = (mean / v - 1.0).abs() <= 0.1 && mean < v;
    let held = done.iter().filter(|t| t.cmd <= total - t.max_displacement).count();
    let reversed = done.iter().filter(|t| t.cmd >= total - t.max_displacement - 1e-9).count();
    Ok(Outcome::new(
        first && held == done.len(),
        format!(
            "mean M_n/n = {mean:.4} vs v* = {v:.4} (ratio {:.3}); Lambda_n <= n v* - M_n in {held}/{} trials, >= in {reversed}",
            mean / v,
            done.len()
        ),
    ))
}

/// Criterion 13 through the command layer: two simulate runs with the same
/// seed must write identical trials.csv files.
pub fn run_determinism(scratch: &Path) -> CriterionResult {
    timed(13, "simulate determinism", None, || {
        let (name, text) = shipped()[1];
        let cfg = ExperimentConfig::from_toml(text)?;
        let a = scratch.join("run-a");
        let b = scratch.join("run-b");
        commands::simulate(&cfg, &a)?;
        commands::simulate(&cfg, &b)?;
        let fa = std::fs::read(a.join("trials.csv"))?;
        let fb = std::fs::read(b.join("trials.csv"))?;
        Ok(Outcome::new(fa == fb, format!("{name}: {} bytes, identical = {}", fa.len(), fa == fb)))
    })
}

/// Checks on a user config: the optimal path passes its KKT tolerance and
/// g^0_1 = l*.
pub fn run_config(cfg: &ExperimentConfig, out: &Path) -> CriterionResult {
    let title = format!("config {}", cfg.name.as_deref().unwrap_or("(unnamed)"));
    timed(0, &title, None, || {
        let speed = commands::speed(cfg, out)?;
        let path = solve_auto(cfg.env(), cfg.speed.grid)?;
        let r = commands::constants_report(cfg.env(), &path, cfg.constants.mu, cfg.constants.tol, &speed.config_hash)?;
        let dg = (r.g0_1 - r.l_star).abs();
        Ok(Outcome::new(dg <= 1e-6, format!("worst KKT residual {:.1e}, |g0_1 - l*| = {dg:.1e}", speed.kkt.worst())))
    })
}
