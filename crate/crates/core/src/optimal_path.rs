//! The optimal speed profile a and parameter θ, with v* and l*.
//!
//! On a midpoint grid t_i = (i + ½)/N the problem is: maximise Σ κ'_i(θ_i)
//! over non-decreasing θ with partial energies E_k = Σ_{i<k} e_i(θ_i)/N ≤ 0
//! and E_N = 0, where e_i(θ) = θκ'_i(θ) − κ_i(θ). Its optimality conditions
//! are those of the isotonic problem min Σ L_i(θ_i) with L_i' = e_i, which
//! pool-adjacent-violators solves exactly: every block carries the root of
//! Σ_{i∈block} e_i(c) = 0.

use serde::{Deserialize, Serialize};

use crate::environment::{EnvironmentModel, IndicatorSet, ScalarField};
use crate::quad::{self, GaussLegendre};
use crate::{takacs_constant, Error, Result};

pub const DEFAULT_GRID: usize = 2048;
pub const ENERGY_TOL: f64 = 1e-6;
pub const PROFILE_TOL: f64 = 1e-4;
/// Threshold for {K*(a) ≥ −ε}. Kept at 10 × 1e-9 because the solvers reach
/// energy residuals near 1e-13; a looser threshold takes in a √ε-wide
/// neighbourhood of every contact interval where θ already leaves θ̄.
pub const CONTACT_EPS: f64 = 1e-8;

const NEWTON_BUDGET: usize = 200;
const PANELS: usize = 64;
const ORDER: usize = 10;

/// Which construction produced a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    Generic,
    Nondecreasing,
    Nonincreasing,
    /// θ̄ non-increasing then non-decreasing; θ_s = θ̄_{s∨t*}.
    MixedV,
    /// θ̄ non-decreasing then non-increasing; θ_s = θ̄_{s∧t*}.
    MixedLambda,
    Custom,
}

/// Requested special-case construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecialCase {
    Nondecreasing,
    Nonincreasing,
    Mixed,
}

/// Shape of θ̄ sampled on a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "shape")]
pub enum ThetaBarShape {
    Nondecreasing,
    Nonincreasing,
    V { t_min: f64 },
    Lambda { t_max: f64 },
    Other,
}

/// Residuals of the three optimality conditions, plus feasibility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// max (θ_i − θ_{i+1})⁺
    pub monotonicity: f64,
    /// |K*(a)_1|
    pub terminal_energy: f64,
    /// |Σ K*(a)_{t_k} (1/θ_{k} − 1/θ_{k−1})|
    pub slackness: f64,
    /// max_t K*(a)_t, should be ≤ 0
    pub max_energy: f64,
    pub min_theta: f64,
    pub grid: usize,
}

impl KktReport {
    pub fn worst(&self) -> f64 {
        self.monotonicity.max(self.terminal_energy).max(self.slackness).max(self.max_energy.max(0.0))
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.min_theta > 0.0 && self.worst() <= tol
    }
}

#[derive(Debug, Clone)]
pub struct OptimalPath {
    pub a: ScalarField,
    pub theta: ScalarField,
    pub v_star: f64,
    pub l_star: f64,
    pub contact_set: IndicatorSet,
    pub kkt_report: KktReport,
    pub kind: PathKind,
    /// Switching time of the mixed constructions.
    pub t_star: Option<f64>,
    pub grid: usize,
    /// Points where θ̇ may jump.
    pub breakpoints: Vec<f64>,
}

/// One row of the exported path table.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PathRow {
    pub t: f64,
    pub a: f64,
    pub theta: f64,
    pub theta_bar: f64,
    pub energy: f64,
}

/// Scalar summary of a path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathSummary {
    pub kind: PathKind,
    pub v_star: f64,
    pub l_star: f64,
    pub t_star: Option<f64>,
    pub contact_set: IndicatorSet,
    pub kkt: KktReport,
}

impl OptimalPath {
    /// Builds the full record from θ (with derivative attached). Without an
    /// explicit contact set, {K*(a) ≥ −ε} is extracted from the grid.
    pub fn from_theta(
        env: &EnvironmentModel,
        theta: ScalarField,
        grid: usize,
        kind: PathKind,
        t_star: Option<f64>,
        mut breakpoints: Vec<f64>,
        contact: Option<IndicatorSet>,
    ) -> Result<Self> {
        breakpoints.extend(env.breakpoints());
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup();
        let a = speed_field(env, &theta);
        let v_star = if kind == PathKind::Generic {
            (0..grid).map(|i| a.eval(mid(i, grid))).sum::<f64>() / grid as f64
        } else {
            piecewise_gl(&breakpoints, 0.0, 1.0, |s| a.eval(s))
        };
        let mut path = OptimalPath {
            a,
            theta,
            v_star,
            l_star: 0.0,
            contact_set: IndicatorSet::empty(),
            kkt_report: KktReport {
                monotonicity: 0.0,
                terminal_energy: 0.0,
                slackness: 0.0,
                max_energy: 0.0,
                min_theta: 0.0,
                grid,
            },
            kind,
            t_star,
            grid,
            breakpoints,
        };
        if !v_star.is_finite() {
            return Err(Error::Domain("speed profile is not finite".into()));
        }
        path.l_star = correction_l_star(env, &path)?;
        let (report, energies) = check_with_energies(env, &path)?;
        path.kkt_report = report;
        path.contact_set = match contact {
            Some(c) => c,
            None => {
                let mask: Vec<bool> = (0..grid).map(|i| energies[i].min(energies[i + 1]) >= -CONTACT_EPS).collect();
                IndicatorSet::from_cell_mask(&mask)
            }
        };
        Ok(path)
    }

    /// Samples on `n` midpoints: t, a, θ, θ̄, K*(a)_t at the right cell edge.
    pub fn table(&self, env: &EnvironmentModel, n: usize) -> Result<Vec<PathRow>> {
        let mut e = 0.0;
        (0..n)
            .map(|i| {
                let t = mid(i, n);
                let th = self.theta.eval(t);
                e += env.energy_density(t, th)? / n as f64;
                Ok(PathRow { t, a: self.a.eval(t), theta: th, theta_bar: env.natural_speed(t)?.1, energy: e })
            })
            .collect()
    }

    pub fn summary(&self) -> PathSummary {
        PathSummary {
            kind: self.kind,
            v_star: self.v_star,
            l_star: self.l_star,
            t_star: self.t_star,
            contact_set: self.contact_set.clone(),
            kkt: self.kkt_report,
        }
    }

    /// σ_t = √κ''_t(θ_t) as a field.
    pub fn sigma(&self, env: &EnvironmentModel) -> ScalarField {
        sigma_field(env, &self.theta)
    }
}

fn mid(i: usize, n: usize) -> f64 {
    (i as f64 + 0.5) / n as f64
}

/// a_t = κ'_t(θ_t).
pub fn speed_field(env: &EnvironmentModel, theta: &ScalarField) -> ScalarField {
    let (e, th) = (env.clone(), theta.clone());
    let brk = theta.breakpoints();
    ScalarField::custom("a", move |t| e.d_kappa(t, th.eval(t)).unwrap_or(f64::NAN)).with_breakpoints(brk)
}

/// σ_t = √κ''_t(θ_t).
pub fn sigma_field(env: &EnvironmentModel, theta: &ScalarField) -> ScalarField {
    let (e, th) = (env.clone(), theta.clone());
    let brk = theta.breakpoints();
    ScalarField::custom("sigma", move |t| e.d2_kappa(t, th.eval(t)).map(f64::sqrt).unwrap_or(f64::NAN))
        .with_breakpoints(brk)
}

fn piecewise_gl<F: FnMut(f64) -> f64>(breaks: &[f64], a: f64, b: f64, mut f: F) -> f64 {
    let gl = GaussLegendre::new(ORDER);
    let mut knots: Vec<f64> = (0..=PANELS).map(|i| a + (b - a) * i as f64 / PANELS as f64).collect();
    knots.extend(breaks.iter().copied().filter(|p| *p > a && *p < b));
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    knots.windows(2).map(|w| gl.integrate(w[0], w[1], &mut f)).sum()
}

/// Classifies θ̄ on `n + 1` nodes.
pub fn classify_theta_bar(env: &EnvironmentModel, n: usize) -> Result<ThetaBarShape> {
    let th: Vec<f64> = (0..=n).map(|i| env.natural_speed(i as f64 / n as f64).map(|v| v.1)).collect::<Result<_>>()?;
    let scale = th.iter().cloned().fold(0.0, f64::max);
    let tol = 1e-12 * scale;
    let up = |s: &[f64]| s.windows(2).all(|w| w[1] >= w[0] - tol);
    let down = |s: &[f64]| s.windows(2).all(|w| w[1] <= w[0] + tol);
    if up(&th) {
        return Ok(ThetaBarShape::Nondecreasing);
    }
    if down(&th) {
        return Ok(ThetaBarShape::Nonincreasing);
    }
    let (kmin, _) = th.iter().enumerate().fold((0, f64::INFINITY), |b, (i, v)| if *v < b.1 { (i, *v) } else { b });
    if down(&th[..=kmin]) && up(&th[kmin..]) {
        return Ok(ThetaBarShape::V { t_min: kmin as f64 / n as f64 });
    }
    let (kmax, _) = th.iter().enumerate().fold((0, f64::NEG_INFINITY), |b, (i, v)| if *v > b.1 { (i, *v) } else { b });
    if up(&th[..=kmax]) && down(&th[kmax..]) {
        return Ok(ThetaBarShape::Lambda { t_max: kmax as f64 / n as f64 });
    }
    Ok(ThetaBarShape::Other)
}

/// Generic solver on an `n`-cell midpoint grid.
pub fn solve_optimal_profile(env: &EnvironmentModel, n: usize) -> Result<OptimalPath> {
    if n < 4 {
        return Err(Error::Invalid(format!("grid of {n} cells is too small")));
    }
    let ts: Vec<f64> = (0..n).map(|i| mid(i, n)).collect();
    let bars: Vec<f64> = ts.iter().map(|t| env.natural_speed(*t).map(|v| v.1)).collect::<Result<_>>()?;
    // blocks as (start, end_exclusive, value)
    let mut blocks: Vec<(usize, usize, f64)> = Vec::with_capacity(n);
    for (i, &bar) in bars.iter().enumerate() {
        blocks.push((i, i + 1, bar));
        while blocks.len() >= 2 {
            let k = blocks.len();
            let (l, r) = (blocks[k - 2], blocks[k - 1]);
            if l.2 <= r.2 {
                break;
            }
            let c = block_root(env, &ts[l.0..r.1], r.2, l.2)?;
            blocks.truncate(k - 2);
            blocks.push((l.0, r.1, c));
        }
    }
    let mut values = vec![0.0; n];
    for &(s, e, c) in &blocks {
        values[s..e].iter_mut().for_each(|v| *v = c);
    }
    let step = 1.0 / n as f64;
    let deriv = crate::environment::finite_difference(&values, step);
    let theta = ScalarField::Samples { start: 0.5 * step, step, values, derivative: Some(deriv) };
    OptimalPath::from_theta(env, theta, n, PathKind::Generic, None, Vec::new(), None)
}

/// Root of Σ e_i(c) = 0 over a block, bracketed by [lo, hi].
fn block_root(env: &EnvironmentModel, ts: &[f64], lo: f64, hi: f64) -> Result<f64> {
    let sum = |c: f64| -> Result<(f64, f64)> {
        let mut s = 0.0;
        let mut d = 0.0;
        for &t in ts {
            let (k, k1, k2) = env.kappa_all(t, c)?;
            s += c * k1 - k;
            d += c * k2;
        }
        Ok((s, d))
    };
    let (mut lo, mut hi) = (lo, hi);
    let mut x = 0.5 * (lo + hi);
    let mut width = hi - lo;
    for _ in 0..NEWTON_BUDGET {
        let (s, d) = sum(x)?;
        if s > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let mut nx = if d > 0.0 { x - s / d } else { f64::NAN };
        // bisect when Newton leaves the bracket or stops shrinking it
        if !(nx >= lo && nx <= hi) || hi - lo > 0.5 * width {
            nx = 0.5 * (lo + hi);
        }
        width = hi - lo;
        if (nx - x).abs() <= 4.0 * f64::EPSILON * x.abs() || hi - lo <= 4.0 * f64::EPSILON * x.abs() {
            return Ok(nx);
        }
        x = nx;
    }
    Err(Error::NonConvergence(format!("block root on {} cells did not settle; bracket [{lo}, {hi}]", ts.len())))
}

/// Closed-form constructions for monotone and single-turn θ̄.
pub fn solve_special_case(env: &EnvironmentModel, n: usize, case: SpecialCase) -> Result<OptimalPath> {
    let shape = classify_theta_bar(env, n)?;
    let brk = env.breakpoints();
    match (case, shape) {
        (SpecialCase::Nondecreasing, ThetaBarShape::Nondecreasing) => {
            OptimalPath::from_theta(
                env,
                env.theta_bar_field(),
                n,
                PathKind::Nondecreasing,
                None,
                Vec::new(),
                Some(IndicatorSet::full()),
            )
        }
        (SpecialCase::Nonincreasing, ThetaBarShape::Nonincreasing) => {
            let c = constant_root(env, &brk)?;
            let contact = IndicatorSet::empty();
            OptimalPath::from_theta(env, ScalarField::constant(c), n, PathKind::Nonincreasing, None, Vec::new(), Some(contact))
        }
        (SpecialCase::Mixed, ThetaBarShape::V { t_min }) => {
            let tb = env.clone();
            // F(t*) = ∫_0^{t*} e_s(θ̄_{t*}) ds, ≤ 0 at t_min, increasing after
            let f = |ts: f64| -> f64 {
                let c = tb.natural_speed(ts).unwrap().1;
                piecewise_gl(&brk, 0.0, ts, |s| tb.energy_density(s, c).unwrap_or(f64::NAN))
            };
            if f(1.0) <= 0.0 {
                return Err(Error::CaseMismatch("V-shaped theta_bar but the switch time lies beyond 1".into()));
            }
            let (a, b) = quad::bisect(f, t_min, 1.0, 1e-15, 200)?;
            let ts = 0.5 * (a + b);
            let (e1, e2) = (env.clone(), env.clone());
            let theta = ScalarField::custom_with_derivative(
                "theta_v",
                move |s| e1.natural_speed(s.max(ts).min(1.0)).unwrap().1,
                move |s| if s < ts { 0.0 } else { e2.theta_bar_derivative(s.min(1.0)).unwrap() },
            )
            .with_breakpoints(vec![ts]);
            let contact = IndicatorSet::interval(ts, 1.0);
            OptimalPath::from_theta(env, theta, n, PathKind::MixedV, Some(ts), vec![ts], Some(contact))
        }
        (SpecialCase::Mixed, ThetaBarShape::Lambda { t_max }) => {
            let tb = env.clone();
            // G(t*) = ∫_{t*}^1 e_s(θ̄_{t*}) ds, ≥ 0 at the peak
            let g = |ts: f64| -> f64 {
                let c = tb.natural_speed(ts).unwrap().1;
                piecewise_gl(&brk, ts, 1.0, |s| tb.energy_density(s, c).unwrap_or(f64::NAN))
            };
            if g(0.0) > 0.0 {
                return Err(Error::CaseMismatch("Lambda-shaped theta_bar but no switch time in [0, peak]".into()));
            }
            let (a, b) = quad::bisect(g, 0.0, t_max, 1e-15, 200)?;
            let ts = 0.5 * (a + b);
            let (e1, e2) = (env.clone(), env.clone());
            let theta = ScalarField::custom_with_derivative(
                "theta_lambda",
                move |s| e1.natural_speed(s.min(ts).max(0.0)).unwrap().1,
                move |s| if s >= ts { 0.0 } else { e2.theta_bar_derivative(s.max(0.0)).unwrap() },
            )
            .with_breakpoints(vec![ts]);
            let contact = IndicatorSet::interval(0.0, ts);
            OptimalPath::from_theta(env, theta, n, PathKind::MixedLambda, Some(ts), vec![ts], Some(contact))
        }
        (case, shape) => Err(Error::CaseMismatch(format!("requested {case:?} but theta_bar is {shape:?}"))),
    }
}

/// Root c of ∫_0^1 e_s(c) ds = 0.
fn constant_root(env: &EnvironmentModel, brk: &[f64]) -> Result<f64> {
    let (lo, hi) = (0..=64).try_fold((f64::INFINITY, 0.0f64), |(lo, hi), i| {
        let th = env.natural_speed(i as f64 / 64.0)?.1;
        Ok::<_, Error>((lo.min(th), hi.max(th)))
    })?;
    let total = |c: f64| piecewise_gl(brk, 0.0, 1.0, |s| env.energy_density(s, c).unwrap_or(f64::NAN));
    let (a, b) = quad::bisect(total, lo * (1.0 - 1e-9), hi * (1.0 + 1e-9), 1e-15, 200)?;
    Ok(0.5 * (a + b))
}

/// Picks the closed-form construction when θ̄ allows one, else the generic
/// solver.
pub fn solve_auto(env: &EnvironmentModel, n: usize) -> Result<OptimalPath> {
    match classify_theta_bar(env, n)? {
        ThetaBarShape::Nondecreasing => solve_special_case(env, n, SpecialCase::Nondecreasing),
        ThetaBarShape::Nonincreasing => solve_special_case(env, n, SpecialCase::Nonincreasing),
        ThetaBarShape::V { .. } | ThetaBarShape::Lambda { .. } => {
            solve_special_case(env, n, SpecialCase::Mixed).or_else(|_| solve_optimal_profile(env, n))
        }
        ThetaBarShape::Other => solve_optimal_profile(env, n),
    }
}

/// Residuals of the optimality conditions on the path's midpoint grid.
pub fn check_optimality(env: &EnvironmentModel, path: &OptimalPath) -> Result<KktReport> {
    check_with_energies(env, path).map(|r| r.0)
}

/// Report plus the partial energies K*(a)_{k/N}, k = 0..=N.
fn check_with_energies(env: &EnvironmentModel, path: &OptimalPath) -> Result<(KktReport, Vec<f64>)> {
    let n = path.grid;
    let th: Vec<f64> = (0..n).map(|i| path.theta.eval(mid(i, n))).collect();
    let mut e = vec![0.0; n + 1];
    for i in 0..n {
        e[i + 1] = e[i] + env.energy_density(mid(i, n), th[i])? / n as f64;
    }
    let monotonicity = th.windows(2).map(|w| (w[0] - w[1]).max(0.0)).fold(0.0, f64::max);
    let slackness = (1..n).map(|k| e[k] * (1.0 / th[k] - 1.0 / th[k - 1])).sum::<f64>().abs();
    let report = KktReport {
        monotonicity,
        terminal_energy: e[n].abs(),
        slackness,
        max_energy: e.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        min_theta: th.iter().cloned().fold(f64::INFINITY, f64::min),
        grid: n,
    };
    Ok((report, e))
}

/// l* = (α₁/2^{1/3}) ∫₀¹ (θ̇_s σ_s)^{2/3}/θ_s ds with σ_s² = κ''_s(θ_s).
pub fn correction_l_star(env: &EnvironmentModel, path: &OptimalPath) -> Result<f64> {
    if !path.theta.has_derivative() {
        return Err(Error::MissingDerivative("theta has no derivative attached".into()));
    }
    let mut bad = None;
    let mut integrand = |s: f64| {
        let th = path.theta.eval(s);
        let d = path.theta.derivative(s).unwrap();
        match env.d2_kappa(s, th) {
            Ok(k2) => (d.abs() * k2.sqrt()).powf(2.0 / 3.0) / th,
            Err(e) => {
                bad.get_or_insert(e);
                0.0
            }
        }
    };
    let v = if path.kind == PathKind::Generic {
        let n = path.grid;
        (0..n).map(|i| integrand(mid(i, n))).sum::<f64>() / n as f64
    } else {
        piecewise_gl(&path.breakpoints, 0.0, 1.0, &mut integrand)
    };
    if let Some(e) = bad {
        return Err(e);
    }
    Ok(takacs_constant() * v)
}
