//! The boundary ODEs φ_t g_t = φ_0 λ + H_t^{F,G}(f, g, φ).
//!
//! Differentiating gives φ ġ = R(t, g) with R the non-φ̇g part of the H
//! integrand. On F∩G the state is u = (g − f)³ instead of g: there
//! u' = 3σ²Ψ(uφ̇/σ²)/φ − 3u^{2/3}ḟ stays finite as g meets f, so the
//! stopping time is a clean root of u.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::airy::global_psi;
use crate::environment::{EnvironmentModel, IndicatorSet, ScalarField};
use crate::functional::{running_h, BarrierSpec, HOptions, HRule};
use crate::optimal_path::{sigma_field, OptimalPath};
use crate::{takacs_constant, Error, Result};

/// Everything in the ODE except λ: weight φ, σ, lower barrier f and the
/// sets F, G.
#[derive(Debug, Clone)]
pub struct OdeProblem {
    pub phi: ScalarField,
    pub sigma: ScalarField,
    pub f: ScalarField,
    pub f_set: IndicatorSet,
    pub g_set: IndicatorSet,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// g − f at or below this stops the integration.
    pub eps_stop: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-12, atol: 1e-13, eps_stop: 1e-6, max_steps: 200_000 }
    }
}

impl OdeProblem {
    /// Maximal-displacement regime: no lower barrier, weight θ.
    pub fn max_displacement(env: &EnvironmentModel, path: &OptimalPath) -> Self {
        OdeProblem {
            phi: path.theta.clone(),
            sigma: sigma_field(env, &path.theta),
            f: ScalarField::constant(f64::NEG_INFINITY),
            f_set: IndicatorSet::empty(),
            g_set: IndicatorSet::full(),
        }
    }

    /// Consistent-maximal-displacement regime: lower barrier −μ on [0, 1],
    /// upper set the contact set {K*(a) = 0}.
    pub fn cmd(env: &EnvironmentModel, path: &OptimalPath, mu: f64) -> Self {
        OdeProblem {
            phi: path.theta.clone(),
            sigma: sigma_field(env, &path.theta),
            f: ScalarField::constant(-mu),
            f_set: IndicatorSet::full(),
            g_set: path.contact_set.clone(),
        }
    }

    /// Same problem with the lower barrier moved down by μ.
    pub fn shifted_barrier(&self, mu: f64) -> Self {
        OdeProblem { f: self.f.shifted(-mu), ..self.clone() }
    }

    fn knots(&self) -> Vec<f64> {
        let mut k = vec![0.0, 1.0];
        k.extend(self.f_set.endpoints());
        k.extend(self.g_set.endpoints());
        for fld in [&self.phi, &self.sigma, &self.f] {
            k.extend(fld.breakpoints());
        }
        k.sort_by(f64::total_cmp);
        k.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        k
    }

    /// R(t, g)/φ_t: the right-hand side of ġ.
    pub fn drift(&self, t: f64, g: f64) -> f64 {
        let (in_f, in_g) = (self.f_set.contains(t), self.g_set.contains(t));
        self.drift_in(t, g, in_f, in_g)
    }

    fn drift_in(&self, t: f64, g: f64, in_f: bool, in_g: bool) -> f64 {
        let phi = self.phi.eval(t);
        let pd = self.phi.derivative_or_fd(t);
        let sg = self.sigma.eval(t);
        let c = takacs_constant();
        let r = match (in_f, in_g) {
            (true, true) => {
                let d = g - self.f.eval(t);
                sg * sg / (d * d) * global_psi().eval(d * d * d * pd / (sg * sg))
            }
            (false, true) => c * (pd.max(0.0) * sg).powf(2.0 / 3.0),
            (true, false) => pd * (self.f.eval(t) - g) + c * ((-pd).max(0.0) * sg).powf(2.0 / 3.0),
            (false, false) => 0.0,
        };
        r / phi
    }

    /// u' on F∩G, u = (g − f)³.
    fn drift_cubed(&self, t: f64, u: f64) -> f64 {
        let phi = self.phi.eval(t);
        let pd = self.phi.derivative_or_fd(t);
        let sg = self.sigma.eval(t);
        let fd = self.f.derivative_or_fd(t);
        let d = u.cbrt();
        3.0 * sg * sg * global_psi().eval(u * pd / (sg * sg)) / phi - 3.0 * d * d * fd
    }

    /// Barrier spec whose upper barrier is the solved trajectory.
    pub fn spec_for(&self, sol: &OdeSolution) -> BarrierSpec {
        let s = sol.clone();
        BarrierSpec {
            f: self.f.clone(),
            g: ScalarField::custom("g_lambda", move |t| s.g_at(t)),
            f_set: self.f_set.clone(),
            g_set: self.g_set.clone(),
            h: self.phi.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
enum StateKind {
    G,
    Cubed,
}

/// One accepted Dormand–Prince step with its dense-output data.
#[derive(Debug, Clone)]
struct Step {
    t0: f64,
    h: f64,
    /// Last valid time; below t0 + h for the step that ends at an event.
    end: f64,
    y0: f64,
    k: [f64; 7],
    kind: StateKind,
}

impl Step {
    fn y_at(&self, t: f64) -> f64 {
        let s = ((t - self.t0) / self.h).clamp(0.0, 1.0);
        let mut acc = 0.0;
        for (k, p) in self.k.iter().zip(&DENSE) {
            acc += k * s * (p[0] + s * (p[1] + s * (p[2] + s * p[3])));
        }
        self.y0 + self.h * acc
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OdeSolution {
    pub lambda: f64,
    /// t_λ: 1, or the first time g − f ≤ ε_stop.
    pub t_max: f64,
    /// (t, g_t) at every accepted step.
    pub samples: Vec<(f64, f64)>,
    pub hit_lower: bool,
    #[serde(skip)]
    steps: Arc<Vec<Step>>,
    #[serde(skip)]
    f: Option<ScalarField>,
}

impl OdeSolution {
    /// g at t ∈ [0, t_λ] from the dense output.
    pub fn g_at(&self, t: f64) -> f64 {
        let steps = &self.steps;
        if steps.is_empty() {
            return self.lambda;
        }
        let t = t.clamp(0.0, self.t_max);
        let i = steps.partition_point(|s| s.end < t).min(steps.len() - 1);
        let st = &steps[i];
        let y = st.y_at(t);
        match st.kind {
            StateKind::G => y,
            // u is only resolved to ~1e-15 next to its root
            StateKind::Cubed => self.f.as_ref().map_or(f64::NAN, |f| f.eval(t)) + y.max(0.0).cbrt(),
        }
    }

    /// g^λ_1, or NaN when the trajectory stopped before 1.
    pub fn terminal(&self) -> f64 {
        if self.hit_lower {
            f64::NAN
        } else {
            self.samples.last().map_or(f64::NAN, |s| s.1)
        }
    }

    /// Step nodes of the integration.
    pub fn nodes(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.steps.iter().map(|s| s.t0).collect();
        v.push(self.t_max);
        v
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
/// Fourth-order continuous extension (Shampine).
const DENSE: [[f64; 4]; 7] = [
    [1.0, -8048581381.0 / 2820520608.0, 8663915743.0 / 2820520608.0, -12715105075.0 / 11282082432.0],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200.0 / 32700410799.0, -68118460800.0 / 10900136933.0, 87487479700.0 / 32700410799.0],
    [0.0, -1754552775.0 / 470086768.0, 14199869525.0 / 1410260304.0, -10690763975.0 / 1880347072.0],
    [0.0, 127303824393.0 / 49829197408.0, -318862633887.0 / 49829197408.0, 701980252875.0 / 199316789632.0],
    [0.0, -282668133.0 / 205662961.0, 2019193451.0 / 616988883.0, -1453857185.0 / 822651844.0],
    [0.0, 40617522.0 / 29380423.0, -110615467.0 / 29380423.0, 69997945.0 / 29380423.0],
];

/// Solves for g^λ on [0, t_λ].
pub fn solve_g_lambda(problem: &OdeProblem, lambda: f64, opts: &OdeOptions) -> Result<OdeSolution> {
    let f0 = problem.f.eval(0.0);
    if !(lambda > f0) {
        return Err(Error::Precondition(format!("need lambda > f(0) = {f0}, got {lambda}")));
    }
    if !problem.phi.has_derivative() {
        return Err(Error::MissingDerivative("phi has no derivative".into()));
    }
    let knots = problem.knots();
    let mut steps: Vec<Step> = Vec::new();
    let mut samples = vec![(0.0, lambda)];
    let mut g = lambda;
    let mut t = 0.0;
    let mut h = 1e-3;
    let mut total = 0;
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        let m = 0.5 * (a + b);
        let (in_f, in_g) = (problem.f_set.contains(m), problem.g_set.contains(m));
        let kind = if in_f && in_g { StateKind::Cubed } else { StateKind::G };
        let rhs = |s: f64, y: f64| match kind {
            StateKind::Cubed => problem.drift_cubed(s, y),
            StateKind::G => problem.drift_in(s, y, in_f, in_g),
        };
        let gap = |s: f64, y: f64| match kind {
            StateKind::Cubed => y.cbrt(),
            StateKind::G => y - problem.f.eval(s),
        };
        let mut y = match kind {
            StateKind::Cubed => (g - problem.f.eval(a)).powi(3),
            StateKind::G => g,
        };
        let mut k0 = rhs(t, y);
        while t < b {
            total += 1;
            if total > opts.max_steps {
                return Err(Error::NonConvergence(format!("step budget exhausted at t = {t}")));
            }
            let last = h >= b - t;
            let hh = if last { b - t } else { h };
            let mut k = [0.0; 7];
            k[0] = k0;
            for i in 1..7 {
                let yi = y + hh * (0..i).map(|j| A[i][j] * k[j]).sum::<f64>();
                k[i] = rhs(t + C[i] * hh, yi);
            }
            let y_new = y + hh * (0..7).map(|i| B[i] * k[i]).sum::<f64>();
            let err = hh * (0..7).map(|i| E[i] * k[i]).sum::<f64>();
            let scale = opts.atol + opts.rtol * y.abs().max(y_new.abs());
            let ratio = (err / scale).abs();
            if !y_new.is_finite() || !ratio.is_finite() || ratio > 1.0 {
                h = hh * if ratio.is_finite() { (0.9 * ratio.powf(-0.2)).clamp(0.1, 0.5) } else { 0.25 };
                if h < 1e-15 * (1.0 + t) {
                    return Err(Error::StepCollapse { t, msg: "step size underflow".into() });
                }
                continue;
            }
            let t_new = if last { b } else { t + hh };
            let step = Step { t0: t, h: hh, end: t_new, y0: y, k, kind };
            if gap(t_new, y_new) <= opts.eps_stop && problem.f.eval(t_new).is_finite() && in_f {
                // event: first time the gap falls to eps_stop inside this step
                let mut lo = t;
                let mut hi = t_new;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if gap(mid, step.y_at(mid)) > opts.eps_stop {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-16 * hi.max(1.0) {
                        break;
                    }
                }
                let te = hi;
                steps.push(Step { end: te, ..step.clone() });
                let sol_f = Some(problem.f.clone());
                let mut sol = OdeSolution { lambda, t_max: te, samples, hit_lower: true, steps: Arc::new(steps), f: sol_f };
                let ge = sol.g_at(te);
                sol.samples.push((te, ge));
                return Ok(sol);
            }
            steps.push(step);
            y = y_new;
            t = t_new;
            k0 = k[6];
            g = match kind {
                StateKind::Cubed => problem.f.eval(t) + y.cbrt(),
                StateKind::G => y,
            };
            samples.push((t, g));
            h = hh * (0.9 * ratio.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
            if last {
                h = h.max(1e-6);
            }
        }
    }
    Ok(OdeSolution { lambda, t_max: 1.0, samples, hit_lower: false, steps: Arc::new(steps), f: Some(problem.f.clone()) })
}

fn lower_start(problem: &OdeProblem) -> f64 {
    let f0 = problem.f.eval(0.0);
    f0 + 1e-9 * (1.0 + f0.abs())
}

/// Smallest λ with t_λ = 1, to `tol` by bisection; −∞ when there is no
/// lower barrier.
pub fn find_lambda_c(problem: &OdeProblem, opts: &OdeOptions, tol: f64) -> Result<f64> {
    if problem.f_set.is_empty() || !problem.f.eval(0.0).is_finite() {
        return Ok(f64::NEG_INFINITY);
    }
    let survives = |l: f64| solve_g_lambda(problem, l, opts).map(|s| !s.hit_lower);
    let mut lo = lower_start(problem);
    if survives(lo)? {
        return Ok(problem.f.eval(0.0));
    }
    let mut hi = lo + 1.0;
    let mut n = 0;
    while !survives(hi)? {
        lo = hi;
        hi = problem.f.eval(0.0) + 2.0 * (hi - problem.f.eval(0.0));
        n += 1;
        if n > 60 {
            return Err(Error::BracketFailure("trajectory hits the lower barrier for every lambda tried".into()));
        }
    }
    while hi - lo > tol {
        let m = 0.5 * (lo + hi);
        if survives(m)? {
            hi = m;
        } else {
            lo = m;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// λ* with g^{λ*}_1 = 0, by bisection to `tol`. The upper end starts at
/// max(−l* + 1, 1) and doubles until g_1 > 0.
pub fn find_lambda_star(problem: &OdeProblem, l_star: f64, opts: &OdeOptions, tol: f64) -> Result<f64> {
    // sign of g^λ_1, a trajectory stopped early counting as negative
    let value = |l: f64| -> Result<f64> {
        let s = solve_g_lambda(problem, l, opts)?;
        Ok(if s.hit_lower { -1.0 } else { s.terminal() })
    };
    let f0 = problem.f.eval(0.0);
    let mut lo = if f0.is_finite() { lower_start(problem) } else { -1.0 };
    let v_lo = value(lo)?;
    if v_lo > 0.0 {
        if f0.is_finite() && v_lo <= tol {
            // the root sits between f(0) and the first admissible start
            return Ok(f0.max(0.0));
        }
        if !f0.is_finite() {
            let mut step = 1.0;
            while value(lo)? > 0.0 {
                lo -= step;
                step *= 2.0;
                if step > 1e9 {
                    return Err(Error::RootNotFound("g_1 stays positive".into()));
                }
            }
        } else {
            return Err(Error::RootNotFound(format!("g_1 = {v_lo} > 0 already at lambda = {lo}")));
        }
    }
    let mut hi = (-l_star + 1.0).max(1.0).max(lo + 1.0);
    let mut n = 0;
    while value(hi)? <= 0.0 {
        lo = hi;
        hi *= 2.0;
        n += 1;
        if n > 60 {
            return Err(Error::BracketFailure("g_1 never becomes positive".into()));
        }
    }
    while hi - lo > tol {
        let m = 0.5 * (lo + hi);
        if value(m)? > 0.0 {
            hi = m;
        } else {
            lo = m;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// g^0_1, the centring constant of the selected maximum.
pub fn selection_frontier(problem: &OdeProblem, opts: &OdeOptions) -> Result<f64> {
    let s = solve_g_lambda(problem, 0.0, opts)?;
    if s.hit_lower {
        return Err(Error::Precondition(format!("lambda = 0 is below lambda_c: stopped at t = {}", s.t_max)));
    }
    Ok(s.terminal())
}

/// max |φ_t g_t − φ_0 λ − H_t| over the samples, H recomputed by
/// Gauss–Legendre quadrature on the step mesh.
///
/// A stopping sample is skipped: the integrand grows like (t_λ − t)^{-2/3}
/// there, so H_{t_λ} carries the cube root of the state error.
pub fn integral_residual(problem: &OdeProblem, sol: &OdeSolution) -> Result<f64> {
    let spec = problem.spec_for(sol);
    let keep = sol.samples.len() - usize::from(sol.hit_lower);
    let ts: Vec<f64> = sol.samples[..keep].iter().map(|s| s.0).collect();
    let opts = HOptions { grid: 16, rule: HRule::Gauss(8), breakpoints: sol.nodes() };
    let hs = running_h(&spec, &problem.sigma, &ts, &opts)?;
    let phi0 = problem.phi.eval(0.0);
    Ok(ts
        .iter()
        .zip(hs)
        .map(|(t, h)| (problem.phi.eval(*t) * sol.g_at(*t) - phi0 * sol.lambda - h).abs())
        .fold(0.0, f64::max))
}

/// Largest |∂_g drift| seen on a grid of `n` points between two
/// trajectories: a Lipschitz constant for the Gronwall bound.
pub fn drift_lipschitz(problem: &OdeProblem, lo: &OdeSolution, hi: &OdeSolution, n: usize) -> f64 {
    let end = lo.t_max.min(hi.t_max);
    let mut best = 0.0f64;
    for i in 0..n {
        let t = end * (i as f64 + 0.5) / n as f64;
        let (a, b) = (lo.g_at(t), hi.g_at(t));
        for j in 0..=4 {
            let x = a + (b - a) * j as f64 / 4.0;
            let e = 1e-6 * (1.0 + x.abs());
            let d = (problem.drift(t, x + e) - problem.drift(t, x - e)) / (2.0 * e);
            if d.is_finite() {
                best = best.max(d.abs());
            }
        }
    }
    best
}
