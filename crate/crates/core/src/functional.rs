//! Rate functionals: the energy K*(b), the spine energy E(φ) and the
//! barrier functional H^{F,G}_{f,g}(h).

use serde::{Deserialize, Serialize};

use crate::airy::global_psi;
use crate::environment::{EnvironmentModel, IndicatorSet, ScalarField};
use crate::quad::GaussLegendre;
use crate::{takacs_constant, Error, Result};

/// |ḣ| at or below this is treated as zero by the sign checks.
pub const HDOT_ZERO: f64 = 1e-12;

/// Default number of uniform cells for H quadrature.
pub const DEFAULT_H_GRID: usize = 2048;

const ENERGY_PANELS: usize = 64;
const ENERGY_ORDER: usize = 10;

/// Barriers f < g, the sets F and G where they are active, and the weight h.
///
/// Off F the lower barrier is inactive and `f` may be −∞; off G the upper
/// barrier is inactive and `g` may be +∞.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BarrierSpec {
    pub f: ScalarField,
    pub g: ScalarField,
    pub f_set: IndicatorSet,
    pub g_set: IndicatorSet,
    pub h: ScalarField,
}

impl BarrierSpec {
    /// Checks f < g, f(0) < 0 < g(0), and {ḣ < 0} ⊆ F, {ḣ > 0} ⊆ G on the
    /// midpoints of an `n`-cell grid.
    pub fn validate(&self, n: usize) -> Result<()> {
        let (f0, g0) = (self.f.eval(0.0), self.g.eval(0.0));
        if !(f0 < 0.0 && 0.0 < g0) {
            return Err(Error::Precondition(format!("need f(0) < 0 < g(0), got f(0) = {f0}, g(0) = {g0}")));
        }
        self.validate_slopes(n)
    }

    /// The checks of `validate` without the condition at t = 0.
    pub fn validate_slopes(&self, n: usize) -> Result<()> {
        if !self.h.has_derivative() {
            return Err(Error::MissingDerivative("barrier weight h has no derivative".into()));
        }
        for i in 0..=n {
            let t = i as f64 / n as f64;
            let (f, g) = (self.f.eval(t), self.g.eval(t));
            if !(f < g) {
                return Err(Error::Precondition(format!("need f < g, got f = {f}, g = {g} at t = {t}")));
            }
            if i == n {
                break;
            }
            let s = (i as f64 + 0.5) / n as f64;
            let hd = self.h.derivative(s).unwrap();
            if hd < -HDOT_ZERO && !self.f_set.contains(s) {
                return Err(Error::Precondition(format!("h decreases at t = {s} outside F")));
            }
            if hd > HDOT_ZERO && !self.g_set.contains(s) {
                return Err(Error::Precondition(format!("h increases at t = {s} outside G")));
            }
        }
        Ok(())
    }

    /// Interior points where the integrand of H may jump or kink.
    pub fn breakpoints(&self, sigma: &ScalarField) -> Vec<f64> {
        let mut v = self.f_set.endpoints();
        v.extend(self.g_set.endpoints());
        for fld in [&self.f, &self.g, &self.h, sigma] {
            v.extend(fld.breakpoints());
        }
        v
    }

    /// Integrand of H at a point s that is not a region endpoint.
    pub fn integrand(&self, sigma: &ScalarField, s: f64) -> f64 {
        let hd = self.h.derivative(s).unwrap_or_else(|| self.h.derivative_or_fd(s));
        let sg = sigma.eval(s);
        let c = takacs_constant();
        match (self.f_set.contains(s), self.g_set.contains(s)) {
            (true, true) => {
                let (f, g) = (self.f.eval(s), self.g.eval(s));
                let d = g - f;
                let x = d * d * d * hd / (sg * sg);
                hd * g + sg * sg / (d * d) * global_psi().eval(x)
            }
            (false, true) => hd * self.g.eval(s) + c * (hd.max(0.0) * sg).powf(2.0 / 3.0),
            // ḣg + ḣ(f − g) written as ḣf so an infinite g never enters
            (true, false) => hd * self.f.eval(s) + c * ((-hd).max(0.0) * sg).powf(2.0 / 3.0),
            (false, false) => {
                let g = self.g.eval(s);
                if hd.abs() <= HDOT_ZERO || !g.is_finite() {
                    0.0
                } else {
                    hd * g
                }
            }
        }
    }
}

/// Quadrature rule for H.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum HRule {
    /// Composite midpoint, one node per piece.
    Midpoint,
    /// Gauss–Legendre of the given order on each piece.
    Gauss(usize),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HOptions {
    /// Number of uniform cells on [0, 1].
    pub grid: usize,
    pub rule: HRule,
    /// Extra split points, e.g. the step nodes of an ODE trajectory.
    pub breakpoints: Vec<f64>,
}

impl Default for HOptions {
    fn default() -> Self {
        HOptions { grid: DEFAULT_H_GRID, rule: HRule::Midpoint, breakpoints: Vec::new() }
    }
}

/// A quadrature value with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HValue {
    pub value: f64,
    pub error: f64,
}

/// H^{F,G}_{f,g}(h) truncated at t, on the default grid.
pub fn eval_h(spec: &BarrierSpec, sigma: &ScalarField, t: f64) -> Result<f64> {
    eval_h_with(spec, sigma, t, &HOptions::default()).map(|v| v.value)
}

/// H truncated at t with an error estimate from halving the grid (midpoint)
/// or halving the order (Gauss).
pub fn eval_h_with(spec: &BarrierSpec, sigma: &ScalarField, t: f64, opts: &HOptions) -> Result<HValue> {
    spec.validate(opts.grid.max(64))?;
    let value = integral_h(spec, sigma, 0.0, t, opts)?;
    let coarse = match opts.rule {
        HRule::Midpoint => HOptions { grid: (opts.grid / 2).max(1), ..opts.clone() },
        HRule::Gauss(k) => HOptions { rule: HRule::Gauss((k / 2).max(1)), ..opts.clone() },
    };
    let rough = integral_h(spec, sigma, 0.0, t, &coarse)?;
    let error = match opts.rule {
        HRule::Midpoint => (value - rough).abs() / 3.0,
        HRule::Gauss(_) => (value - rough).abs(),
    };
    Ok(HValue { value, error })
}

/// ∫_{t1}^{t2} of the H integrand. Does not re-validate the spec.
pub fn integral_h(spec: &BarrierSpec, sigma: &ScalarField, t1: f64, t2: f64, opts: &HOptions) -> Result<f64> {
    Ok(running_h_from(spec, sigma, t1, &[t2], opts)?[0])
}

/// H_t at each of the sorted times `ts`.
pub fn running_h(spec: &BarrierSpec, sigma: &ScalarField, ts: &[f64], opts: &HOptions) -> Result<Vec<f64>> {
    running_h_from(spec, sigma, 0.0, ts, opts)
}

fn running_h_from(spec: &BarrierSpec, sigma: &ScalarField, start: f64, ts: &[f64], opts: &HOptions) -> Result<Vec<f64>> {
    if ts.windows(2).any(|w| w[1] < w[0]) || ts.iter().any(|t| *t < start || *t > 1.0) {
        return Err(Error::Invalid("running_h needs sorted times inside [start, 1]".into()));
    }
    let Some(&end) = ts.last() else { return Ok(Vec::new()) };
    let n = opts.grid.max(1);
    let mut knots: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    knots.extend(spec.breakpoints(sigma));
    knots.extend(opts.breakpoints.iter().copied());
    knots.extend(ts.iter().copied());
    knots.push(start);
    knots.retain(|k| *k >= start && *k <= end);
    knots.sort_by(f64::total_cmp);
    knots.dedup_by(|a, b| (*a - *b).abs() <= 1e-15);
    let gl = match opts.rule {
        HRule::Gauss(k) => Some(GaussLegendre::new(k)),
        HRule::Midpoint => None,
    };
    let mut out = Vec::with_capacity(ts.len());
    let mut acc = 0.0;
    let mut next = 0;
    while next < ts.len() && ts[next] <= start {
        out.push(0.0);
        next += 1;
    }
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        acc += match &gl {
            None => (b - a) * spec.integrand(sigma, 0.5 * (a + b)),
            Some(gl) => gl.integrate(a, b, |s| spec.integrand(sigma, s)),
        };
        while next < ts.len() && ts[next] <= b + 1e-15 {
            out.push(acc);
            next += 1;
        }
    }
    while out.len() < ts.len() {
        out.push(acc);
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("H integrand is not finite".into()));
    }
    Ok(out)
}

fn energy_integral<F: Fn(f64) -> Result<f64>>(breaks: Vec<f64>, t: f64, f: F) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("time {t} outside [0, 1]")));
    }
    let gl = GaussLegendre::new(ENERGY_ORDER);
    let mut knots: Vec<f64> = (0..=ENERGY_PANELS).map(|i| t * i as f64 / ENERGY_PANELS as f64).collect();
    knots.extend(breaks.into_iter().filter(|b| *b > 0.0 && *b < t));
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let mut acc = 0.0;
    let mut err = None;
    for w in knots.windows(2) {
        acc += gl.integrate(w[0], w[1], |s| match f(s) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
    }
    Ok(acc)
}

/// K*(b)_t = ∫₀^t κ*_s(b_s) ds.
pub fn energy_k(env: &EnvironmentModel, b: &ScalarField, t: f64) -> Result<f64> {
    let mut br = env.breakpoints();
    br.extend(b.breakpoints());
    energy_integral(br, t, |s| env.kappa_star(s, b.eval(s)))
}

/// E(φ)_t = ∫₀^t φ_s κ'_s(φ_s) − κ_s(φ_s) ds.
pub fn spine_energy(env: &EnvironmentModel, phi: &ScalarField, t: f64) -> Result<f64> {
    let mut br = env.breakpoints();
    br.extend(phi.breakpoints());
    energy_integral(br, t, |s| env.energy_density(s, phi.eval(s)))
}
