//! Zeros of Ai and roots of the Airy cross-Wronskian.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::eval::{ai, ai_prime, airy_phase, airy_phase_derivative, airy_phase_diff};
use crate::{quad, Error, Result};

/// α_n, the n-th zero of Ai (n ≥ 1), counted from the origin.
///
/// Solved as Θ(α_n) = −π/2 − (n−1)π on the Airy phase, then polished by a
/// Newton step on Ai.
pub fn airy_zero(n: usize) -> f64 {
    assert!(n >= 1, "airy_zero needs n >= 1");
    let target = -0.5 * PI - (n as f64 - 1.0) * PI;
    let t = 3.0 * PI * (4.0 * n as f64 - 1.0) / 8.0;
    let guess = -t.powf(2.0 / 3.0) * (1.0 + 5.0 / 48.0 / (t * t));
    let mut lo = guess - 1.0;
    let mut hi = (guess + 1.0).min(0.0);
    while airy_phase(lo) > target {
        lo -= 1.0;
    }
    while airy_phase(hi) < target {
        hi += 0.5;
    }
    let (a, b) = quad::bisect(|z| airy_phase(z) - target, lo, hi, 1e-15, 200)
        .expect("Airy phase is monotone, the bracket always holds");
    let mut z = 0.5 * (a + b);
    let d = ai_prime(z);
    if d != 0.0 {
        let step = ai(z) / d;
        if step.abs() < 1e-10 {
            z -= step;
        }
    }
    z
}

/// First `count` zeros of Ai in decreasing order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AiryZeroTable {
    pub zeros: Vec<f64>,
    pub count: usize,
}

impl AiryZeroTable {
    pub fn new(count: usize) -> Self {
        let zeros = (1..=count).map(airy_zero).collect();
        AiryZeroTable { zeros, count }
    }
}

/// Root λ_n^h of the cross-Wronskian Ai(λ)Bi(λ+c) − Bi(λ)Ai(λ+c),
/// c = (2h)^{1/3}.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CrossWronskianRoot {
    pub h: f64,
    pub n: usize,
    pub lambda1: f64,
    pub bracket: (f64, f64),
}

impl CrossWronskianRoot {
    /// |sin(Θ(λ+c) − Θ(λ))|: the cross-Wronskian divided by M(λ)M(λ+c).
    pub fn residual(&self) -> f64 {
        normalized_wronskian(self.h, self.lambda1).abs()
    }
}

/// Cross-Wronskian divided by the moduli, sin(Θ(λ+c) − Θ(λ)).
pub fn normalized_wronskian(h: f64, lambda: f64) -> f64 {
    let c = (2.0 * h).cbrt();
    airy_phase_diff(lambda, lambda + c).sin()
}

/// Maximum number of times the initial bracket is widened before giving up.
pub const MAX_BRACKET_EXTENSIONS: usize = 40;

/// λ_n^h, the n-th largest root of the cross-Wronskian.
pub fn lambda_n(h: f64, n: usize) -> Result<f64> {
    cross_wronskian_root(h, n, MAX_BRACKET_EXTENSIONS).map(|r| r.lambda1)
}

/// Full root record for λ_n^h.
///
/// The phase difference Θ(λ+c) − Θ(λ) is decreasing in λ and equals nπ
/// exactly at λ_n^h. The starting bracket comes from the bounds
/// −π²n²/2 − h ≤ μ_n ≤ −π²n²/2 on μ_n = (h^{2/3}/2^{1/3})λ_n^h.
pub fn cross_wronskian_root(h: f64, n: usize, max_extensions: usize) -> Result<CrossWronskianRoot> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Domain(format!("lambda_n needs h > 0, got {h}")));
    }
    if n == 0 {
        return Err(Error::Domain("lambda_n needs n >= 1".into()));
    }
    let c = (2.0 * h).cbrt();
    let scale = 2f64.cbrt() / h.powf(2.0 / 3.0);
    let base = -PI * PI * (n * n) as f64 / 2.0;
    let target = n as f64 * PI;
    let g = |l: f64| airy_phase_diff(l, l + c) - target;
    let mut lo = (base - h) * scale;
    let mut hi = base * scale;
    let pad = 1e-9 * (1.0 + hi.abs());
    lo -= pad;
    hi += pad;
    let mut ext = 0;
    while g(lo) < 0.0 || g(hi) > 0.0 {
        if ext >= max_extensions {
            return Err(Error::BracketFailure(format!(
                "lambda_n(h = {h}, n = {n}): no sign change after {ext} extensions"
            )));
        }
        let w = (hi - lo).max(1.0);
        if g(lo) < 0.0 {
            lo -= w;
        }
        if g(hi) > 0.0 {
            hi += w;
        }
        ext += 1;
    }
    // Safeguarded Newton on the decreasing phase difference.
    let dg = |l: f64| airy_phase_derivative(l + c) - airy_phase_derivative(l);
    let scale_x = hi.abs().max(1.0);
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = g(x);
        if fx == 0.0 {
            lo = x;
            hi = x;
            break;
        }
        if fx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = dg(x);
        let mut nx = if d < 0.0 { x - fx / d } else { f64::NAN };
        if !(nx > lo && nx < hi) {
            nx = 0.5 * (lo + hi);
        }
        let done = (nx - x).abs() <= 2.0 * f64::EPSILON * scale_x || hi - lo <= 4.0 * f64::EPSILON * scale_x;
        x = nx;
        if done {
            break;
        }
    }
    // Report a tight bracket that straddles the root.
    let mut delta = 4.0 * f64::EPSILON * scale_x;
    let bracket = loop {
        let (a, b) = (x - delta, x + delta);
        if g(a) >= 0.0 && g(b) <= 0.0 {
            break (a, b);
        }
        delta *= 4.0;
        if delta > 1e-6 * scale_x {
            break (lo, hi);
        }
    };
    Ok(CrossWronskianRoot { h, n, lambda1: x, bracket })
}
