//! Ai, Bi and their derivatives for real arguments.
//!
//! On [-SERIES_MAX, SERIES_MAX] the Maclaurin series is summed in
//! double-double arithmetic, which removes the cancellation that plain f64
//! summation suffers for negative arguments and for Ai at positive ones.
//! Outside that window the classical asymptotic expansions are used.

use std::f64::consts::PI;

use crate::{Error, Result};

/// Width of the series window.
pub const SERIES_MAX: f64 = 9.0;

const C1: Dd = Dd(0.3550280538878172, 2.05233632436212e-17);
const C2: Dd = Dd(0.2588194037928068, -2.522243111610832e-17);
const SQRT3: Dd = Dd(1.7320508075688772, 1.0035084221806903e-16);

/// Values of Ai, Ai', Bi, Bi' at one point.
///
/// When produced by [`airy_scaled`] with `x > 0`, `ai`/`aip` carry a factor
/// `e^{ζ}` and `bi`/`bip` a factor `e^{-ζ}`, with `ζ = (2/3) x^{3/2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Airy {
    pub ai: f64,
    pub aip: f64,
    pub bi: f64,
    pub bip: f64,
}

/// ζ = (2/3)|x|^{3/2}.
pub fn zeta(x: f64) -> f64 {
    let y = x.abs();
    2.0 / 3.0 * y * y.sqrt()
}

/// Scaled Airy values (see [`Airy`]). Never overflows.
pub fn airy_scaled(x: f64) -> Airy {
    if x.abs() <= SERIES_MAX {
        let v = series(x);
        if x > 0.0 {
            let z = zeta(x);
            let (up, dn) = (z.exp(), (-z).exp());
            Airy { ai: v.ai * up, aip: v.aip * up, bi: v.bi * dn, bip: v.bip * dn }
        } else {
            v
        }
    } else if x > 0.0 {
        asymptotic_positive(x)
    } else {
        asymptotic_negative(-x).0
    }
}

/// Unscaled Ai, Ai', Bi, Bi'. Fails with an overflow error when Bi(x) exceeds
/// the floating range.
pub fn airy(x: f64) -> Result<Airy> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("non-finite Airy argument {x}")));
    }
    let s = airy_scaled(x);
    if x <= 0.0 {
        return Ok(s);
    }
    let z = zeta(x);
    let up = z.exp();
    if !up.is_finite() || !(s.bip * up).is_finite() {
        return Err(Error::Overflow(format!("Bi({x}) exceeds the f64 range")));
    }
    let dn = (-z).exp();
    Ok(Airy { ai: s.ai * dn, aip: s.aip * dn, bi: s.bi * up, bip: s.bip * up })
}

/// Ai(x). Underflows gracefully to 0 for large positive x.
pub fn ai(x: f64) -> f64 {
    let s = airy_scaled(x);
    if x > 0.0 {
        s.ai * (-zeta(x)).exp()
    } else {
        s.ai
    }
}

/// Ai'(x).
pub fn ai_prime(x: f64) -> f64 {
    let s = airy_scaled(x);
    if x > 0.0 {
        s.aip * (-zeta(x)).exp()
    } else {
        s.aip
    }
}

/// Bi(x), with an overflow error past x ≈ 104.
pub fn bi(x: f64) -> Result<f64> {
    airy(x).map(|a| a.bi)
}

/// Bi'(x), with an overflow error past x ≈ 104.
pub fn bi_prime(x: f64) -> Result<f64> {
    airy(x).map(|a| a.bip)
}

/// Continuous phase Θ with Ai = M cos Θ and Bi = M sin Θ, M > 0.
///
/// Θ is increasing, Θ(0) = π/3 and Θ → π/2 as x → ∞.
pub fn airy_phase(x: f64) -> f64 {
    if x >= 0.0 {
        if x <= SERIES_MAX {
            let v = series(x);
            v.bi.atan2(v.ai)
        } else {
            let s = asymptotic_positive(x);
            let ratio = s.ai / s.bi * (-2.0 * zeta(x)).exp();
            0.5 * PI - ratio.atan()
        }
    } else if x >= -SERIES_MAX {
        let v = series(x);
        let raw = v.bi.atan2(v.ai);
        let rough = 0.25 * PI - zeta(x);
        raw + 2.0 * PI * ((rough - raw) / (2.0 * PI)).round()
    } else {
        let (_, p, q) = asymptotic_negative(-x);
        q.atan2(p) - zeta(x) + 0.25 * PI
    }
}

/// Θ(x2) − Θ(x1) for x1 < x2, computed without cancelling large phases.
pub fn airy_phase_diff(x1: f64, x2: f64) -> f64 {
    if x2 < -SERIES_MAX {
        let (y1, y2) = (-x1, -x2);
        let (_, p1, q1) = asymptotic_negative(y1);
        let (_, p2, q2) = asymptotic_negative(y2);
        // ζ(y1) − ζ(y2) = (2/3)(y1³ − y2³)/(y1^{3/2} + y2^{3/2})
        let dy = x2 - x1;
        let dz = 2.0 / 3.0 * dy * (y1 * y1 + y1 * y2 + y2 * y2)
            / (y1 * y1.sqrt() + y2 * y2.sqrt());
        (q2.atan2(p2) - q1.atan2(p1)) + dz
    } else {
        airy_phase(x2) - airy_phase(x1)
    }
}

/// Θ'(x) = 1/(π M(x)²).
pub fn airy_phase_derivative(x: f64) -> f64 {
    if x < -SERIES_MAX {
        let y = -x;
        let (_, p, q) = asymptotic_negative(y);
        y.sqrt() / (p * p + q * q)
    } else if x > 0.0 {
        let s = airy_scaled(x);
        let z = zeta(x);
        let r = s.ai / s.bi * (-2.0 * z).exp();
        (-2.0 * z).exp() / (PI * s.bi * s.bi * (1.0 + r * r))
    } else {
        let v = series(x);
        1.0 / (PI * (v.ai * v.ai + v.bi * v.bi))
    }
}

/// log M(x) where M² = Ai² + Bi².
pub fn airy_log_modulus(x: f64) -> f64 {
    let s = airy_scaled(x);
    if x > 0.0 {
        let z = zeta(x);
        let r = s.ai / s.bi * (-2.0 * z).exp();
        z + s.bi.abs().ln() + 0.5 * (r * r).ln_1p()
    } else {
        0.5 * (s.ai * s.ai + s.bi * s.bi).ln()
    }
}

fn series(x: f64) -> Airy {
    let xd = Dd::from(x);
    let x3 = xd * xd * xd;
    // f = Σ t_k, g = Σ s_k, f' = Σ d_k, g' = Σ e_k
    let mut f = Dd::from(1.0);
    let mut g = xd;
    let mut fp = Dd::from(0.0);
    let mut gp = Dd::from(1.0);
    let mut t = Dd::from(1.0);
    let mut s = xd;
    let mut d = xd * xd * 0.5;
    let mut e = Dd::from(1.0);
    fp = fp + d;
    let mut biggest = 1.0f64.max(x.abs());
    for k in 1..200 {
        let kf = k as f64;
        t = t * x3 / ((3.0 * kf - 1.0) * (3.0 * kf));
        s = s * x3 / ((3.0 * kf) * (3.0 * kf + 1.0));
        if k > 1 {
            d = d * x3 / ((3.0 * kf - 3.0) * (3.0 * kf - 1.0));
            fp = fp + d;
        }
        e = e * x3 / ((3.0 * kf - 2.0) * (3.0 * kf));
        f = f + t;
        g = g + s;
        gp = gp + e;
        let m = t.0.abs().max(s.0.abs()).max(d.0.abs()).max(e.0.abs());
        biggest = biggest.max(m);
        if m < 1e-34 * biggest && k > 3 {
            break;
        }
    }
    let a = C1 * f - C2 * g;
    let ap = C1 * fp - C2 * gp;
    let b = SQRT3 * (C1 * f + C2 * g);
    let bp = SQRT3 * (C1 * fp + C2 * gp);
    Airy { ai: a.to_f64(), aip: ap.to_f64(), bi: b.to_f64(), bip: bp.to_f64() }
}

/// Sums Σ c_k u_k ζ^{-k} (and the v_k analogue) until the terms stop
/// decreasing. `sign` alternates the terms when negative.
fn u_sums(z: f64, alternate: bool) -> (f64, f64) {
    let mut u = 1.0;
    let mut su = 1.0;
    let mut sv = 1.0;
    let mut zk = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let kf = k as f64;
        u *= (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0) / ((2.0 * kf - 1.0) * 216.0 * kf);
        let v = -(6.0 * kf + 1.0) / (6.0 * kf - 1.0) * u;
        zk /= z;
        let sgn = if alternate && k % 2 == 1 { -1.0 } else { 1.0 };
        let tu = sgn * u * zk;
        let tv = sgn * v * zk;
        let mag = tu.abs().max(tv.abs());
        if mag >= last {
            break;
        }
        su += tu;
        sv += tv;
        last = mag;
        if mag < 1e-17 {
            break;
        }
    }
    (su, sv)
}

fn asymptotic_positive(x: f64) -> Airy {
    let z = zeta(x);
    let q = x.powf(0.25);
    let sp = PI.sqrt();
    let (ua, va) = u_sums(z, true);
    let (ub, vb) = u_sums(z, false);
    Airy {
        ai: ua / (2.0 * sp * q),
        aip: -q * va / (2.0 * sp),
        bi: ub / (sp * q),
        bip: q * vb / sp,
    }
}

/// Returns the unscaled values at −y together with the amplitude sums (P, Q)
/// of the Ai expansion.
fn asymptotic_negative(y: f64) -> (Airy, f64, f64) {
    let z = zeta(y);
    let mut u = 1.0;
    let (mut pu, mut qu, mut pv, mut qv) = (1.0, 0.0, 1.0, 0.0);
    let mut zk = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let kf = k as f64;
        u *= (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0) / ((2.0 * kf - 1.0) * 216.0 * kf);
        let v = -(6.0 * kf + 1.0) / (6.0 * kf - 1.0) * u;
        zk /= z;
        let mag = (u * zk).abs().max((v * zk).abs());
        if mag >= last {
            break;
        }
        last = mag;
        // k even -> P sums with sign (-1)^{k/2}; k odd -> Q sums with (-1)^{(k-1)/2}
        let sgn = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            pu += sgn * u * zk;
            pv += sgn * v * zk;
        } else {
            qu += sgn * u * zk;
            qv += sgn * v * zk;
        }
        if mag < 1e-17 {
            break;
        }
    }
    let chi = z - 0.25 * PI;
    let (s, c) = chi.sin_cos();
    let q4 = y.powf(0.25);
    let sp = PI.sqrt();
    let a = Airy {
        ai: (c * pu + s * qu) / (sp * q4),
        aip: q4 * (s * pv - c * qv) / sp,
        bi: (-s * pu + c * qu) / (sp * q4),
        bip: q4 * (c * pv + s * qv) / sp,
    };
    (a, pu, qu)
}

/// Minimal double-double number (unevaluated sum hi + lo).
#[derive(Debug, Clone, Copy)]
struct Dd(f64, f64);

impl Dd {
    fn to_f64(self) -> f64 {
        self.0 + self.1
    }
}

impl From<f64> for Dd {
    fn from(v: f64) -> Self {
        Dd(v, 0.0)
    }
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

impl std::ops::Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.0, o.0);
        let (t, f) = two_sum(self.1, o.1);
        let (s, e) = quick_two_sum(s, e + t);
        let (s, e) = quick_two_sum(s, e + f);
        Dd(s, e)
    }
}

impl std::ops::Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        self + Dd(-o.0, -o.1)
    }
}

impl std::ops::Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        let p = self.0 * o.0;
        let e = self.0.mul_add(o.0, -p);
        let e = e + (self.0 * o.1 + self.1 * o.0);
        let (s, e) = quick_two_sum(p, e);
        Dd(s, e)
    }
}

impl std::ops::Mul<f64> for Dd {
    type Output = Dd;
    fn mul(self, o: f64) -> Dd {
        self * Dd::from(o)
    }
}

impl std::ops::Div<f64> for Dd {
    type Output = Dd;
    fn div(self, b: f64) -> Dd {
        let q1 = self.0 / b;
        let r = self - Dd::from(b) * q1;
        let q2 = r.0 / b;
        let r = r - Dd::from(b) * q2;
        let q3 = r.0 / b;
        let (s, e) = quick_two_sum(q1, q2);
        Dd(s, e) + Dd::from(q3)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seams_agree() {
        for &x in &[SERIES_MAX, -SERIES_MAX] {
            let s = series(x);
            let a = if x > 0.0 {
                let z = zeta(x);
                let v = asymptotic_positive(x);
                Airy {
                    ai: v.ai * (-z).exp(),
                    aip: v.aip * (-z).exp(),
                    bi: v.bi * z.exp(),
                    bip: v.bip * z.exp(),
                }
            } else {
                asymptotic_negative(-x).0
            };
            assert!((s.ai - a.ai).abs() <= 1e-11 * s.ai.abs().max(1e-300) + 1e-14, "{x}: {s:?} {a:?}");
            assert!((s.aip - a.aip).abs() <= 1e-11 * s.aip.abs().max(1e-300) + 1e-14);
            assert!((s.bi - a.bi).abs() <= 1e-11 * s.bi.abs() + 1e-14);
            assert!((s.bip - a.bip).abs() <= 1e-11 * s.bip.abs() + 1e-14);
        }
    }

    #[test]
    fn phase_continuous_at_seams() {
        for &x in &[-SERIES_MAX, SERIES_MAX] {
            let a = airy_phase(x - 1e-9);
            let b = airy_phase(x + 1e-9);
            assert!((a - b).abs() < 1e-8, "{x}: {a} {b}");
        }
        assert!((airy_phase(0.0) - PI / 3.0).abs() < 1e-15);
    }

    #[test]
    fn phase_diff_matches_direct() {
        let (x1, x2) = (-30.0, -25.0);
        let d = airy_phase_diff(x1, x2);
        assert!((d - (airy_phase(x2) - airy_phase(x1))).abs() < 1e-11);
    }
}
