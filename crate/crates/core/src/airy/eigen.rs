//! Eigenfunctions of ½∂² − x on the half-line and of ½∂² − hx on [0, 1].

use super::eval::{ai, ai_prime, airy_log_modulus, airy_phase_diff};
use super::zeros::{airy_zero, lambda_n};
use crate::quad::GaussLegendre;
use crate::Result;

/// ψ_n(x) = Ai(x + α_n) / ‖Ai(· + α_n)‖_{L²[0,∞)}.
///
/// Uses ∫_{α_n}^∞ Ai(y)² dy = Ai'(α_n)².
pub fn eigenfunction_halfline(n: usize, x: f64) -> f64 {
    HalflineEigenfunction::new(n).eval(x)
}

#[derive(Debug, Clone, Copy)]
pub struct HalflineEigenfunction {
    pub n: usize,
    pub alpha: f64,
    pub norm: f64,
}

impl HalflineEigenfunction {
    pub fn new(n: usize) -> Self {
        let alpha = airy_zero(n);
        let norm = ai_prime(alpha).abs();
        HalflineEigenfunction { n, alpha, norm }
    }

    pub fn eval(&self, x: f64) -> f64 {
        assert!(x >= 0.0, "half-line eigenfunction needs x >= 0");
        if x == 0.0 {
            return 0.0;
        }
        ai(x + self.alpha) / self.norm
    }
}

/// φ_n^h(x), the L²-normalized cross-Wronskian combination
/// Ai(λ)Bi(λ+cx) − Bi(λ)Ai(λ+cx) with c = (2h)^{1/3} and λ = λ_n^h.
pub fn eigenfunction_interval(h: f64, n: usize, x: f64) -> Result<f64> {
    Ok(IntervalEigenfunction::new(h, n)?.eval(x))
}

#[derive(Debug, Clone, Copy)]
pub struct IntervalEigenfunction {
    pub h: f64,
    pub n: usize,
    pub lambda: f64,
    pub c: f64,
    log_ref: f64,
    norm: f64,
}

impl IntervalEigenfunction {
    pub fn new(h: f64, n: usize) -> Result<Self> {
        let lambda = lambda_n(h, n)?;
        let c = (2.0 * h).cbrt();
        let log_ref = airy_log_modulus(lambda + c);
        let mut e = IntervalEigenfunction { h, n, lambda, c, log_ref, norm: 1.0 };
        let gl = GaussLegendre::new(16);
        let sq = gl.composite(0.0, 1.0, 16 + 4 * n, |x| e.raw(x).powi(2));
        e.norm = sq.sqrt();
        Ok(e)
    }

    /// Eigenvalue (h^{2/3}/2^{1/3}) λ_n^h of ½∂² − hx.
    pub fn eigenvalue(&self) -> f64 {
        self.h.powf(2.0 / 3.0) / 2f64.cbrt() * self.lambda
    }

    fn raw(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let z = self.lambda + self.c * x;
        (airy_log_modulus(z) - self.log_ref).exp() * airy_phase_diff(self.lambda, z).sin()
    }

    pub fn eval(&self, x: f64) -> f64 {
        assert!((0.0..=1.0).contains(&x), "interval eigenfunction needs x in [0, 1]");
        self.raw(x) / self.norm
    }
}
