use serde::{Deserialize, Serialize};

use super::field::ScalarField;
use super::tabulated::TabulatedLaplace;
use crate::quad;
use crate::{Error, Result};

/// Named closed-form reproduction laws.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum AnalyticLaplace {
    /// Two children, each displaced by an independent Exp(rate_t) variable.
    /// κ = log 2 + log β − log(β − θ) on θ < β.
    ExponentialBinary { rate: ScalarField },
    /// Poisson(mean_t) children with independent N(0, σ_t²) displacements.
    /// κ = log m + θ²σ²/2.
    PoissonGaussian { mean: ScalarField, sigma: ScalarField },
}

/// Time-dependent family of point-process log-Laplace transforms κ_t.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvironmentModel {
    /// Two children with i.i.d. N(0, σ_t²) displacements:
    /// κ_t(θ) = log 2 + θ²σ_t²/2.
    GaussianBinary { sigma: ScalarField },
    Analytic(AnalyticLaplace),
    Tabulated(TabulatedLaplace),
}

/// Number of t points used for the supercriticality check.
pub const VALIDATION_GRID: usize = 1000;

impl EnvironmentModel {
    pub fn gaussian_binary(sigma: ScalarField) -> Result<Self> {
        let env = EnvironmentModel::GaussianBinary { sigma };
        env.validate()?;
        Ok(env)
    }

    pub fn exponential_binary(rate: ScalarField) -> Result<Self> {
        let env = EnvironmentModel::Analytic(AnalyticLaplace::ExponentialBinary { rate });
        env.validate()?;
        Ok(env)
    }

    pub fn poisson_gaussian(mean: ScalarField, sigma: ScalarField) -> Result<Self> {
        let env = EnvironmentModel::Analytic(AnalyticLaplace::PoissonGaussian { mean, sigma });
        env.validate()?;
        Ok(env)
    }

    pub fn tabulated(table: TabulatedLaplace) -> Result<Self> {
        let env = EnvironmentModel::Tabulated(table);
        env.validate()?;
        Ok(env)
    }

    /// Checks κ_t(0) > 0 and positivity of scale parameters on a grid.
    pub fn validate(&self) -> Result<()> {
        for i in 0..=VALIDATION_GRID {
            let t = i as f64 / VALIDATION_GRID as f64;
            match self {
                EnvironmentModel::GaussianBinary { sigma } => {
                    let s = sigma.eval(t);
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::Invalid(format!("sigma({t}) = {s} must be positive")));
                    }
                }
                EnvironmentModel::Analytic(AnalyticLaplace::ExponentialBinary { rate }) => {
                    let b = rate.eval(t);
                    if !(b > 0.0) || !b.is_finite() {
                        return Err(Error::Invalid(format!("rate({t}) = {b} must be positive")));
                    }
                }
                EnvironmentModel::Analytic(AnalyticLaplace::PoissonGaussian { mean, sigma }) => {
                    let (m, s) = (mean.eval(t), sigma.eval(t));
                    if !(m > 0.0) || !(s > 0.0) {
                        return Err(Error::Invalid(format!("mean/sigma at t = {t} must be positive")));
                    }
                }
                EnvironmentModel::Tabulated(_) => {}
            }
            let k0 = self.kappa(t, 0.0)?;
            if !(k0 > 0.0) {
                return Err(Error::Invalid(format!(
                    "not supercritical: kappa_{t}(0) = {k0} <= 0"
                )));
            }
        }
        Ok(())
    }

    /// Upper end θ_max(t) of the domain [0, θ_max(t)).
    pub fn theta_max(&self, t: f64) -> f64 {
        match self {
            EnvironmentModel::GaussianBinary { .. } => f64::INFINITY,
            EnvironmentModel::Analytic(AnalyticLaplace::ExponentialBinary { rate }) => rate.eval(t),
            EnvironmentModel::Analytic(AnalyticLaplace::PoissonGaussian { .. }) => f64::INFINITY,
            EnvironmentModel::Tabulated(tab) => tab.theta_max(),
        }
    }

    fn check(&self, t: f64, theta: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("t = {t} outside [0, 1]")));
        }
        let m = self.theta_max(t);
        if !(theta >= 0.0) || theta >= m && m.is_finite() || !theta.is_finite() {
            return Err(Error::Domain(format!("theta = {theta} outside [0, {m}) at t = {t}")));
        }
        Ok(())
    }

    /// (κ, κ', κ'') at (t, θ).
    pub fn kappa_all(&self, t: f64, theta: f64) -> Result<(f64, f64, f64)> {
        self.check(t, theta)?;
        Ok(match self {
            EnvironmentModel::GaussianBinary { sigma } => {
                let s2 = sigma.eval(t).powi(2);
                (std::f64::consts::LN_2 + 0.5 * theta * theta * s2, theta * s2, s2)
            }
            EnvironmentModel::Analytic(AnalyticLaplace::ExponentialBinary { rate }) => {
                let b = rate.eval(t);
                let d = b - theta;
                (std::f64::consts::LN_2 + b.ln() - d.ln(), 1.0 / d, 1.0 / (d * d))
            }
            EnvironmentModel::Analytic(AnalyticLaplace::PoissonGaussian { mean, sigma }) => {
                let s2 = sigma.eval(t).powi(2);
                (mean.eval(t).ln() + 0.5 * theta * theta * s2, theta * s2, s2)
            }
            EnvironmentModel::Tabulated(tab) => tab.eval(t, theta)?,
        })
    }

    pub fn kappa(&self, t: f64, theta: f64) -> Result<f64> {
        self.kappa_all(t, theta).map(|k| k.0)
    }

    pub fn d_kappa(&self, t: f64, theta: f64) -> Result<f64> {
        self.kappa_all(t, theta).map(|k| k.1)
    }

    pub fn d2_kappa(&self, t: f64, theta: f64) -> Result<f64> {
        self.kappa_all(t, theta).map(|k| k.2)
    }

    /// θκ'(θ) − κ(θ), the spine energy density; increasing in θ.
    pub fn energy_density(&self, t: f64, theta: f64) -> Result<f64> {
        let (k, dk, _) = self.kappa_all(t, theta)?;
        Ok(theta * dk - k)
    }

    /// (κ*_t(a), maximiser θ) with κ*_t(a) = sup_{θ>0} [θa − κ_t(θ)].
    pub fn kappa_star_with_arg(&self, t: f64, a: f64) -> Result<(f64, f64)> {
        if !a.is_finite() {
            return Err(Error::Domain(format!("non-finite speed {a}")));
        }
        if let EnvironmentModel::GaussianBinary { sigma } = self {
            let s2 = sigma.eval(t).powi(2);
            self.check(t, 0.0)?;
            return Ok(if a <= 0.0 {
                (-std::f64::consts::LN_2, 0.0)
            } else {
                (0.5 * a * a / s2 - std::f64::consts::LN_2, a / s2)
            });
        }
        let (k0, d0, _) = self.kappa_all(t, 0.0)?;
        if a <= d0 {
            return Ok((-k0, 0.0));
        }
        let theta = self.solve_d_kappa(t, a)?;
        let k = self.kappa(t, theta)?;
        Ok((theta * a - k, theta))
    }

    pub fn kappa_star(&self, t: f64, a: f64) -> Result<f64> {
        self.kappa_star_with_arg(t, a).map(|v| v.0)
    }

    /// ∂_a κ*_t(a): the maximising θ.
    pub fn d_kappa_star(&self, t: f64, a: f64) -> Result<f64> {
        self.kappa_star_with_arg(t, a).map(|v| v.1)
    }

    /// Solves κ'_t(θ) = a for θ > 0 (κ'_t(0) < a assumed), by Newton with
    /// a bracketing fallback. Signals a domain error when the maximisation
    /// is unbounded on the domain.
    fn solve_d_kappa(&self, t: f64, a: f64) -> Result<f64> {
        let m = self.theta_max(t);
        let mut lo = 0.0;
        let mut hi = if m.is_finite() { m * (1.0 - 1e-12) } else { 1.0 };
        loop {
            let d = self.d_kappa(t, hi)?;
            if d >= a {
                break;
            }
            if m.is_finite() {
                // κ' stays below a up to the boundary: θa − κ keeps growing
                return Err(Error::Domain(format!(
                    "kappa_star_{t}({a}) = +inf: inner maximisation unbounded on the domain"
                )));
            }
            lo = hi;
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::Domain(format!("kappa_star_{t}({a}) unbounded")));
            }
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..100 {
            let (_, d, d2) = self.kappa_all(t, x)?;
            let f = d - a;
            if f > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let mut nx = if d2 > 0.0 { x - f / d2 } else { f64::NAN };
            if !(nx > lo && nx < hi) {
                nx = 0.5 * (lo + hi);
            }
            if (nx - x).abs() <= 1e-15 * x.abs().max(1.0) {
                return Ok(nx);
            }
            x = nx;
        }
        // Newton did not settle (flat κ''): golden-section on the concave objective.
        let (x, _) = quad::golden_max(|th| th * a - self.kappa(t, th).unwrap_or(f64::INFINITY), lo, hi, 1e-13);
        Ok(x)
    }

    /// (v_t, θ̄_t): the root of κ*_t = 0 and its conjugate parameter,
    /// computed as θ̄ = root of θκ' − κ and v = κ'(θ̄).
    pub fn natural_speed(&self, t: f64) -> Result<(f64, f64)> {
        if let EnvironmentModel::GaussianBinary { sigma } = self {
            let s = sigma.eval(t);
            let r = (2.0 * std::f64::consts::LN_2).sqrt();
            return Ok((s * r, r / s));
        }
        let c = self.root_energy_density(t, |th| self.energy_density(t, th))?;
        Ok((self.d_kappa(t, c)?, c))
    }

    /// Positive root of an increasing function g(θ) with g(0) < 0.
    pub(crate) fn root_energy_density<G: Fn(f64) -> Result<f64>>(&self, t: f64, g: G) -> Result<f64> {
        let m = self.theta_max(t);
        let mut hi = if m.is_finite() { 0.5 * m } else { 1.0 };
        let mut lo = 0.0;
        while g(hi)? < 0.0 {
            lo = hi;
            hi = if m.is_finite() { 0.5 * (hi + m) } else { 2.0 * hi };
            if (m.is_finite() && m - hi < 1e-12 * m) || hi > 1e12 {
                return Err(Error::RootNotFound(format!(
                    "no root of theta*kappa' - kappa before the domain edge at t = {t}"
                )));
            }
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..200 {
            let fx = g(x)?;
            if fx > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let d2 = self.d2_kappa(t, x)?;
            let mut nx = x - fx / (x * d2);
            if !(nx > lo && nx < hi) {
                nx = 0.5 * (lo + hi);
            }
            if (nx - x).abs() <= 1e-15 * x.max(1.0) || hi - lo <= 1e-15 * x.max(1.0) {
                return Ok(nx);
            }
            x = nx;
        }
        Ok(x)
    }

    /// θ̄ as a field, with its derivative from implicit differentiation of
    /// θκ'_t(θ) − κ_t(θ) = 0.
    pub fn theta_bar_field(&self) -> ScalarField {
        let env = self.clone();
        let env2 = self.clone();
        ScalarField::custom_with_derivative(
            "theta_bar",
            move |t| env.natural_speed(t.clamp(0.0, 1.0)).map(|v| v.1).unwrap_or(f64::NAN),
            move |t| env2.theta_bar_derivative(t.clamp(0.0, 1.0)).unwrap_or(f64::NAN),
        )
    }

    /// v as a field.
    pub fn natural_speed_field(&self) -> ScalarField {
        let env = self.clone();
        ScalarField::custom("natural_speed", move |t| {
            env.natural_speed(t.clamp(0.0, 1.0)).map(|v| v.0).unwrap_or(f64::NAN)
        })
    }

    /// dθ̄/dt = (∂_tκ − θ ∂_tκ') / (θ κ'') at θ = θ̄_t.
    pub fn theta_bar_derivative(&self, t: f64) -> Result<f64> {
        let (_, th) = self.natural_speed(t)?;
        if let EnvironmentModel::GaussianBinary { sigma } = self {
            let s = sigma.eval(t);
            let ds = sigma.derivative_or_fd(t);
            return Ok(-th * ds / s);
        }
        let (k_t, dk_t) = self.time_derivatives(t, th)?;
        let d2 = self.d2_kappa(t, th)?;
        Ok((k_t - th * dk_t) / (th * d2))
    }

    /// (∂_tκ_t(θ), ∂_tκ'_t(θ)) by central differences in t.
    pub fn time_derivatives(&self, t: f64, theta: f64) -> Result<(f64, f64)> {
        let e = 1e-5;
        let (a, b) = ((t - e).max(0.0), (t + e).min(1.0));
        let (ka, da, _) = self.kappa_all(a, theta)?;
        let (kb, db, _) = self.kappa_all(b, theta)?;
        Ok(((kb - ka) / (b - a), (db - da) / (b - a)))
    }

    /// Time points in (0, 1) where the law may change non-smoothly.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            EnvironmentModel::GaussianBinary { sigma } => sigma.breakpoints(),
            EnvironmentModel::Analytic(AnalyticLaplace::ExponentialBinary { rate }) => rate.breakpoints(),
            EnvironmentModel::Analytic(AnalyticLaplace::PoissonGaussian { mean, sigma }) => {
                let mut v = mean.breakpoints();
                v.extend(sigma.breakpoints());
                v
            }
            EnvironmentModel::Tabulated(_) => Vec::new(),
        }
    }
}
