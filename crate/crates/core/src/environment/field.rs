use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::quad::GaussLegendre;

type Func = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A closure-backed field, for values that are computed rather than stored.
#[derive(Clone)]
pub struct CustomField {
    pub name: String,
    pub value: Func,
    pub derivative: Option<Func>,
    /// Points where the value or derivative may be non-smooth.
    pub breaks: Vec<f64>,
}

impl fmt::Debug for CustomField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomField")
            .field("name", &self.name)
            .field("has_derivative", &self.derivative.is_some())
            .finish()
    }
}

/// A real function of t ∈ [0, 1] with an optional derivative.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarField {
    Constant(f64),
    /// intercept + slope·t
    Affine { intercept: f64, slope: f64 },
    /// base + slope·|t − at|
    Kink { base: f64, slope: f64, at: f64 },
    /// Piecewise-linear samples at start + i·step, clamped outside.
    Samples {
        #[serde(default)]
        start: f64,
        step: f64,
        values: Vec<f64>,
        #[serde(default)]
        derivative: Option<Vec<f64>>,
    },
    #[serde(skip)]
    Custom(CustomField),
}

impl ScalarField {
    pub fn constant(c: f64) -> Self {
        ScalarField::Constant(c)
    }

    pub fn affine(intercept: f64, slope: f64) -> Self {
        ScalarField::Affine { intercept, slope }
    }

    pub fn kink(base: f64, slope: f64, at: f64) -> Self {
        ScalarField::Kink { base, slope, at }
    }

    /// Samples on the uniform grid i/(len−1) of [0, 1].
    pub fn samples(values: Vec<f64>, derivative: Option<Vec<f64>>) -> Self {
        assert!(values.len() >= 2, "need at least two samples");
        let step = 1.0 / (values.len() - 1) as f64;
        ScalarField::Samples { start: 0.0, step, values, derivative }
    }

    pub fn custom<F>(name: &str, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        ScalarField::Custom(CustomField { name: name.to_string(), value: Arc::new(f), derivative: None, breaks: Vec::new() })
    }

    pub fn custom_with_derivative<F, D>(name: &str, f: F, d: D) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        ScalarField::Custom(CustomField {
            name: name.to_string(),
            value: Arc::new(f),
            derivative: Some(Arc::new(d)),
            breaks: Vec::new(),
        })
    }

    /// Declares non-smooth points of a custom field (no effect otherwise).
    pub fn with_breakpoints(mut self, pts: Vec<f64>) -> Self {
        if let ScalarField::Custom(c) = &mut self {
            c.breaks.extend(pts);
        }
        self
    }

    /// Samples `f` on a uniform grid of `n + 1` points, with central
    /// differences attached as the derivative.
    pub fn tabulate<F: Fn(f64) -> f64>(f: F, n: usize) -> Self {
        let values: Vec<f64> = (0..=n).map(|i| f(i as f64 / n as f64)).collect();
        let deriv = finite_difference(&values, 1.0 / n as f64);
        ScalarField::samples(values, Some(deriv))
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            ScalarField::Constant(c) => *c,
            ScalarField::Affine { intercept, slope } => intercept + slope * t,
            ScalarField::Kink { base, slope, at } => base + slope * (t - at).abs(),
            ScalarField::Samples { start, step, values, .. } => interp(*start, *step, values, t),
            ScalarField::Custom(c) => (c.value)(t),
        }
    }

    pub fn has_derivative(&self) -> bool {
        match self {
            ScalarField::Samples { derivative, .. } => derivative.is_some(),
            ScalarField::Custom(c) => c.derivative.is_some(),
            _ => true,
        }
    }

    /// Derivative at t, if attached. For the kink the right derivative is
    /// returned at the corner.
    pub fn derivative(&self, t: f64) -> Option<f64> {
        match self {
            ScalarField::Constant(_) => Some(0.0),
            ScalarField::Affine { slope, .. } => Some(*slope),
            ScalarField::Kink { slope, at, .. } => Some(if t >= *at { *slope } else { -*slope }),
            ScalarField::Samples { start, step, derivative, .. } => {
                derivative.as_ref().map(|d| interp(*start, *step, d, t))
            }
            ScalarField::Custom(c) => c.derivative.as_ref().map(|d| d(t)),
        }
    }

    /// Derivative at t, falling back to a central difference.
    pub fn derivative_or_fd(&self, t: f64) -> f64 {
        self.derivative(t).unwrap_or_else(|| {
            let e = 1e-6;
            let (a, b) = ((t - e).max(0.0), (t + e).min(1.0));
            (self.eval(b) - self.eval(a)) / (b - a)
        })
    }

    /// Points in (0, 1) where the field or its derivative may be non-smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            ScalarField::Kink { at, .. } if *at > 0.0 && *at < 1.0 => vec![*at],
            ScalarField::Custom(c) => c.breaks.iter().copied().filter(|p| *p > 0.0 && *p < 1.0).collect(),
            _ => Vec::new(),
        }
    }

    /// Pointwise shift by a constant.
    pub fn shifted(&self, c: f64) -> ScalarField {
        match self {
            ScalarField::Constant(v) => ScalarField::Constant(v + c),
            ScalarField::Affine { intercept, slope } => ScalarField::Affine { intercept: intercept + c, slope: *slope },
            ScalarField::Kink { base, slope, at } => ScalarField::Kink { base: base + c, slope: *slope, at: *at },
            ScalarField::Samples { start, step, values, derivative } => ScalarField::Samples {
                start: *start,
                step: *step,
                values: values.iter().map(|v| v + c).collect(),
                derivative: derivative.clone(),
            },
            ScalarField::Custom(cf) => {
                let f = cf.value.clone();
                ScalarField::Custom(CustomField {
                    name: format!("{} + {c}", cf.name),
                    value: Arc::new(move |t| f(t) + c),
                    derivative: cf.derivative.clone(),
                    breaks: cf.breaks.clone(),
                })
            }
        }
    }

    /// |field(t) − field(0) − ∫₀^t derivative| maximised over a grid of
    /// `n + 1` points, or `None` without a derivative.
    pub fn ftc_residual(&self, n: usize) -> Option<f64> {
        if !self.has_derivative() {
            return None;
        }
        let gl = GaussLegendre::new(8);
        let f0 = self.eval(0.0);
        let mut acc = 0.0;
        let mut worst = 0.0f64;
        let mut brk = self.breakpoints();
        brk.sort_by(f64::total_cmp);
        for i in 0..n {
            let (a, b) = (i as f64 / n as f64, (i + 1) as f64 / n as f64);
            let mut pts = vec![a];
            pts.extend(brk.iter().copied().filter(|p| *p > a && *p < b));
            pts.push(b);
            for w in pts.windows(2) {
                acc += gl.integrate(w[0], w[1], |s| self.derivative(s).unwrap());
            }
            worst = worst.max((self.eval(b) - f0 - acc).abs());
        }
        Some(worst)
    }
}

impl From<f64> for ScalarField {
    fn from(c: f64) -> Self {
        ScalarField::Constant(c)
    }
}

fn interp(start: f64, step: f64, v: &[f64], t: f64) -> f64 {
    let n = v.len();
    let x = (t - start) / step;
    if x <= 0.0 {
        return v[0];
    }
    if x >= (n - 1) as f64 {
        return v[n - 1];
    }
    let i = (x.floor() as usize).min(n - 2);
    let w = x - i as f64;
    v[i] * (1.0 - w) + v[i + 1] * w
}

/// Second-order differences (one-sided at the ends).
pub fn finite_difference(v: &[f64], step: f64) -> Vec<f64> {
    let n = v.len();
    assert!(n >= 3, "need at least three samples");
    (0..n)
        .map(|i| {
            if i == 0 {
                // difference form keeps constant data exactly flat
                (4.0 * (v[1] - v[0]) - (v[2] - v[0])) / (2.0 * step)
            } else if i == n - 1 {
                (4.0 * (v[n - 1] - v[n - 2]) - (v[n - 1] - v[n - 3])) / (2.0 * step)
            } else {
                (v[i + 1] - v[i - 1]) / (2.0 * step)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        assert_eq!(ScalarField::affine(2.0, -1.0).eval(0.25), 1.75);
        assert_eq!(ScalarField::kink(1.0, 1.0, 0.5).eval(0.0), 1.5);
        assert_eq!(ScalarField::kink(1.0, 1.0, 0.5).derivative(0.2), Some(-1.0));
    }

    #[test]
    fn samples_interpolate_and_clamp() {
        let f = ScalarField::samples(vec![0.0, 1.0, 4.0], None);
        assert_eq!(f.eval(0.25), 0.5);
        assert_eq!(f.eval(0.75), 2.5);
        assert_eq!(f.eval(2.0), 4.0);
        assert!(!f.has_derivative());
    }

    #[test]
    fn ftc_residual_small() {
        let f = ScalarField::kink(1.0, 1.0, 0.5);
        assert!(f.ftc_residual(1000).unwrap() < 1e-12);
        let g = ScalarField::custom_with_derivative("sin", f64::sin, f64::cos);
        assert!(g.ftc_residual(1000).unwrap() < 1e-12);
    }
}
