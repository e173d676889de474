use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Mean-measure density μ_t(ℓ) of the reproduction point process, piecewise
/// constant on cells [ℓ_j, ℓ_j + step] and stored per t row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Intensity {
    pub ell_start: f64,
    pub ell_step: f64,
    pub cells: usize,
    /// Row-major, `t_points × cells`.
    pub density: Vec<f64>,
}

/// κ_t(θ) tabulated on a uniform (t, θ) grid; cubic in θ, linear in t.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TabulatedLaplace {
    pub t_points: usize,
    pub theta_step: f64,
    pub theta_points: usize,
    /// Row-major, `t_points × theta_points`.
    pub kappa: Vec<f64>,
    #[serde(default)]
    pub intensity: Option<Intensity>,
}

impl TabulatedLaplace {
    /// Tabulates a closed-form κ(t, θ).
    pub fn from_fn<F: Fn(f64, f64) -> f64>(f: F, t_points: usize, theta_max: f64, theta_points: usize) -> Self {
        assert!(t_points >= 2 && theta_points >= 4);
        let theta_step = theta_max / (theta_points - 1) as f64;
        let mut kappa = Vec::with_capacity(t_points * theta_points);
        for i in 0..t_points {
            let t = i as f64 / (t_points - 1) as f64;
            for j in 0..theta_points {
                kappa.push(f(t, j as f64 * theta_step));
            }
        }
        TabulatedLaplace { t_points, theta_step, theta_points, kappa, intensity: None }
    }

    /// Builds κ from a tabulated mean-measure density, integrating e^{θℓ}
    /// exactly over each constant cell.
    pub fn from_intensity(intensity: Intensity, t_points: usize, theta_max: f64, theta_points: usize) -> Result<Self> {
        if intensity.density.len() != t_points * intensity.cells {
            return Err(Error::Invalid("intensity table has the wrong size".into()));
        }
        if intensity.density.iter().any(|d| !(*d >= 0.0)) {
            return Err(Error::Invalid("intensity must be non-negative".into()));
        }
        let mut tab = TabulatedLaplace::from_fn(
            |t, th| {
                let i = ((t * (t_points - 1) as f64).round() as usize).min(t_points - 1);
                log_cell_laplace(&intensity, i, th)
            },
            t_points,
            theta_max,
            theta_points,
        );
        tab.intensity = Some(intensity);
        Ok(tab)
    }

    pub fn theta_max(&self) -> f64 {
        (self.theta_points - 1) as f64 * self.theta_step
    }

    fn row_eval(&self, row: usize, theta: f64) -> (f64, f64, f64) {
        let h = self.theta_step;
        let x = theta / h;
        let n = self.theta_points;
        let j = (x.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
        let base = row * n;
        let ys = &self.kappa[base + j..base + j + 4];
        // Lagrange cubic through nodes j..j+3 in local coordinate s = x − j
        let s = x - j as f64;
        let nodes = [0.0, 1.0, 2.0, 3.0];
        let (mut v, mut d, mut d2) = (0.0, 0.0, 0.0);
        for k in 0..4 {
            let others: Vec<f64> = (0..4).filter(|m| *m != k).map(|m| nodes[m]).collect();
            let denom: f64 = others.iter().map(|o| nodes[k] - o).product();
            let (a, b, c) = (s - others[0], s - others[1], s - others[2]);
            v += ys[k] * a * b * c / denom;
            d += ys[k] * (a * b + a * c + b * c) / denom;
            d2 += ys[k] * 2.0 * (a + b + c) / denom;
        }
        (v, d / h, d2 / (h * h))
    }

    /// (κ, κ', κ'') at (t, θ).
    pub fn eval(&self, t: f64, theta: f64) -> Result<(f64, f64, f64)> {
        if theta < 0.0 || theta >= self.theta_max() {
            return Err(Error::Domain(format!("theta = {theta} outside the table [0, {})", self.theta_max())));
        }
        let x = t.clamp(0.0, 1.0) * (self.t_points - 1) as f64;
        let i = (x.floor() as usize).min(self.t_points - 2);
        let w = x - i as f64;
        let a = self.row_eval(i, theta);
        let b = self.row_eval(i + 1, theta);
        Ok((
            a.0 * (1.0 - w) + b.0 * w,
            a.1 * (1.0 - w) + b.1 * w,
            a.2 * (1.0 - w) + b.2 * w,
        ))
    }

    /// Cell weights of the tilted law e^{φℓ}μ_t(ℓ)dℓ at t (rows linearly
    /// interpolated), normalised to sum to one.
    pub fn tilted_cells(&self, t: f64, phi: f64) -> Result<CellLaw> {
        let it = self
            .intensity
            .as_ref()
            .ok_or_else(|| Error::Unsupported("tabulated environment has no intensity table".into()))?;
        let density = interpolated_row(it, self.t_points, t);
        let mut log_w: Vec<f64> = (0..it.cells)
            .map(|j| {
                let lo = it.ell_start + j as f64 * it.ell_step;
                if density[j] <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    density[j].ln() + log_exp_integral(phi, lo, lo + it.ell_step)
                }
            })
            .collect();
        let m = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut cdf = Vec::with_capacity(it.cells);
        let mut acc = 0.0;
        for w in log_w.iter_mut() {
            acc += (*w - m).exp();
            cdf.push(acc);
        }
        for c in cdf.iter_mut() {
            *c /= acc;
        }
        Ok(CellLaw { ell_start: it.ell_start, ell_step: it.ell_step, phi, cdf })
    }

    /// Total mass ∫μ_t and the untilted position law at t.
    pub fn offspring_law(&self, t: f64) -> Result<(f64, CellLaw)> {
        let it = self
            .intensity
            .as_ref()
            .ok_or_else(|| Error::Unsupported("tabulated environment has no intensity table".into()))?;
        let mass: f64 = interpolated_row(it, self.t_points, t).iter().sum::<f64>() * it.ell_step;
        Ok((mass, self.tilted_cells(t, 0.0)?))
    }
}

fn interpolated_row(it: &Intensity, t_points: usize, t: f64) -> Vec<f64> {
    let x = t.clamp(0.0, 1.0) * (t_points - 1) as f64;
    let i = (x.floor() as usize).min(t_points - 2);
    let w = x - i as f64;
    (0..it.cells)
        .map(|j| it.density[i * it.cells + j] * (1.0 - w) + it.density[(i + 1) * it.cells + j] * w)
        .collect()
}

/// log ∫_a^b e^{θℓ} dℓ.
fn log_exp_integral(theta: f64, a: f64, b: f64) -> f64 {
    if theta.abs() * (b - a) < 1e-8 {
        (b - a).ln() + theta * 0.5 * (a + b)
    } else if theta > 0.0 {
        theta * b + (-(-theta * (b - a)).exp_m1()).ln() - theta.ln()
    } else {
        theta * a + (-(theta * (b - a)).exp_m1()).ln() - (-theta).ln()
    }
}

fn log_cell_laplace(it: &Intensity, row: usize, theta: f64) -> f64 {
    let terms: Vec<f64> = (0..it.cells)
        .filter(|j| it.density[row * it.cells + j] > 0.0)
        .map(|j| {
            let lo = it.ell_start + j as f64 * it.ell_step;
            it.density[row * it.cells + j].ln() + log_exp_integral(theta, lo, lo + it.ell_step)
        })
        .collect();
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + terms.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Piecewise law: a cell chosen by `cdf`, then a position inside the cell
/// with density ∝ e^{φℓ}.
#[derive(Debug, Clone)]
pub struct CellLaw {
    ell_start: f64,
    ell_step: f64,
    phi: f64,
    cdf: Vec<f64>,
}

impl CellLaw {
    /// Inverse-CDF sample from two uniforms in [0, 1).
    pub fn sample(&self, u_cell: f64, u_pos: f64) -> f64 {
        let j = self.cdf.partition_point(|c| *c <= u_cell).min(self.cdf.len() - 1);
        let lo = self.ell_start + j as f64 * self.ell_step;
        let w = self.ell_step;
        let p = self.phi * w;
        if p.abs() < 1e-10 {
            lo + u_pos * w
        } else {
            // inverse CDF of density ∝ e^{p s} on s ∈ [0, 1]
            lo + w * (u_pos * p.exp_m1()).ln_1p() / p
        }
    }
}
