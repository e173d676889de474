//! Feynman–Kac heat equation ∂_t u = ½∂²_x u − hxu with Dirichlet
//! boundaries, on [0, 1] or on a truncated half-line.
//!
//! The long-time slope of log‖u(t)‖₂ is the top eigenvalue: Ψ(h) on the
//! interval, (α₁/2^{1/3})h^{2/3} on the half-line.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Half-line truncation: the smallest L with hL³ ≥ 200, and at least 12.
pub fn default_length(h: f64) -> f64 {
    (200.0 / h).cbrt().max(12.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Interval,
    Halfline { length: f64 },
}

impl Domain {
    pub fn halfline(h: f64) -> Self {
        Domain::Halfline { length: default_length(h) }
    }

    pub fn length(&self) -> f64 {
        match self {
            Domain::Interval => 1.0,
            Domain::Halfline { length } => *length,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    /// Number of spatial cells.
    pub cells: usize,
    pub dt: f64,
    /// Extrapolate the slope from dt and dt/2.
    pub richardson: bool,
    /// Slope change between windows that counts as converged.
    pub slope_tol: f64,
    pub max_time: f64,
}

impl Resolution {
    /// Spacing 1e-3 on the interval, 3e-3 on the half-line. dt is kept
    /// below dx·√(2/|μ|) so the stiffest Crank–Nicolson modes decay faster
    /// than the ground state.
    pub fn auto(h: f64, domain: Domain) -> Self {
        let (cells, bound) = match domain {
            Domain::Interval => (1000, std::f64::consts::PI.powi(2) / 2.0 + h.abs()),
            Domain::Halfline { length } => ((length / 3e-3).ceil() as usize, 2.0 * h.abs().powf(2.0 / 3.0) + 1.0),
        };
        let dx = domain.length() / cells as f64;
        let dt = 0.5 * dx * (2.0 / bound).sqrt().min(1.0);
        Resolution { cells, dt, richardson: true, slope_tol: 1e-11, max_time: 400.0 }
    }

    pub fn refined(&self, factor: usize) -> Self {
        Resolution { cells: self.cells * factor, dt: self.dt / factor as f64, ..*self }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PdeRun {
    pub h: f64,
    pub domain: Domain,
    pub grid: usize,
    pub dt: f64,
    pub decay_rate: f64,
    /// (x, u) with unit sup norm, boundary nodes included.
    pub profile: Vec<(f64, f64)>,
    /// Time at which the slope was declared converged.
    pub t_end: f64,
    /// (t, d/dt log‖u‖) per step of the finest run.
    #[serde(skip)]
    pub slopes: Vec<(f64, f64)>,
}

struct Single {
    slope: f64,
    t_end: f64,
    profile: Vec<f64>,
    slopes: Vec<(f64, f64)>,
}

fn run_single(h: f64, domain: Domain, cells: usize, dt: f64, res: &Resolution) -> Result<Single> {
    if cells < 4 || !(dt > 0.0) {
        return Err(Error::Invalid("need at least 4 cells and dt > 0".into()));
    }
    if matches!(domain, Domain::Halfline { .. }) && !(h > 0.0) {
        return Err(Error::Precondition(format!("half-line needs h > 0 for confinement, got {h}")));
    }
    let len = domain.length();
    let dx = len / cells as f64;
    let m = cells - 1;
    let x: Vec<f64> = (1..cells).map(|i| i as f64 * dx).collect();
    // A = ½D² − hx on interior nodes
    let off = 0.5 / (dx * dx);
    let diag: Vec<f64> = x.iter().map(|xi| -2.0 * off - h * xi).collect();
    // (I − dt/2 A) factorised once
    let a_off = -0.5 * dt * off;
    let mut cp = vec![0.0; m];
    let mut inv = vec![0.0; m];
    for i in 0..m {
        let b = 1.0 - 0.5 * dt * diag[i];
        let denom = if i == 0 { b } else { b - a_off * cp[i - 1] };
        inv[i] = 1.0 / denom;
        cp[i] = a_off * inv[i];
    }
    let mut u: Vec<f64> = match domain {
        Domain::Interval => x.iter().map(|xi| (std::f64::consts::PI * xi).sin()).collect(),
        Domain::Halfline { .. } => x.iter().map(|xi| xi * (-xi).exp()).collect(),
    };
    let norm = |v: &[f64]| (v.iter().map(|a| a * a).sum::<f64>() * dx).sqrt();
    let n0 = norm(&u);
    u.iter_mut().for_each(|a| *a /= n0);
    let mut rhs = vec![0.0; m];
    let mut slopes = Vec::new();
    let window = 0.5f64.max(50.0 * dt);
    let per_window = (window / dt).round().max(1.0) as usize;
    let mut prev: Option<f64> = None;
    let mut acc = 0.0;
    let mut step = 0usize;
    loop {
        for i in 0..m {
            let left = if i > 0 { u[i - 1] } else { 0.0 };
            let right = if i + 1 < m { u[i + 1] } else { 0.0 };
            rhs[i] = u[i] + 0.5 * dt * (diag[i] * u[i] + off * (left + right));
        }
        // forward sweep then back substitution
        rhs[0] *= inv[0];
        for i in 1..m {
            rhs[i] = (rhs[i] - a_off * rhs[i - 1]) * inv[i];
        }
        for i in (0..m - 1).rev() {
            rhs[i] -= cp[i] * rhs[i + 1];
        }
        std::mem::swap(&mut u, &mut rhs);
        let n = norm(&u);
        u.iter_mut().for_each(|a| *a /= n);
        step += 1;
        let s = n.ln() / dt;
        slopes.push((step as f64 * dt, s));
        acc += s;
        if step.is_multiple_of(per_window) {
            let mean = acc / per_window as f64;
            acc = 0.0;
            let t = step as f64 * dt;
            let change = prev.map_or(f64::INFINITY, |p| (mean - p).abs());
            if change <= res.slope_tol * (1.0 + mean.abs()) && t >= 1.0 {
                let mut profile = Vec::with_capacity(cells + 1);
                profile.push(0.0);
                profile.extend_from_slice(&u);
                profile.push(0.0);
                return Ok(Single { slope: s, t_end: t, profile, slopes });
            }
            prev = Some(mean);
            if t >= res.max_time {
                return Err(Error::NonConvergence(format!("slope still moving at t = {t}: last window change {change:e}")));
            }
        }
    }
}

/// Full run: decay rate (extrapolated in dt when requested) and the
/// sup-normalised profile of the finest run.
pub fn feynman_kac_run(h: f64, domain: Domain, res: &Resolution) -> Result<PdeRun> {
    let fine_dt = if res.richardson { res.dt / 2.0 } else { res.dt };
    let fine = run_single(h, domain, res.cells, fine_dt, res)?;
    let decay_rate = if res.richardson {
        let coarse = run_single(h, domain, res.cells, res.dt, res)?;
        (4.0 * fine.slope - coarse.slope) / 3.0
    } else {
        fine.slope
    };
    let dx = domain.length() / res.cells as f64;
    let top = fine.profile.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    // the ground state is positive; fix the overall sign
    let sign = if fine.profile.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    let profile = fine.profile.iter().enumerate().map(|(i, v)| (i as f64 * dx, sign * v / top)).collect();
    Ok(PdeRun { h, domain, grid: res.cells, dt: res.dt, decay_rate, profile, t_end: fine.t_end, slopes: fine.slopes })
}

/// Long-time slope of log‖u(t)‖₂.
pub fn feynman_kac_decay(h: f64, domain: Domain, res: &Resolution) -> Result<f64> {
    feynman_kac_run(h, domain, res).map(|r| r.decay_rate)
}

/// Long-time profile with unit sup norm.
pub fn leading_profile(h: f64, domain: Domain, res: &Resolution) -> Result<Vec<(f64, f64)>> {
    feynman_kac_run(h, domain, res).map(|r| r.profile)
}

/// Exponential rate at which the per-step slope approaches its limit,
/// fitted by least squares on log|s(t) − s(∞)| over the part of the
/// transient between `hi` and `lo` in absolute size.
pub fn transient_rate(run: &PdeRun, hi: f64, lo: f64) -> Option<f64> {
    let limit = run.slopes.last()?.1;
    let pts: Vec<(f64, f64)> = run
        .slopes
        .iter()
        .map(|(t, s)| (*t, (s - limit).abs()))
        .filter(|(_, r)| *r < hi && *r > lo)
        .map(|(t, r)| (t, r.ln()))
        .collect();
    if pts.len() < 10 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    Some(-sxy / sxx)
}
