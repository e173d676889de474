//! Monte Carlo: the branching random walk itself, the spine walk of the
//! many-to-one lemma, and sequential Monte Carlo for barrier-constrained
//! expectations.
//!
//! Every trial or batch draws from its own ChaCha8 stream (seed, index), so
//! results do not depend on thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::{AnalyticLaplace, CellLaw, EnvironmentModel, IndicatorSet, ScalarField};
use crate::functional::BarrierSpec;
use crate::{Error, Result};

/// Default number of independent SMC batches behind one estimate.
pub const DEFAULT_BATCHES: usize = 20;

/// Largest population kept by `tree_expectation`.
const TREE_CAP: usize = 1 << 22;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Law of one displacement.
#[derive(Debug, Clone)]
pub enum StepLaw {
    Normal { mean: f64, sd: f64 },
    Exp { rate: f64 },
    Cells(CellLaw),
}

impl StepLaw {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            StepLaw::Normal { mean, sd } => mean + sd * rng.sample::<f64, _>(StandardNormal),
            StepLaw::Exp { rate } => rng.sample::<f64, _>(Exp1) / rate,
            StepLaw::Cells(c) => {
                let (a, b) = (rng.random::<f64>(), rng.random::<f64>());
                c.sample(a, b)
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Count {
    Fixed(usize),
    Poisson(f64),
}

impl Count {
    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        match *self {
            Count::Fixed(c) => c,
            Count::Poisson(m) => Poisson::new(m).map(|p| p.sample(rng) as usize).unwrap_or(0),
        }
    }
}

/// Offspring number and displacement law at time t.
fn reproduction(env: &EnvironmentModel, t: f64) -> Result<(Count, StepLaw)> {
    Ok(match env {
        EnvironmentModel::GaussianBinary { sigma } => (Count::Fixed(2), StepLaw::Normal { mean: 0.0, sd: sigma.eval(t) }),
        EnvironmentModel::Analytic(AnalyticLaplace::ExponentialBinary { rate }) => {
            (Count::Fixed(2), StepLaw::Exp { rate: rate.eval(t) })
        }
        EnvironmentModel::Analytic(AnalyticLaplace::PoissonGaussian { mean, sigma }) => {
            (Count::Poisson(mean.eval(t)), StepLaw::Normal { mean: 0.0, sd: sigma.eval(t) })
        }
        EnvironmentModel::Tabulated(tab) => {
            let (mass, law) = tab.offspring_law(t)?;
            (Count::Poisson(mass), StepLaw::Cells(law))
        }
    })
}

/// Law of X_{n,k}: the displacement law tilted by e^{φℓ − κ_t(φ)}.
pub fn tilted_step_law(env: &EnvironmentModel, t: f64, phi: f64) -> Result<StepLaw> {
    env.kappa(t, phi)?;
    Ok(match env {
        EnvironmentModel::GaussianBinary { sigma }
        | EnvironmentModel::Analytic(AnalyticLaplace::PoissonGaussian { sigma, .. }) => {
            let s = sigma.eval(t);
            StepLaw::Normal { mean: phi * s * s, sd: s }
        }
        EnvironmentModel::Analytic(AnalyticLaplace::ExponentialBinary { rate }) => StepLaw::Exp { rate: rate.eval(t) - phi },
        EnvironmentModel::Tabulated(tab) => StepLaw::Cells(tab.tilted_cells(t, phi)?),
    })
}

/// b̄_k = Σ_{j≤k} b_{j/n} for k = 0..=n.
pub fn path_sums(path: &ScalarField, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.0);
    let mut acc = 0.0;
    for k in 1..=n {
        acc += path.eval(k as f64 / n as f64);
        out.push(acc);
    }
    out
}

/// Bounds of I_k (scaled by n^{1/3}) for k = 0..=n, with F_n ⊆ {1..n} and
/// G_n ⊆ {0..n}.
#[derive(Debug, Clone)]
pub struct PathIntervals {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl PathIntervals {
    pub fn new(spec: &BarrierSpec, n: usize) -> Self {
        let c = (n as f64).cbrt();
        let fm = spec.f_set.discretize(n, 1..=n);
        let gm = spec.g_set.discretize(n, 0..=n);
        let mut lower = vec![f64::NEG_INFINITY; n + 1];
        let mut upper = vec![f64::INFINITY; n + 1];
        for k in 0..=n {
            let t = k as f64 / n as f64;
            if fm[k] {
                lower[k] = spec.f.eval(t) * c;
            }
            if gm[k] {
                upper[k] = spec.g.eval(t) * c;
            }
        }
        PathIntervals { lower, upper }
    }

    /// Ĩ_k = I_k ∩ [−n^{2/3}, n^{2/3}].
    pub fn truncated(mut self, n: usize) -> Self {
        let r = (n as f64).powf(2.0 / 3.0);
        self.lower.iter_mut().for_each(|l| *l = l.max(-r));
        self.upper.iter_mut().for_each(|u| *u = u.min(r));
        self
    }

    pub fn contains(&self, k: usize, x: f64) -> bool {
        x >= self.lower[k] && x <= self.upper[k]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PopulationControl {
    FullTree { max_pop: usize },
    /// Individuals with V − b̄_k < f_{k/n} n^{1/3} at k ∈ F_n are removed.
    Killing { barrier: ScalarField, set: IndicatorSet, max_pop: usize },
}

impl PopulationControl {
    fn max_pop(&self) -> usize {
        match self {
            PopulationControl::FullTree { max_pop } | PopulationControl::Killing { max_pop, .. } => *max_pop,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BrwConfig {
    pub env: EnvironmentModel,
    pub n: usize,
    pub control: PopulationControl,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub survived: bool,
    /// Aborted because the population exceeded `max_pop`.
    pub capped: bool,
    /// M_n; NaN when the trial died out or was capped.
    pub max_displacement: f64,
    /// Λ_n = min over generation n of max_k (b̄_k − V(u_k)); NaN likewise.
    pub cmd: f64,
    /// Population size per generation 0..=n (truncated at abort).
    pub population: Vec<usize>,
    /// Smallest V − threshold among individuals kept at killing times.
    pub barrier_margin: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BrwResult {
    pub trials: Vec<TrialResult>,
}

impl BrwResult {
    pub fn completed(&self) -> impl Iterator<Item = &TrialResult> {
        self.trials.iter().filter(|t| t.survived && !t.capped)
    }
}

/// Simulates `config.trials` independent trees. `path` is the speed
/// profile whose partial sums b̄_k define Λ_n and the killing barrier.
pub fn brw_run(config: &BrwConfig, path: &ScalarField) -> Result<BrwResult> {
    let n = config.n;
    if n == 0 {
        return Err(Error::Invalid("need n >= 1".into()));
    }
    let laws: Vec<(Count, StepLaw)> =
        (0..=n).map(|k| reproduction(&config.env, (k.max(1)) as f64 / n as f64)).collect::<Result<_>>()?;
    let bbar = path_sums(path, n);
    let thresh: Vec<f64> = match &config.control {
        PopulationControl::FullTree { .. } => vec![f64::NEG_INFINITY; n + 1],
        PopulationControl::Killing { barrier, set, .. } => {
            if !(barrier.eval(0.0) < 0.0) {
                return Err(Error::Precondition("killing barrier must start below the path".into()));
            }
            let c = (n as f64).cbrt();
            let mask = set.discretize(n, 1..=n);
            (0..=n)
                .map(|k| if mask[k] { bbar[k] + barrier.eval(k as f64 / n as f64) * c } else { f64::NEG_INFINITY })
                .collect()
        }
    };
    let cap = config.control.max_pop();
    let trials = (0..config.trials)
        .into_par_iter()
        .map(|i| brw_trial(i, config.seed, n, &laws, &bbar, &thresh, cap))
        .collect();
    Ok(BrwResult { trials })
}

fn brw_trial(
    trial: usize,
    seed: u64,
    n: usize,
    laws: &[(Count, StepLaw)],
    bbar: &[f64],
    thresh: &[f64],
    cap: usize,
) -> TrialResult {
    let mut rng = stream_rng(seed, trial as u64);
    // (V(u), max_k b̄_k − V(u_k))
    let mut pop: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    let mut next = Vec::new();
    let mut population = vec![1];
    let mut margin = f64::INFINITY;
    for k in 1..=n {
        let (count, step) = &laws[k];
        next.clear();
        for &(v, lam) in &pop {
            for _ in 0..count.sample(&mut rng) {
                let x = v + step.sample(&mut rng);
                if x < thresh[k] {
                    continue;
                }
                margin = margin.min(x - thresh[k]);
                next.push((x, lam.max(bbar[k] - x)));
            }
        }
        if next.len() > cap {
            population.push(next.len());
            return TrialResult {
                trial,
                survived: true,
                capped: true,
                max_displacement: f64::NAN,
                cmd: f64::NAN,
                population,
                barrier_margin: margin,
            };
        }
        std::mem::swap(&mut pop, &mut next);
        population.push(pop.len());
        if pop.is_empty() {
            break;
        }
    }
    let survived = !pop.is_empty();
    let (m, l) = if survived {
        (
            pop.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max),
            pop.iter().map(|p| p.1).fold(f64::INFINITY, f64::min),
        )
    } else {
        (f64::NAN, f64::NAN)
    };
    TrialResult { trial, survived, capped: false, max_displacement: m, cmd: l, population, barrier_margin: margin }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl Estimate {
    fn from_moments(sum: f64, sumsq: f64, n: usize) -> Self {
        let m = sum / n as f64;
        let var = ((sumsq / n as f64 - m * m) * n as f64 / (n as f64 - 1.0).max(1.0)).max(0.0);
        Estimate { mean: m, std_error: (var / n as f64).sqrt(), samples: n }
    }
}

/// E[Σ_{|u|=n} F(V(u_0), …, V(u_n))] by simulating whole trees. Small n only.
pub fn tree_expectation<F>(env: &EnvironmentModel, n: usize, trials: usize, seed: u64, f: F) -> Result<Estimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let laws: Vec<(Count, StepLaw)> = (0..=n).map(|k| reproduction(env, k.max(1) as f64 / n as f64)).collect::<Result<_>>()?;
    let vals: Vec<Result<f64>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            // per generation: (parent index, position)
            let mut gens: Vec<Vec<(usize, f64)>> = vec![vec![(0, 0.0)]];
            for k in 1..=n {
                let (count, step) = &laws[k];
                let mut next = Vec::new();
                for (p, &(_, v)) in gens[k - 1].iter().enumerate() {
                    for _ in 0..count.sample(&mut rng) {
                        next.push((p, v + step.sample(&mut rng)));
                    }
                }
                if next.len() > TREE_CAP {
                    return Err(Error::PopulationCap { cap: TREE_CAP, generation: k });
                }
                gens.push(next);
            }
            let mut path = vec![0.0; n + 1];
            let mut total = 0.0;
            for leaf in 0..gens[n].len() {
                let mut idx = leaf;
                for k in (0..=n).rev() {
                    path[k] = gens[k][idx].1;
                    idx = gens[k][idx].0;
                }
                total += f(&path);
            }
            Ok(total)
        })
        .collect();
    let vals: Vec<f64> = vals.into_iter().collect::<Result<_>>()?;
    let (s, s2) = vals.iter().fold((0.0, 0.0), |(a, b), v| (a + v, b + v * v));
    Ok(Estimate::from_moments(s, s2, trials))
}

/// The tilted walk of the many-to-one lemma for a weight φ.
#[derive(Debug, Clone)]
pub struct SpineWalk {
    pub n: usize,
    /// φ_{k/n}, k = 0..=n.
    pub phi: Vec<f64>,
    /// b_{k/n} = κ'(φ_{k/n}) (index 0 unused).
    pub b: Vec<f64>,
    /// σ²_{k/n} = κ''(φ_{k/n}) (index 0 unused).
    pub sigma2: Vec<f64>,
    /// E_k = Σ_{j≤k} κ*_{j/n}(b_{j/n}).
    pub energy: Vec<f64>,
    /// b̄_k.
    pub bbar: Vec<f64>,
    laws: Vec<StepLaw>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpineSample {
    /// S_0, …, S_n.
    pub positions: Vec<f64>,
    /// −E_n − φ_1 S̃_n + Σ_{j<n} (φ_{(j+1)/n} − φ_{j/n}) S̃_j.
    pub log_weight: f64,
    /// Whether S̃ stayed in I_k for all k (when intervals were supplied).
    pub respects: Option<bool>,
}

impl SpineWalk {
    pub fn new(env: &EnvironmentModel, phi: &ScalarField, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Invalid("need n >= 1".into()));
        }
        let mut w = SpineWalk {
            n,
            phi: (0..=n).map(|k| phi.eval(k as f64 / n as f64)).collect(),
            b: vec![0.0; n + 1],
            sigma2: vec![0.0; n + 1],
            energy: vec![0.0; n + 1],
            bbar: vec![0.0; n + 1],
            laws: vec![StepLaw::Normal { mean: 0.0, sd: 0.0 }],
        };
        for k in 1..=n {
            let t = k as f64 / n as f64;
            let p = w.phi[k];
            let (kap, d1, d2) = env.kappa_all(t, p)?;
            w.b[k] = d1;
            w.sigma2[k] = d2;
            w.energy[k] = w.energy[k - 1] + p * d1 - kap;
            w.bbar[k] = w.bbar[k - 1] + d1;
            w.laws.push(tilted_step_law(env, t, p)?);
        }
        Ok(w)
    }

    /// X_{n,k}.
    pub fn step<R: Rng>(&self, k: usize, rng: &mut R) -> f64 {
        self.laws[k].sample(rng)
    }

    /// Log many-to-one weight of a trajectory at generation k.
    pub fn log_weight_at(&self, k: usize, positions: &[f64]) -> f64 {
        let mut acc = -self.energy[k];
        for j in 1..=k {
            acc -= self.phi[j] * (positions[j] - positions[j - 1] - self.b[j]);
        }
        acc
    }

    pub fn sample<R: Rng>(&self, rng: &mut R, intervals: Option<&PathIntervals>) -> SpineSample {
        let mut positions = Vec::with_capacity(self.n + 1);
        positions.push(0.0);
        let mut lw = -self.energy[self.n];
        let mut ok = true;
        for k in 1..=self.n {
            let x = self.step(k, rng);
            lw -= self.phi[k] * (x - self.b[k]);
            let s = positions[k - 1] + x;
            if let Some(iv) = intervals {
                ok &= iv.contains(k, s - self.bbar[k]);
            }
            positions.push(s);
        }
        SpineSample { positions, log_weight: lw, respects: intervals.map(|_| ok) }
    }
}

/// E[Σ_{|u|=n} F(V(u_j), j ≤ n)] through the many-to-one lemma.
pub fn spine_expectation<F>(walk: &SpineWalk, samples: usize, seed: u64, f: F) -> Estimate
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let chunks = 64usize.min(samples.max(1));
    let parts: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let count = samples / chunks + usize::from(c < samples % chunks);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                let sm = walk.sample(&mut rng, None);
                let v = sm.log_weight.exp() * f(&sm.positions);
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = parts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    Estimate::from_moments(s, s2, samples)
}

/// Mean of unbiased estimates held in log space, with the relative
/// standard error of that mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogEstimate {
    pub log_mean: f64,
    pub rel_std_error: f64,
    pub batches: usize,
    pub zero_batches: usize,
}

fn combine_logs(logs: &[f64]) -> LogEstimate {
    let b = logs.len();
    let zero = logs.iter().filter(|l| **l == f64::NEG_INFINITY).count();
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return LogEstimate { log_mean: m, rel_std_error: f64::NAN, batches: b, zero_batches: zero };
    }
    let v: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
    let mean = v.iter().sum::<f64>() / b as f64;
    let var = if b > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (b - 1) as f64 } else { f64::NAN };
    LogEstimate { log_mean: m + mean.ln(), rel_std_error: (var / b as f64).sqrt() / mean, batches: b, zero_batches: zero }
}

struct SmcResult {
    /// log of the final normaliser times the terminal weight.
    log_final: f64,
    /// log of the total exit weight absorbed at the upper bound.
    log_absorbed: f64,
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Log-weights of one SMC run, as functions of the generation k and the new
/// position y. `stay` applies to particles that remain in I_k, `exit` (if
/// any) to particles that leave I_k upwards, which are absorbed, and
/// `terminal` (if any) multiplies the survivors at generation n.
struct SmcWeights<'a> {
    stay: &'a (dyn Fn(usize, f64) -> f64 + Sync),
    exit: Option<&'a (dyn Fn(usize, f64) -> f64 + Sync)>,
    terminal: Option<&'a (dyn Fn(f64) -> f64 + Sync)>,
}

/// One SMC run: `step(k, x, rng)` moves a particle. Particles leaving I_k
/// die unless absorbed. Resampling is systematic, triggered when the
/// effective sample size drops below half the particle count.
fn smc_run<S>(n: usize, iv: &PathIntervals, step: &S, wt: &SmcWeights, particles: usize, rng: &mut ChaCha8Rng) -> SmcResult
where
    S: Fn(usize, f64, &mut ChaCha8Rng) -> f64,
{
    let mut xs = vec![0.0; particles];
    let mut ws = vec![1.0 / particles as f64; particles];
    let mut nx = Vec::with_capacity(particles);
    let mut nl = Vec::with_capacity(particles);
    let mut nw = Vec::with_capacity(particles);
    let mut cross: Vec<f64> = Vec::new();
    let mut log_z = 0.0;
    let mut log_abs = f64::NEG_INFINITY;
    for k in 1..=n {
        nx.clear();
        nl.clear();
        nw.clear();
        cross.clear();
        let mut lmax = f64::NEG_INFINITY;
        for (i, &x) in xs.iter().enumerate() {
            let y = step(k, x, rng);
            if iv.contains(k, y) {
                let l = (wt.stay)(k, y);
                nx.push(y);
                nl.push(l);
                nw.push(ws[i]);
                lmax = lmax.max(l);
            } else if let Some(exit) = wt.exit {
                if y > iv.upper[k] {
                    cross.push(ws[i].ln() + exit(k, y));
                }
            }
        }
        if !cross.is_empty() {
            let m = cross.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let s = m + cross.iter().map(|c| (c - m).exp()).sum::<f64>().ln();
            log_abs = log_add(log_abs, log_z + s);
        }
        if nx.is_empty() {
            return SmcResult { log_final: f64::NEG_INFINITY, log_absorbed: log_abs };
        }
        let mut total = 0.0;
        for (w, l) in nw.iter_mut().zip(&nl) {
            *w *= (l - lmax).exp();
            total += *w;
        }
        log_z += lmax + total.ln();
        nw.iter_mut().for_each(|w| *w /= total);
        std::mem::swap(&mut xs, &mut nx);
        std::mem::swap(&mut ws, &mut nw);
        let ess = 1.0 / ws.iter().map(|w| w * w).sum::<f64>();
        if ess < 0.5 * particles as f64 {
            let u0: f64 = rng.random::<f64>() / particles as f64;
            let mut out = Vec::with_capacity(particles);
            let mut cum = ws[0];
            let mut j = 0;
            for i in 0..particles {
                let u = u0 + i as f64 / particles as f64;
                while u > cum && j + 1 < ws.len() {
                    j += 1;
                    cum += ws[j];
                }
                out.push(xs[j]);
            }
            xs = out;
            ws = vec![1.0 / particles as f64; particles];
        }
    }
    let log_final = match wt.terminal {
        None => log_z,
        Some(term) => {
            let ls: Vec<f64> = xs.iter().zip(&ws).map(|(x, w)| w.ln() + term(*x)).collect();
            let m = ls.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if m == f64::NEG_INFINITY {
                m
            } else {
                log_z + m + ls.iter().map(|l| (l - m).exp()).sum::<f64>().ln()
            }
        }
    };
    SmcResult { log_final, log_absorbed: log_abs }
}

fn batch_sizes(trials: usize, batches: usize) -> Vec<usize> {
    let b = batches.clamp(1, trials.max(1));
    (0..b).map(|i| trials / b + usize::from(i < trials % b)).collect()
}

/// SMC estimate of E[exp(Σ_j (h_{(j+1)/n} − h_{j/n}) S_j); S_j ∈ I_j ∀ j]
/// for a centred Gaussian walk with variances σ²_{j/n}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RwEstimate {
    pub n: usize,
    pub log_estimate: LogEstimate,
    /// log-estimate / n^{1/3}.
    pub scaled: f64,
    /// Standard error of `scaled`.
    pub std_error: f64,
}

pub fn rw_weighted_expectation(
    sigma: &ScalarField,
    spec: &BarrierSpec,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<RwEstimate> {
    rw_weighted_expectation_batched(sigma, spec, n, trials, DEFAULT_BATCHES, seed)
}

pub fn rw_weighted_expectation_batched(
    sigma: &ScalarField,
    spec: &BarrierSpec,
    n: usize,
    trials: usize,
    batches: usize,
    seed: u64,
) -> Result<RwEstimate> {
    if n == 0 || trials == 0 {
        return Err(Error::Invalid("need n >= 1 and trials >= 1".into()));
    }
    spec.validate_slopes(n.clamp(64, 4096))?;
    let iv = PathIntervals::new(spec, n);
    if !iv.contains(0, 0.0) {
        return Err(Error::Precondition("the walk starts outside I_0".into()));
    }
    let sd: Vec<f64> = (0..=n).map(|k| sigma.eval(k as f64 / n as f64)).collect();
    let dh: Vec<f64> =
        (0..=n).map(|k| spec.h.eval(((k + 1) as f64 / n as f64).min(1.0)) - spec.h.eval(k as f64 / n as f64)).collect();
    let step = |k: usize, x: f64, rng: &mut ChaCha8Rng| x + sd[k] * rng.sample::<f64, _>(StandardNormal);
    let stay = |k: usize, y: f64| dh[k] * y;
    let wt = SmcWeights { stay: &stay, exit: None, terminal: None };
    let sizes = batch_sizes(trials, batches);
    let logs: Vec<f64> = sizes
        .par_iter()
        .enumerate()
        .map(|(b, &p)| smc_run(n, &iv, &step, &wt, p, &mut stream_rng(seed, b as u64)).log_final)
        .collect();
    let est = combine_logs(&logs);
    if est.log_mean == f64::NEG_INFINITY {
        return Err(Error::NoSurvivors(format!("all {} batches died out at n = {n}", logs.len())));
    }
    let c = (n as f64).cbrt();
    Ok(RwEstimate { n, log_estimate: est, scaled: est.log_mean / c, std_error: est.rel_std_error / c })
}

/// First-moment estimates of A_n (crossings of the upper frontier at
/// G_n-times) and B_n (end-point survivors above (g_1 − x)n^{1/3}).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountEstimate {
    pub n: usize,
    pub a: LogEstimate,
    pub b: LogEstimate,
}

pub fn spine_estimate_counts(
    env: &EnvironmentModel,
    phi: &ScalarField,
    spec: &BarrierSpec,
    x: f64,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<CountEstimate> {
    let walk = SpineWalk::new(env, phi, n)?;
    let c = (n as f64).cbrt();
    let g1 = spec.g.eval(1.0);
    let f1 = spec.f.eval(1.0);
    if !(x > 0.0 && x < g1 - f1) {
        return Err(Error::Precondition(format!("need 0 < x < g_1 - f_1, got x = {x}")));
    }
    let iv = PathIntervals::new(spec, n);
    let iv_tilde = iv.clone().truncated(n);
    // −φ_k S̃_k + Σ_{j<k} (φ_{j+1} − φ_j) S̃_j, spread over the steps
    let step = |k: usize, s: f64, rng: &mut ChaCha8Rng| s + walk.step(k, rng) - walk.b[k];
    let stay = |k: usize, y: f64| if k < n { (walk.phi[k + 1] - walk.phi[k]) * y } else { 0.0 };
    let exit = |k: usize, y: f64| -walk.energy[k] - walk.phi[k] * y;
    let lo = (g1 - x) * c;
    let terminal = |y: f64| if y >= lo { -walk.phi[n] * y } else { f64::NEG_INFINITY };
    let a_wt = SmcWeights { stay: &stay, exit: Some(&exit), terminal: None };
    let b_wt = SmcWeights { stay: &stay, exit: None, terminal: Some(&terminal) };
    let sizes = batch_sizes(trials, DEFAULT_BATCHES);
    let a_logs: Vec<f64> = sizes
        .par_iter()
        .enumerate()
        .map(|(b, &p)| smc_run(n, &iv, &step, &a_wt, p, &mut stream_rng(seed, b as u64)).log_absorbed)
        .collect();
    let b_logs: Vec<f64> = sizes
        .par_iter()
        .enumerate()
        .map(|(b, &p)| smc_run(n, &iv_tilde, &step, &b_wt, p, &mut stream_rng(seed, (1 << 32) + b as u64)).log_final - walk.energy[n])
        .collect();
    Ok(CountEstimate { n, a: combine_logs(&a_logs), b: combine_logs(&b_logs) })
}
