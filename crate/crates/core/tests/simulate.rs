use std::f64::consts::{LN_2, PI};

use brwtie::environment::*;
use brwtie::functional::{eval_h, BarrierSpec};
use brwtie::quad::GaussLegendre;
use brwtie::simulate::*;
use brwtie::{takacs_constant, Error};
use proptest::prelude::*;

fn gauss(sigma: ScalarField) -> EnvironmentModel {
    EnvironmentModel::gaussian_binary(sigma).unwrap()
}

fn full_tree(env: EnvironmentModel, n: usize, trials: usize, seed: u64) -> BrwConfig {
    BrwConfig { env, n, control: PopulationControl::FullTree { max_pop: 1 << 20 }, trials, seed }
}

fn band(f: f64, g: f64, slope: f64) -> BarrierSpec {
    BarrierSpec {
        f: f.into(),
        g: g.into(),
        f_set: IndicatorSet::full(),
        g_set: IndicatorSet::full(),
        h: ScalarField::affine(0.0, slope),
    }
}

/// log E[exp(Σ_j (h_{(j+1)/n∧1} − h_{j/n}) S_j); a ≤ S_j ≤ b ∀ j ≥ 1] for a
/// standard Gaussian walk, by Nyström iteration of the killed kernel.
fn transfer_oracle(n: usize, a: f64, b: f64, slope: f64) -> f64 {
    let g = GaussLegendre::new(8);
    let panels = ((b - a) / 0.25).ceil() as usize;
    let mut xs = Vec::new();
    let mut ws = Vec::new();
    for p in 0..panels {
        let lo = a + (b - a) * p as f64 / panels as f64;
        let half = 0.5 * (b - a) / panels as f64;
        for (x, w) in g.nodes.iter().zip(&g.weights) {
            xs.push(lo + half * (1.0 + x));
            ws.push(w * half);
        }
    }
    let dens = |d: f64| (-0.5 * d * d).exp() / (2.0 * PI).sqrt();
    let dh = |k: usize| slope * (((k + 1) as f64 / n as f64).min(1.0) - k as f64 / n as f64);
    let mut u: Vec<f64> = xs.iter().map(|y| dens(*y) * (dh(1) * y).exp()).collect();
    let mut log_scale = 0.0;
    for k in 2..=n {
        let nu: Vec<f64> = xs
            .iter()
            .map(|y| (dh(k) * y).exp() * (0..xs.len()).map(|j| ws[j] * u[j] * dens(y - xs[j])).sum::<f64>())
            .collect();
        let m = nu.iter().cloned().fold(0.0, f64::max);
        log_scale += m.ln();
        u = nu.iter().map(|v| v / m).collect();
    }
    log_scale + ws.iter().zip(&u).map(|(w, v)| w * v).sum::<f64>().ln()
}

#[test]
fn brw_is_deterministic_per_seed() {
    let cfg = full_tree(gauss(1.0.into()), 8, 20, 42);
    let path = ScalarField::constant((2.0 * LN_2).sqrt());
    let a = brw_run(&cfg, &path).unwrap();
    let b = brw_run(&cfg, &path).unwrap();
    assert_eq!(a.trials, b.trials);
    let c = brw_run(&BrwConfig { seed: 43, ..cfg }, &path).unwrap();
    assert_ne!(a.trials[0].max_displacement, c.trials[0].max_displacement);
    assert_eq!(a.trials[3].population, vec![1, 2, 4, 8, 16, 32, 64, 128, 256]);
}

#[test]
fn cmd_dominates_delay_of_the_maximum() {
    // Λ(u) ≥ b̄_n − V(u) for every leaf, hence Λ_n ≥ b̄_n − M_n
    let v = (2.0 * LN_2).sqrt();
    let res = brw_run(&full_tree(gauss(1.0.into()), 10, 200, 5), &ScalarField::constant(v)).unwrap();
    for t in res.completed() {
        assert!(t.cmd >= 10.0 * v - t.max_displacement - 1e-12);
        assert!(t.cmd >= 0.0);
    }
}

#[test]
fn killing_respects_barrier_exactly() {
    let env = gauss(1.0.into());
    let v = (2.0 * LN_2).sqrt();
    let control = PopulationControl::Killing { barrier: (-0.5).into(), set: IndicatorSet::full(), max_pop: 1 << 20 };
    let cfg = BrwConfig { env, n: 27, control, trials: 50, seed: 3 };
    let res = brw_run(&cfg, &ScalarField::constant(v)).unwrap();
    for t in &res.trials {
        assert!(t.barrier_margin >= 0.0);
        assert!(!t.capped);
    }
    assert!(res.trials.iter().any(|t| t.population.last() < Some(&(1 << 27))));
}

#[test]
fn far_barrier_does_not_change_survival() {
    let env = EnvironmentModel::poisson_gaussian(1.5.into(), 1.0.into()).unwrap();
    let path = ScalarField::constant(0.0);
    let free = brw_run(&full_tree(env.clone(), 10, 4000, 11), &path).unwrap();
    let control = PopulationControl::Killing { barrier: (-1e3).into(), set: IndicatorSet::full(), max_pop: 1 << 20 };
    let killed = brw_run(&BrwConfig { env, n: 10, control, trials: 4000, seed: 12 }, &path).unwrap();
    let p = |r: &BrwResult| r.trials.iter().filter(|t| t.survived).count() as f64 / r.trials.len() as f64;
    let (a, b) = (p(&free), p(&killed));
    let se = (a * (1.0 - a) / 4000.0 * 2.0).sqrt();
    assert!((a - b).abs() < 4.0 * se, "{a} {b}");
}

#[test]
fn population_cap_is_flagged() {
    let cfg = BrwConfig { control: PopulationControl::FullTree { max_pop: 100 }, ..full_tree(gauss(1.0.into()), 10, 3, 1) };
    let res = brw_run(&cfg, &0.0.into()).unwrap();
    assert!(res.trials.iter().all(|t| t.capped && t.max_displacement.is_nan()));
    assert_eq!(res.completed().count(), 0);
}

fn tilted_moments_ok(env: &EnvironmentModel, t: f64, phi: f64) {
    let law = tilted_step_law(env, t, phi).unwrap();
    let (_, b, s2) = env.kappa_all(t, phi).unwrap();
    let mut rng = stream_rng(9, 0);
    let n = 200_000;
    let xs: Vec<f64> = (0..n).map(|_| law.sample(&mut rng)).collect();
    let m = xs.iter().sum::<f64>() / n as f64;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n as f64;
    let band_m = 4.0 * (s2 / n as f64).sqrt();
    let band_v = 4.0 * ((m4 - v * v) / n as f64).sqrt();
    assert!((m - b).abs() < band_m, "mean {m} vs {b}");
    assert!((v - s2).abs() < band_v, "variance {v} vs {s2}");
}

#[test]
fn tilted_step_moments() {
    tilted_moments_ok(&gauss(ScalarField::affine(1.0, 1.0)), 0.3, 0.9);
    tilted_moments_ok(&EnvironmentModel::exponential_binary(2.0.into()).unwrap(), 0.5, 0.7);
    tilted_moments_ok(&EnvironmentModel::poisson_gaussian(3.0.into(), 0.5.into()).unwrap(), 0.5, 1.2);
    // uniform intensity 1.5 on [-1, 1]: κ(θ) = log(1.5 · 2 sinh θ / θ)
    let it = Intensity { ell_start: -1.0, ell_step: 0.01, cells: 200, density: vec![1.5; 400] };
    let tab = TabulatedLaplace::from_intensity(it, 2, 4.0, 401).unwrap();
    let env = EnvironmentModel::tabulated(tab).unwrap();
    let (k, _, _) = env.kappa_all(0.5, 1.0).unwrap();
    assert!((k - (3.0 * 1f64.sinh()).ln()).abs() < 1e-8);
    tilted_moments_ok(&env, 0.5, 1.0);
}

#[test]
fn tabulated_without_intensity_is_unsupported() {
    let tab = TabulatedLaplace::from_fn(|_, th| LN_2 + th * th / 2.0, 3, 4.0, 41);
    let env = EnvironmentModel::tabulated(tab).unwrap();
    let cfg = full_tree(env.clone(), 4, 2, 0);
    assert!(matches!(brw_run(&cfg, &0.0.into()), Err(Error::Unsupported(_))));
    assert!(matches!(SpineWalk::new(&env, &1.0.into(), 4), Err(Error::Unsupported(_))));
}

#[test]
fn unconstrained_count_is_two_to_the_k() {
    let env = gauss(ScalarField::affine(1.0, 0.5));
    for k in [4usize, 8] {
        let walk = SpineWalk::new(&env, &env.theta_bar_field(), k).unwrap();
        let e = spine_expectation(&walk, 100_000, 17, |_| 1.0);
        let want = 2f64.powi(k as i32);
        assert!((e.mean - want).abs() < 3.0 * e.std_error, "k = {k}: {} ± {}", e.mean, e.std_error);
    }
}

#[test]
fn many_to_one_matches_full_trees() {
    let env = gauss(ScalarField::affine(1.0, 0.5));
    let n = 6;
    let walk = SpineWalk::new(&env, &env.theta_bar_field(), n).unwrap();
    let bbar = walk.bbar.clone();
    type Functional = Box<dyn Fn(&[f64]) -> f64 + Sync>;
    let fs: Vec<Functional> = vec![
        Box::new(|p: &[f64]| f64::from(p[6] > 2.0)),
        Box::new(move |p: &[f64]| f64::from((1..=6).all(|k| p[k] - bbar[k] > -3.0))),
        Box::new(|p: &[f64]| (-p[3].abs()).exp()),
        Box::new(|p: &[f64]| f64::from(p.iter().cloned().fold(f64::NEG_INFINITY, f64::max) < 3.0)),
        Box::new(|p: &[f64]| (p[6] - p[2]).tanh().abs()),
    ];
    for (i, f) in fs.iter().enumerate() {
        let a = tree_expectation(&env, n, 20_000, 100 + i as u64, f).unwrap();
        let b = spine_expectation(&walk, 100_000, 200 + i as u64, f);
        let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
        assert!((a.mean - b.mean).abs() < 4.0 * se, "functional {i}: {} vs {} (se {se})", a.mean, b.mean);
    }
}

#[test]
fn weighted_band_expectation_matches_transfer_operator() {
    let n = 1000;
    let c = (n as f64).cbrt();
    for slope in [0.0, 0.8, -0.8] {
        let est = rw_weighted_expectation(&1.0.into(), &band(-1.0, 1.0, slope), n, 4000, 21).unwrap();
        let oracle = transfer_oracle(n, -c, c, slope);
        let se = est.log_estimate.rel_std_error;
        assert!((est.log_estimate.log_mean - oracle).abs() < 4.0 * se + 1e-3, "slope {slope}: {} vs {oracle} (se {se})", est.log_estimate.log_mean);
    }
}

#[test]
fn mogulskii_direction() {
    // finite-n rate sits above −π²/8 and moves towards it
    let spec = band(-1.0, 1.0, 0.0);
    let a = rw_weighted_expectation(&1.0.into(), &spec, 1000, 2000, 1).unwrap().scaled;
    let b = rw_weighted_expectation(&1.0.into(), &spec, 8000, 2000, 2).unwrap().scaled;
    let lim = -PI * PI / 8.0;
    assert!(a > b && b > lim, "{a} {b}");
}

#[test]
fn slope_sign_violation_is_rejected() {
    let mut spec = band(-1.0, 1.0, 1.0);
    spec.g_set = IndicatorSet::empty();
    assert!(matches!(rw_weighted_expectation(&1.0.into(), &spec, 100, 10, 0), Err(Error::Precondition(_))));
}

#[test]
fn smc_counts_match_plain_spine_estimates() {
    let env = gauss(1.0.into());
    let theta = (2.0 * LN_2).sqrt();
    let phi = ScalarField::constant(theta);
    let n = 64;
    let spec = band(-1.0, 0.5, 0.0);
    let x = 1.0;
    let smc = spine_estimate_counts(&env, &phi, &spec, x, n, 20_000, 4).unwrap();
    let walk = SpineWalk::new(&env, &phi, n).unwrap();
    let iv = PathIntervals::new(&spec, n);
    let ivt = iv.clone().truncated(n);
    let c = (n as f64).cbrt();
    // plain importance sampling over whole spine trajectories
    let mut rng = stream_rng(77, 0);
    let m = 200_000;
    let (mut sa, mut sa2, mut sb, mut sb2) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..m {
        let s = walk.sample(&mut rng, None);
        let mut a = 0.0;
        for k in 1..=n {
            let y = s.positions[k] - walk.bbar[k];
            if !iv.contains(k, y) {
                if y > iv.upper[k] {
                    a = walk.log_weight_at(k, &s.positions).exp();
                }
                break;
            }
        }
        let inside = (1..=n).all(|k| ivt.contains(k, s.positions[k] - walk.bbar[k]));
        let b = if inside && s.positions[n] - walk.bbar[n] >= (0.5 - x) * c { s.log_weight.exp() } else { 0.0 };
        sa += a;
        sa2 += a * a;
        sb += b;
        sb2 += b * b;
    }
    let est = |s: f64, s2: f64| {
        let mean = s / m as f64;
        (mean, ((s2 / m as f64 - mean * mean) / m as f64).sqrt())
    };
    let (ma, ea) = est(sa, sa2);
    let (mb, eb) = est(sb, sb2);
    let (qa, qb) = (smc.a.log_mean.exp(), smc.b.log_mean.exp());
    let sea = (ea.powi(2) + (qa * smc.a.rel_std_error).powi(2)).sqrt();
    let seb = (eb.powi(2) + (qb * smc.b.rel_std_error).powi(2)).sqrt();
    assert!((ma - qa).abs() < 4.0 * sea, "A: {ma} vs {qa}");
    assert!((mb - qb).abs() < 4.0 * seb, "B: {mb} vs {qb}");
}

#[test]
fn takacs_trend() {
    let spec = BarrierSpec {
        f: f64::NEG_INFINITY.into(),
        g: 0.0.into(),
        f_set: IndicatorSet::empty(),
        g_set: IndicatorSet::full(),
        h: ScalarField::affine(0.0, 1.0),
    };
    let lim = takacs_constant();
    // the n^{-1/3} log n correction peaks near n = 1e4, so start beyond it
    let d: Vec<f64> = [8000usize, 64_000, 512_000]
        .iter()
        .map(|&n| (rw_weighted_expectation(&1.0.into(), &spec, n, 1000, n as u64).unwrap().scaled - lim).abs())
        .collect();
    assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
}

#[test]
fn b_count_trend() {
    let env = gauss(1.0.into());
    let theta = (2.0 * LN_2).sqrt();
    let phi = ScalarField::constant(theta);
    let spec = BarrierSpec { h: phi.clone(), ..band(-1.0, 0.5, 0.0) };
    let x = 1.0;
    let lim = eval_h(&spec, &1.0.into(), 1.0).unwrap() - theta * (0.5 - x);
    let d: Vec<f64> = [64usize, 216, 512, 1000]
        .iter()
        .map(|&n| {
            let c = spine_estimate_counts(&env, &phi, &spec, x, n, 4000, 9).unwrap();
            (c.b.log_mean / (n as f64).cbrt() - lim).abs()
        })
        .collect();
    assert!(d.windows(2).all(|w| w[0] > w[1]), "{d:?} (limit {lim})");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn trials_reproduce_from_seed(seed in 0u64..1000, n in 1usize..9) {
        let cfg = full_tree(gauss(ScalarField::affine(1.0, 0.3)), n, 4, seed);
        let a = brw_run(&cfg, &1.0.into()).unwrap();
        let b = brw_run(&cfg, &1.0.into()).unwrap();
        prop_assert_eq!(a.trials, b.trials);
    }
}
