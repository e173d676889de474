use std::f64::consts::LN_2;

use brwtie::environment::*;
use proptest::prelude::*;

fn gauss(sigma: ScalarField) -> EnvironmentModel {
    EnvironmentModel::gaussian_binary(sigma).unwrap()
}

fn tabulated_from(env: &EnvironmentModel) -> EnvironmentModel {
    let e = env.clone();
    let tab = TabulatedLaplace::from_fn(move |t, th| e.kappa(t, th).unwrap(), 1001, 6.0, 601);
    EnvironmentModel::tabulated(tab).unwrap()
}

#[test]
fn gaussian_kappa_closed_form() {
    let env = gauss(1.0.into());
    for &th in &[0.0, 0.3, 1.0, 2.5] {
        assert!((env.kappa(0.4, th).unwrap() - (LN_2 + th * th / 2.0)).abs() < 1e-15);
    }
    assert_eq!(env.kappa(0.0, 0.0).unwrap(), LN_2);
    assert!(env.kappa(0.5, -1.0).is_err());
    assert!(env.kappa(1.5, 1.0).is_err());
}

#[test]
fn gaussian_kappa_star_closed_form() {
    let env = gauss(1.0.into());
    for &a in &[0.1, 0.7, 1.3, 3.0] {
        assert!((env.kappa_star(0.2, a).unwrap() - (a * a / 2.0 - LN_2)).abs() < 1e-14);
    }
    assert!((env.kappa_star(0.2, -1.0).unwrap() + LN_2).abs() < 1e-15);
}

#[test]
fn natural_speed_gaussian() {
    let env = gauss(ScalarField::affine(2.0, -1.0));
    let r = (2.0 * LN_2).sqrt();
    for i in 0..=10 {
        let t = i as f64 / 10.0;
        let s = 2.0 - t;
        let (v, th) = env.natural_speed(t).unwrap();
        assert!((v - s * r).abs() < 1e-14);
        assert!((th - r / s).abs() < 1e-14);
        assert!(env.kappa_star(t, v).unwrap().abs() < 1e-9);
    }
    let ths: Vec<f64> = (0..=100).map(|i| env.natural_speed(i as f64 / 100.0).unwrap().1).collect();
    assert!(ths.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn natural_speed_numeric_path_agrees_with_closed_form() {
    // PoissonGaussian with mean 2 is the Gaussian binary law in κ.
    let pg = EnvironmentModel::poisson_gaussian(2.0.into(), ScalarField::affine(1.0, 1.0)).unwrap();
    let gb = gauss(ScalarField::affine(1.0, 1.0));
    for i in 0..=8 {
        let t = i as f64 / 8.0;
        let (v1, t1) = pg.natural_speed(t).unwrap();
        let (v2, t2) = gb.natural_speed(t).unwrap();
        assert!((v1 - v2).abs() < 1e-12 && (t1 - t2).abs() < 1e-12);
    }
}

#[test]
fn exponential_binary_speed() {
    // β = 1: θ̄ solves θ/(1−θ) = log(2/(1−θ)).
    let env = EnvironmentModel::exponential_binary(1.0.into()).unwrap();
    let (v, th) = env.natural_speed(0.3).unwrap();
    assert!((th / (1.0 - th) - (2.0 / (1.0 - th)).ln()).abs() < 1e-12);
    assert!((v - 1.0 / (1.0 - th)).abs() < 1e-12);
    assert!(env.kappa(0.3, 1.0).is_err());
    assert!(env.kappa_star(0.3, v).unwrap().abs() < 1e-9);
}

#[test]
fn supercriticality_is_validated() {
    assert!(EnvironmentModel::poisson_gaussian(0.9.into(), 1.0.into()).is_err());
    assert!(EnvironmentModel::gaussian_binary(ScalarField::affine(1.0, -2.0)).is_err());
}

#[test]
fn tabulated_round_trip() {
    let env = gauss(ScalarField::affine(2.0, -1.0));
    let tab = tabulated_from(&env);
    for i in 0..=20 {
        let t = i as f64 / 20.0 + 0.013 * (i % 3) as f64;
        let t = t.min(1.0);
        for j in 0..30 {
            let th = 0.037 + j as f64 * 0.15;
            let a = env.kappa(t, th).unwrap();
            let b = tab.kappa(t, th).unwrap();
            assert!((a - b).abs() < 1e-6, "t = {t}, th = {th}: {a} vs {b}");
        }
        for &a in &[0.3, 1.0, 2.0] {
            let k1 = env.kappa_star(t, a).unwrap();
            let k2 = tab.kappa_star(t, a).unwrap();
            assert!((k1 - k2).abs() < 1e-5, "kappa_star t = {t}, a = {a}: {k1} vs {k2}");
        }
        let (v1, _) = env.natural_speed(t).unwrap();
        let (v2, _) = tab.natural_speed(t).unwrap();
        assert!((v1 - v2).abs() < 1e-5);
    }
}

#[test]
fn tabulated_domain_edge() {
    let env = gauss(1.0.into());
    let tab = tabulated_from(&env);
    assert!(tab.kappa(0.5, 6.5).is_err());
    // κ'(θ_max) = 6 < 10, so κ*(10) would need θ beyond the table.
    assert!(matches!(tab.kappa_star(0.5, 10.0), Err(brwtie::Error::Domain(_))));
}

#[test]
fn tabulated_kappa_star_by_golden_section() {
    let env = gauss(ScalarField::affine(1.0, 1.0));
    let tab = tabulated_from(&env);
    for &(t, a) in &[(0.1, 0.5), (0.5, 1.5), (0.9, 2.5)] {
        let (_, k) = brwtie::quad::golden_max(|th| th * a - tab.kappa(t, th).unwrap(), 0.0, 5.99, 1e-12);
        let ks = tab.kappa_star(t, a).unwrap();
        assert!((ks - k).abs() < 1e-9, "{ks} vs {k}");
        assert!((env.kappa_star(t, a).unwrap() - k).abs() < 1e-5);
    }
}

#[test]
fn duality_round_trip_tabulated() {
    // κ_t(θ) = sup_a [θa − κ*_t(a)], with the sup at a = κ'_t(θ).
    let env = gauss(ScalarField::affine(2.0, -1.0));
    let tab = tabulated_from(&env);
    for &(t, th) in &[(0.2, 0.4), (0.5, 1.0), (0.8, 2.0)] {
        let hi = tab.d_kappa(t, th).unwrap() * 3.0;
        let (_, v) = brwtie::quad::golden_max(|a| th * a - tab.kappa_star(t, a).unwrap(), 0.0, hi, 1e-10);
        assert!((v - env.kappa(t, th).unwrap()).abs() < 1e-5);
    }
}

#[test]
fn intensity_built_table() {
    // Mean measure 2·N(0,1) density on [-8, 8]: κ ≈ log 2 + θ²/2.
    let cells = 3200;
    let (lo, step) = (-8.0, 16.0 / cells as f64);
    let row: Vec<f64> = (0..cells)
        .map(|j| {
            let x = lo + (j as f64 + 0.5) * step;
            2.0 * (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
        })
        .collect();
    let density: Vec<f64> = row.iter().chain(row.iter()).copied().collect();
    let it = Intensity { ell_start: lo, ell_step: step, cells, density };
    let tab = TabulatedLaplace::from_intensity(it, 2, 3.0, 301).unwrap();
    let env = EnvironmentModel::tabulated(tab.clone()).unwrap();
    for &th in &[0.0, 0.5, 1.0, 2.0] {
        assert!((env.kappa(0.5, th).unwrap() - (LN_2 + th * th / 2.0)).abs() < 1e-4);
    }
    let (mass, _) = tab.offspring_law(0.3).unwrap();
    assert!((mass - 2.0).abs() < 1e-4);
    assert!(EnvironmentModel::tabulated(TabulatedLaplace::from_fn(|_, th| LN_2 + th, 3, 2.0, 11))
        .unwrap()
        .kappa(0.5, 0.3)
        .is_ok());
}

#[test]
fn theta_bar_derivative_matches_difference() {
    let envs = [
        gauss(ScalarField::kink(1.0, 1.0, 0.5)),
        EnvironmentModel::exponential_binary(ScalarField::affine(1.0, 0.5)).unwrap(),
        EnvironmentModel::poisson_gaussian(ScalarField::affine(2.0, 1.0), 1.0.into()).unwrap(),
    ];
    for env in &envs {
        for &t in &[0.1, 0.3, 0.7, 0.9] {
            let e = 1e-5;
            let fd = (env.natural_speed(t + e).unwrap().1 - env.natural_speed(t - e).unwrap().1) / (2.0 * e);
            let d = env.theta_bar_derivative(t).unwrap();
            assert!((fd - d).abs() < 1e-5, "t = {t}: {fd} vs {d}");
        }
    }
}

#[test]
fn field_ftc_residual() {
    let env = gauss(ScalarField::affine(2.0, -1.0));
    let f = env.theta_bar_field();
    assert!(f.ftc_residual(200).unwrap() <= 1e-8);
}

fn all_envs() -> Vec<EnvironmentModel> {
    let g = gauss(ScalarField::affine(2.0, -1.0));
    vec![
        g.clone(),
        tabulated_from(&g),
        EnvironmentModel::exponential_binary(ScalarField::affine(1.0, 0.5)).unwrap(),
        EnvironmentModel::poisson_gaussian(ScalarField::affine(2.0, 1.0), 1.0.into()).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kappa_convex(t in 0.0f64..1.0, a in 0.0f64..0.9, b in 0.0f64..0.9) {
        for env in all_envs() {
            let m = env.kappa(t, 0.5 * (a + b)).unwrap();
            prop_assert!(m <= 0.5 * (env.kappa(t, a).unwrap() + env.kappa(t, b).unwrap()) + 1e-9);
            prop_assert!(env.d2_kappa(t, a).unwrap() >= 0.0);
        }
    }

    #[test]
    fn legendre_residual(t in 0.0f64..1.0, a in 0.5f64..2.5) {
        for env in all_envs() {
            let (ks, th) = env.kappa_star_with_arg(t, a).unwrap();
            prop_assert!((th * a - env.kappa(t, th).unwrap() - ks).abs() <= 1e-9);
        }
    }

    #[test]
    fn derivatives_match_differences(t in 0.05f64..0.95, th in 0.1f64..0.8, a in 0.8f64..2.0) {
        let e = 1e-5;
        for env in all_envs() {
            let fd = (env.kappa(t, th + e).unwrap() - env.kappa(t, th - e).unwrap()) / (2.0 * e);
            prop_assert!((fd - env.d_kappa(t, th).unwrap()).abs() <= 1e-6);
            let fd2 = (env.kappa_star(t, a + e).unwrap() - env.kappa_star(t, a - e).unwrap()) / (2.0 * e);
            prop_assert!((fd2 - env.d_kappa_star(t, a).unwrap()).abs() <= 1e-6);
        }
    }
}
