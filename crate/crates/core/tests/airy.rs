use std::f64::consts::PI;

use brwtie::airy::*;
use proptest::prelude::*;

// Reference values from an arbitrary-precision evaluation (mpmath, 40 digits).
const REF: &[(f64, f64, f64, f64, f64)] = &[
    (-20.0, -0.1764061270779847, 0.8928628567364713, -0.20013930932265134, -0.7914290338395364),
    (-12.0, -0.06655517505437313, 1.0231104533679707, -0.2957199120780731, -0.23673219783112331),
    (-9.0, -0.022133721547341403, -0.9756639809263316, 0.3249473234552449, -0.05740051384366925),
    (-7.0, 0.18428083525050565, -0.7710081684101265, 0.293762071854414, 0.4982445900581135),
    (-5.0, 0.35076100902411433, 0.32719281855444315, -0.13836913490160058, 0.7784117730018992),
    (-2.5, -0.11232506769296609, 0.6788527342647943, -0.4324224718407053, -0.2204201548746296),
    (0.0, 0.3550280538878172, -0.2588194037928068, 0.6149266274460007, 0.4482883573538264),
    (1.0, 0.13529241631288141, -0.1591474412967932, 1.2074235949528713, 0.9324359333927756),
    (3.0, 0.006591139357460719, -0.011912976705951319, 14.037328963730232, 22.92221496638217),
    (7.0, 7.492128863997167e-07, -2.008150894738792e-06, 80327.79070943025, 209552.6708739713),
    (9.0, 2.47116843087249e-09, -7.480641389658946e-09, 21472868.891435347, 63807489.78090821),
    (12.0, 1.3931846888753607e-13, -4.854736554985309e-13, 329807225829.07416, 1135507502443.3708),
    (20.0, 1.6916728686705404e-27, -7.586391625748354e-27, 2.103765049651104e+25, 9.381839336133965e+25),
];

fn close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    (a - b).abs() <= rel * b.abs() + abs
}

/// Plain f64 Maclaurin series, accurate for small |x|.
fn series_oracle(x: f64) -> (f64, f64) {
    let c1 = 0.355_028_053_887_817_2;
    let c2 = 0.258_819_403_792_806_8;
    let (mut f, mut g) = (1.0, x);
    let (mut t, mut s) = (1.0, x);
    for k in 1..60 {
        let k = k as f64;
        t *= x * x * x / ((3.0 * k - 1.0) * 3.0 * k);
        s *= x * x * x / (3.0 * k * (3.0 * k + 1.0));
        f += t;
        g += s;
    }
    (c1 * f - c2 * g, 3f64.sqrt() * (c1 * f + c2 * g))
}

#[test]
fn values_at_zero() {
    assert!((ai(0.0) - 0.355028053887817).abs() < 1e-15);
    assert!((bi(0.0).unwrap() - 0.614926627446001).abs() < 1e-15);
}

#[test]
fn matches_reference_table() {
    for &(x, a, ap, b, bp) in REF {
        let v = airy(x).unwrap();
        assert!(close(v.ai, a, 1e-11, 1e-12), "Ai({x}) = {} vs {a}", v.ai);
        assert!(close(v.aip, ap, 1e-11, 1e-12), "Ai'({x}) = {} vs {ap}", v.aip);
        assert!(close(v.bi, b, 1e-11, 1e-12), "Bi({x}) = {} vs {b}", v.bi);
        assert!(close(v.bip, bp, 1e-11, 1e-12), "Bi'({x}) = {} vs {bp}", v.bip);
    }
}

#[test]
fn matches_plain_series_near_origin() {
    for i in -40..=40 {
        let x = i as f64 * 0.05;
        let (a, b) = series_oracle(x);
        assert!((ai(x) - a).abs() < 1e-14, "{x}");
        assert!((bi(x).unwrap() - b).abs() < 1e-14, "{x}");
    }
}

#[test]
fn absolute_accuracy_window() {
    // Wronskian Ai Bi' − Ai' Bi = 1/π holds to rounding throughout |x| <= 12.
    for i in -240..=240 {
        let x = i as f64 * 0.05;
        let v = airy_scaled(x);
        let w = v.ai * v.bip - v.aip * v.bi;
        assert!((w - 1.0 / PI).abs() < 1e-12, "x = {x}: {w}");
    }
}

#[test]
fn bi_overflow_is_signalled() {
    assert!(bi(100.0).is_ok());
    assert!(matches!(bi(110.0), Err(brwtie::Error::Overflow(_))));
    assert!(ai(200.0) >= 0.0 && ai(200.0) < 1e-300);
}

#[test]
fn ai_decays_bi_grows() {
    let xs: Vec<f64> = (0..40).map(|i| i as f64 * 0.5).collect();
    for w in xs.windows(2) {
        assert!(ai(w[1]) < ai(w[0]));
        assert!(bi(w[1]).unwrap() > bi(w[0]).unwrap());
    }
}

#[test]
fn zeros_match_reference_and_bracket() {
    let reference = [
        (1, -2.338107410459767),
        (2, -4.08794944413097),
        (3, -5.520559828095551),
        (10, -12.828776752865757),
        (50, -38.02100867725525),
    ];
    for (n, z) in reference {
        assert!((airy_zero(n) - z).abs() < 1e-10, "alpha_{n}");
    }
    for n in 1..=50 {
        let a = airy_zero(n);
        assert!(ai(a).abs() <= 1e-8);
        assert!(ai(a - 1e-8) * ai(a + 1e-8) < 0.0, "no sign change at alpha_{n}");
    }
}

#[test]
fn second_zero_by_plain_bisection() {
    let a1 = airy_zero(1);
    let (mut lo, mut hi) = (a1 - 3.0, a1 - 0.1);
    assert!(ai(lo) * ai(hi) < 0.0);
    for _ in 0..100 {
        let m = 0.5 * (lo + hi);
        if ai(m) * ai(lo) > 0.0 {
            lo = m
        } else {
            hi = m
        }
    }
    assert!((airy_zero(2) - 0.5 * (lo + hi)).abs() < 1e-10);
}

#[test]
fn zero_asymptotics_classical_form() {
    let n: f64 = 50.0;
    let ratio = airy_zero(50).abs() / n.powf(2.0 / 3.0);
    let expected = (1.5 * PI).powf(2.0 / 3.0);
    assert!((ratio / expected - 1.0).abs() < 0.05, "{ratio} vs {expected}");
}

#[test]
fn zero_table_invariants() {
    let t = AiryZeroTable::new(30);
    assert_eq!(t.count, 30);
    assert!(t.zeros.iter().all(|z| *z < 0.0));
    assert!(t.zeros.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn cross_wronskian_reference_roots() {
    // Roots of Ai(l)Bi(l+c) − Bi(l)Ai(l+c) found with mpmath.findroot.
    let reference = [
        (0.5, -10.368507161836337),
        (1.0, -6.844656992674559),
        (2.0, -4.703490706820442),
        (5.0, -3.179966989705631),
        (10.0, -2.6376247413276666),
    ];
    for (h, l) in reference {
        let r = cross_wronskian_root(h, 1, MAX_BRACKET_EXTENSIONS).unwrap();
        assert!((r.lambda1 - l).abs() < 1e-10, "h = {h}: {} vs {l}", r.lambda1);
        assert!(r.lambda1 < 0.0);
        assert!(r.residual() <= 1e-9);
        let (a, b) = r.bracket;
        assert!(b - a < 1e-12);
        assert!(normalized_wronskian(h, a - 1e-8) * normalized_wronskian(h, b + 1e-8) < 0.0);
    }
}

#[test]
fn lambda_n_ordering_and_residuals() {
    for &h in &[0.1, 1.0, 7.0] {
        let ls: Vec<f64> = (1..=10).map(|n| lambda_n(h, n).unwrap()).collect();
        assert!(ls.windows(2).all(|w| w[0] > w[1]), "h = {h}: {ls:?}");
        for (i, l) in ls.iter().enumerate() {
            let r = normalized_wronskian(h, *l);
            assert!(r.abs() <= 1e-9, "h = {h}, n = {}: {r}", i + 1);
        }
    }
}

#[test]
fn eigenvalue_growth_is_quadratic() {
    // μ_n = (h^{2/3}/2^{1/3}) λ_n^h satisfies μ_n / n² → −π²/2 for any h.
    for &h in &[0.5f64, 1.0, 3.0] {
        let n = 40;
        let mu = h.powf(2.0 / 3.0) / 2f64.cbrt() * lambda_n(h, n).unwrap();
        let r = mu / (n * n) as f64;
        assert!((r / (-PI * PI / 2.0) - 1.0).abs() < 0.02, "h = {h}: {r}");
    }
    // At h = √2 the scale factor is 1, so λ_n itself behaves this way.
    let h = 2f64.sqrt();
    let r = lambda_n(h, 40).unwrap() / 1600.0;
    assert!((r / (-PI * PI / 2.0) - 1.0).abs() < 0.02);
}

#[test]
fn bracket_failure_is_reported() {
    // Zero allowed extensions with a valid h still succeeds: the bracket is rigorous.
    assert!(cross_wronskian_root(1.0, 3, 0).is_ok());
    assert!(cross_wronskian_root(-1.0, 1, 3).is_err());
}

#[test]
fn psi_special_values() {
    assert!((psi(0.0) + PI * PI / 2.0).abs() < 1e-15);
    let reference = [(0.5, -5.184253580918169), (1.0, -5.432607855266544), (10.0, -9.717092628644327)];
    for (h, v) in reference {
        assert!((psi(h) - v).abs() < 1e-10, "psi({h})");
    }
}

#[test]
fn psi_first_order_behaviour_near_zero() {
    // Ψ(h) = −π²/2 − h/2 + O(h²).
    for &h in &[1e-3, 1e-4, 1e-5] {
        let d = psi(h) - (-PI * PI / 2.0 - 0.5 * h);
        assert!(d.abs() < 10.0 * h * h, "h = {h}: {d}");
    }
}

#[test]
fn psi_large_h_ratio() {
    let c = brwtie::takacs_constant();
    let hs = [10.0, 100.0, 1e3, 1e4];
    let r: Vec<f64> = hs.iter().map(|h| psi(*h) / (c * h.powf(2.0 / 3.0))).collect();
    assert!((r[3] - 1.0).abs() < 0.1);
    // Past h = 1e3 the ratio equals 1 to double precision, so the approach is
    // checked up to rounding.
    assert!(r.windows(2).all(|w| (w[1] - 1.0).abs() <= (w[0] - 1.0).abs() + 1e-15), "{r:?}");
    assert!((r[1] - 1.0).abs() < (r[0] - 1.0).abs());
}

#[test]
fn halfline_eigenfunctions_orthonormal() {
    let gl = brwtie::quad::GaussLegendre::new(20);
    let p1 = HalflineEigenfunction::new(1);
    let p2 = HalflineEigenfunction::new(2);
    // Ai decays like e^{-(2/3)x^{3/2}}; the tail beyond x = 30 is below 1e-50.
    let n11 = gl.composite(0.0, 30.0, 300, |x| p1.eval(x).powi(2));
    let n22 = gl.composite(0.0, 30.0, 300, |x| p2.eval(x).powi(2));
    let n12 = gl.composite(0.0, 30.0, 300, |x| p1.eval(x) * p2.eval(x));
    assert!((n11 - 1.0).abs() < 1e-6, "{n11}");
    assert!((n22 - 1.0).abs() < 1e-6, "{n22}");
    assert!(n12.abs() < 1e-6, "{n12}");
    assert_eq!(eigenfunction_halfline(1, 0.0), 0.0);
    assert!((1..200).all(|i| p1.eval(i as f64 * 0.05) > 0.0));
}

#[test]
fn interval_eigenfunctions() {
    let e1 = IntervalEigenfunction::new(1.0, 1).unwrap();
    let e2 = IntervalEigenfunction::new(1.0, 2).unwrap();
    assert!(e1.eval(0.0).abs() < 1e-14);
    assert!(e1.eval(1.0).abs() < 1e-9);
    assert!((1..1000).all(|i| e1.eval(i as f64 / 1000.0) > 0.0));
    let gl = brwtie::quad::GaussLegendre::new(20);
    let ip = gl.composite(0.0, 1.0, 50, |x| e1.eval(x) * e2.eval(x));
    let n1 = gl.composite(0.0, 1.0, 50, |x| e1.eval(x).powi(2));
    assert!(ip.abs() < 1e-6);
    assert!((n1 - 1.0).abs() < 1e-10);
    assert!(eigenfunction_interval(1.0, 1, 0.0).unwrap().abs() < 1e-14);
}

#[test]
fn interval_eigen_residual() {
    for &(h, n) in &[(1.0, 1), (1.0, 2), (5.0, 1), (0.2, 3)] {
        let e = IntervalEigenfunction::new(h, n).unwrap();
        let mu = e.eigenvalue();
        let d = 2e-3;
        let mut worst = 0.0f64;
        for i in 1..200 {
            let x = 0.01 + 0.98 * i as f64 / 200.0;
            let f = |k: f64| e.eval(x + k * d);
            // sixth-order central second difference
            let second = (2.0 * f(-3.0) - 27.0 * f(-2.0) + 270.0 * f(-1.0) - 490.0 * f(0.0) + 270.0 * f(1.0)
                - 27.0 * f(2.0)
                + 2.0 * f(3.0))
                / (180.0 * d * d);
            let r = 0.5 * second - h * x * f(0.0) - mu * f(0.0);
            worst = worst.max(r.abs());
        }
        assert!(worst <= 1e-6, "h = {h}, n = {n}: {worst}");
    }
}

#[test]
fn psi_evaluator_concurrent() {
    use rayon::prelude::*;
    let p = PsiEvaluator::new();
    let v: Vec<f64> = (0..64).into_par_iter().map(|i| p.eval((i % 8) as f64 * 0.5)).collect();
    for (i, x) in v.iter().enumerate() {
        assert_eq!(*x, psi((i % 8) as f64 * 0.5));
    }
    assert_eq!(p.len(), 8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn psi_reflection(h in 1e-3f64..200.0) {
        prop_assert!((psi(h) - psi(-h) + h).abs() <= 1e-9);
    }

    #[test]
    fn psi_midpoint_convex(a in -50.0f64..50.0, b in -50.0f64..50.0) {
        let m = psi(0.5 * (a + b));
        prop_assert!(m <= 0.5 * (psi(a) + psi(b)) + 1e-9);
    }

    #[test]
    fn phase_is_increasing(x in -200.0f64..4.0, dx in 1e-3f64..2.0) {
        prop_assert!(airy_phase(x + dx) > airy_phase(x));
        // beyond that Θ saturates at π/2 in double precision
        prop_assert!(airy_phase(x + 50.0) <= std::f64::consts::FRAC_PI_2);
    }

    #[test]
    fn wronskian_identity(x in -60.0f64..60.0) {
        let v = airy_scaled(x);
        prop_assert!((v.ai * v.bip - v.aip * v.bi - 1.0 / PI).abs() < 1e-11);
    }
}
