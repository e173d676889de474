//! The function Ψ: exponential rate of the area-weighted Brownian motion
//! confined to [0, 1].

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::RwLock;

use super::zeros::lambda_n;

/// Ψ(h).
///
/// h > 0: (h^{2/3}/2^{1/3}) λ₁^h. h = 0: −π²/2. h < 0: Ψ(−h) − h.
pub fn psi(h: f64) -> f64 {
    assert!(h.is_finite(), "psi needs a finite argument");
    if h == 0.0 {
        -0.5 * PI * PI
    } else if h > 0.0 {
        let l = lambda_n(h, 1).expect("lambda_1 bracket is rigorous for h > 0");
        h.powf(2.0 / 3.0) / 2f64.cbrt() * l
    } else {
        psi(-h) - h
    }
}

/// Quantization step of the cache key.
pub const PSI_QUANTUM: f64 = 1e-10;

/// Ψ with a shared cache keyed by the argument rounded to [`PSI_QUANTUM`].
///
/// Safe for concurrent use; racing inserts of the same key store the same
/// value.
#[derive(Debug, Default)]
pub struct PsiEvaluator {
    pub tolerance: f64,
    cache: RwLock<HashMap<i64, f64>>,
}

impl PsiEvaluator {
    pub fn new() -> Self {
        PsiEvaluator { tolerance: 1e-12, cache: RwLock::new(HashMap::new()) }
    }

    pub fn eval(&self, h: f64) -> f64 {
        let q = (h / PSI_QUANTUM).round();
        if q.abs() > 9.0e17 {
            return psi(h);
        }
        let key = q as i64;
        if let Some(v) = self.cache.read().expect("psi cache poisoned").get(&key) {
            return *v;
        }
        let v = psi(key as f64 * PSI_QUANTUM);
        self.cache.write().expect("psi cache poisoned").insert(key, v);
        v
    }

    pub fn len(&self) -> usize {
        self.cache.read().expect("psi cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cached (h, Ψ(h)) pairs sorted by h.
    pub fn entries(&self) -> Vec<(f64, f64)> {
        let mut v: Vec<(f64, f64)> = self
            .cache
            .read()
            .expect("psi cache poisoned")
            .iter()
            .map(|(k, v)| (*k as f64 * PSI_QUANTUM, *v))
            .collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    }
}

/// Shared process-wide evaluator.
pub fn global_psi() -> &'static PsiEvaluator {
    static CELL: std::sync::OnceLock<PsiEvaluator> = std::sync::OnceLock::new();
    CELL.get_or_init(PsiEvaluator::new)
}
