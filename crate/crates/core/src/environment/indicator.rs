use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Finite union of disjoint closed subintervals of [0, 1], kept sorted.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IndicatorSet {
    intervals: Vec<(f64, f64)>,
}

impl IndicatorSet {
    pub fn empty() -> Self {
        IndicatorSet { intervals: Vec::new() }
    }

    pub fn full() -> Self {
        IndicatorSet { intervals: vec![(0.0, 1.0)] }
    }

    pub fn interval(a: f64, b: f64) -> Self {
        IndicatorSet::new(vec![(a, b)]).expect("valid interval")
    }

    /// Sorts and merges overlapping or touching intervals; rejects intervals
    /// outside [0, 1] or with a > b.
    pub fn new(mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        for &(a, b) in &intervals {
            if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || a > b {
                return Err(Error::Invalid(format!("interval [{a}, {b}] not inside [0, 1]")));
            }
        }
        intervals.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for (a, b) in intervals {
            match merged.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        Ok(IndicatorSet { intervals: merged })
    }

    /// Snaps a boolean mask over grid cells [i/n, (i+1)/n] to intervals.
    pub fn from_cell_mask(mask: &[bool]) -> Self {
        let n = mask.len() as f64;
        let mut out = Vec::new();
        let mut start: Option<usize> = None;
        for (i, &m) in mask.iter().enumerate() {
            match (m, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    out.push((s as f64 / n, i as f64 / n));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            out.push((s as f64 / n, 1.0));
        }
        IndicatorSet { intervals: out }
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, t: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a <= t && t <= b)
    }

    /// Lebesgue measure.
    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }

    /// Measure of the part inside [0, t].
    pub fn measure_up_to(&self, t: f64) -> f64 {
        self.intervals.iter().map(|&(a, b)| (b.min(t) - a).max(0.0)).sum()
    }

    /// All interval endpoints strictly inside (0, 1).
    pub fn endpoints(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .intervals
            .iter()
            .flat_map(|&(a, b)| [a, b])
            .filter(|p| *p > 0.0 && *p < 1.0)
            .collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// Closure of [0, 1] minus the set.
    pub fn complement(&self) -> Self {
        let mut out = Vec::new();
        let mut cur = 0.0;
        for &(a, b) in &self.intervals {
            if a > cur {
                out.push((cur, a));
            }
            cur = b;
        }
        if cur < 1.0 {
            out.push((cur, 1.0));
        }
        IndicatorSet { intervals: out }
    }

    pub fn intersect(&self, other: &IndicatorSet) -> Self {
        let mut out = Vec::new();
        for &(a, b) in &self.intervals {
            for &(c, d) in &other.intervals {
                let (lo, hi) = (a.max(c), b.min(d));
                if lo < hi {
                    out.push((lo, hi));
                }
            }
        }
        IndicatorSet::new(out).expect("intersection stays inside [0, 1]")
    }

    /// Indices k in `range` with [k/n, (k+1)/n] ∩ set ≠ ∅.
    pub fn discretize(&self, n: usize, range: std::ops::RangeInclusive<usize>) -> Vec<bool> {
        let mut mask = vec![false; n + 2];
        for k in range {
            let (lo, hi) = (k as f64 / n as f64, (k + 1) as f64 / n as f64);
            mask[k] = self.intervals.iter().any(|&(a, b)| a <= hi && lo <= b);
        }
        mask
    }
}
