//! Empirical survival curves with Wilson score intervals.

use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval `(lower, upper)` for `successes` out of `trials`.
pub fn wilson(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Half-width of the Wilson interval.
pub fn wilson_half(successes: u64, trials: u64) -> f64 {
    let (lo, hi) = wilson(successes, trials, Z95);
    0.5 * (hi - lo)
}

/// Survival estimates on a grid of `τ` (or `t`) values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ecdf {
    pub grid: Vec<f64>,
    pub counts: Vec<u64>,
    pub estimates: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub half_widths: Vec<f64>,
    pub trials: u64,
    /// Trials that reached the time cap without an event.
    pub censored: u64,
    pub seed: u64,
}

impl Ecdf {
    pub fn from_counts(
        grid: Vec<f64>,
        counts: Vec<u64>,
        trials: u64,
        censored: u64,
        seed: u64,
    ) -> Self {
        let mut estimates = Vec::with_capacity(counts.len());
        let mut lower = Vec::with_capacity(counts.len());
        let mut upper = Vec::with_capacity(counts.len());
        let mut half_widths = Vec::with_capacity(counts.len());
        for &c in &counts {
            let (lo, hi) = wilson(c, trials, Z95);
            estimates.push(if trials == 0 {
                0.0
            } else {
                c as f64 / trials as f64
            });
            lower.push(lo);
            upper.push(hi);
            half_widths.push(0.5 * (hi - lo));
        }
        Ecdf {
            grid,
            counts,
            estimates,
            lower,
            upper,
            half_widths,
            trials,
            censored,
            seed,
        }
    }

    /// True when `value` lies within `k` half-widths of the estimate at `i`.
    pub fn agrees(&self, i: usize, value: f64, k: f64) -> bool {
        (self.estimates[i] - value).abs() <= k * self.half_widths[i]
    }
}
