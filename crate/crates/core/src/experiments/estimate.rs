//! Monte-Carlo estimators driven by symbolic orbits.
//!
//! Trial `i` draws from a ChaCha8 stream keyed by `(seed, i)`, and counts are
//! reduced by integer addition, so results do not depend on the number of
//! worker threads.

use num::{Signed, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ecdf::Ecdf;
use crate::dynamics::{FullBranchMap, OrbitStream, SymbolicSampler};
use crate::error::{Error, Result};
use crate::extremes::{theta_limit, threshold_for, Observable};
use crate::interval::{IntervalUnion, Topology};
use crate::scalar::{format_rational, ratio, rational_to_f64, Rational};

const CHUNK: usize = 4096;

/// Independent generator for trial `index`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Sums per-trial histograms over `0..trials` in parallel.
fn histogram<F>(trials: u64, bins: usize, f: F) -> Vec<u64>
where
    F: Fn(u64) -> usize + Sync,
{
    (0..trials)
        .into_par_iter()
        .fold(
            || vec![0u64; bins],
            |mut acc, i| {
                acc[f(i)] += 1;
                acc
            },
        )
        .reduce(
            || vec![0u64; bins],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        )
}

#[inline]
fn dist(x: f64, c: f64, topology: Topology) -> f64 {
    let d = (x - c).abs();
    match topology {
        Topology::Circle => d.min(1.0 - d),
        Topology::Line => d,
    }
}

/// Minimum of `dist(x_j, c)` over `j < n`, stopping once it drops below `floor`.
fn min_distance(
    sampler: &SymbolicSampler,
    rng: &mut ChaCha8Rng,
    n: u64,
    c: f64,
    topology: Topology,
    floor: f64,
) -> f64 {
    let mut stream = OrbitStream::new(sampler, CHUNK);
    let mut left = n;
    let mut best = f64::INFINITY;
    while left > 0 {
        let len = left.min(CHUNK as u64) as usize;
        for &x in stream.next_chunk(rng, len) {
            let d = dist(x, c, topology);
            if d < best {
                best = d;
            }
        }
        if best < floor {
            break;
        }
        left -= len as u64;
    }
    best
}

/// First `j ∈ [1, cap]` with `hit(x_j)`.
fn first_entry<H: Fn(f64) -> bool>(
    sampler: &SymbolicSampler,
    rng: &mut ChaCha8Rng,
    cap: u64,
    hit: H,
) -> Option<u64> {
    let mut stream = OrbitStream::new(sampler, CHUNK);
    let mut j0 = 0u64;
    let total = cap + 1;
    // Most trials enter early, so chunks start short and double.
    let mut chunk = 64u64;
    while j0 < total {
        let len = (total - j0).min(chunk) as usize;
        chunk = (chunk * 2).min(CHUNK as u64);
        for (off, &x) in stream.next_chunk(rng, len).iter().enumerate() {
            let j = j0 + off as u64;
            if j >= 1 && hit(x) {
                return Some(j);
            }
        }
        j0 += len as u64;
    }
    None
}

/// `P(M_n ≤ u_n)` at each `τ`, with `u_n` chosen so that `n P(U) = τ`.
pub fn estimate_evl(
    map: &FullBranchMap,
    obs: &Observable,
    n: u64,
    taus: &[Rational],
    trials: u64,
    seed: u64,
) -> Result<Ecdf> {
    let sampler = SymbolicSampler::new(map)?;
    let mut radii = Vec::with_capacity(taus.len());
    for tau in taus {
        if tau.is_zero() {
            radii.push(0.0);
        } else {
            radii.push(rational_to_f64(&threshold_for(obs, n, tau)?.radius));
        }
    }
    let grid: Vec<f64> = taus.iter().map(rational_to_f64).collect();
    let positive: Vec<f64> = radii.iter().copied().filter(|r| *r > 0.0).collect();
    let floor = positive.iter().copied().fold(f64::INFINITY, f64::min);
    let c = rational_to_f64(&obs.center);
    let topology = obs.topology;
    // Sorted radii: a trial survives exactly the radii not above its minimum.
    let mut sorted = positive.clone();
    sorted.sort_by(f64::total_cmp);
    let hist = histogram(trials, sorted.len() + 1, |i| {
        if sorted.is_empty() {
            return 0;
        }
        let mut rng = trial_rng(seed, i);
        let m = min_distance(&sampler, &mut rng, n, c, topology, floor);
        sorted.partition_point(|r| *r <= m)
    });
    // survivors[j] = trials whose minimum is at least sorted[j]
    let counts = radii
        .iter()
        .map(|&r| {
            if r == 0.0 {
                trials
            } else {
                let j = sorted.partition_point(|s| *s < r);
                hist[j + 1..].iter().sum()
            }
        })
        .collect();
    Ok(Ecdf::from_counts(grid, counts, trials, 0, seed))
}

fn check_radius(eps: &Rational) -> Result<()> {
    if !eps.is_positive() || *eps >= ratio(1, 4) {
        return Err(Error::Precondition(format!(
            "ball radius must lie in (0, 1/4), got {}",
            format_rational(eps)
        )));
    }
    Ok(())
}

/// `P(r_B > ⌊τ / P(B)⌋)` for `B = B(ζ, ε)` at each `τ`.
pub fn estimate_hts(
    map: &FullBranchMap,
    zeta: &Rational,
    eps: &Rational,
    topology: Topology,
    taus: &[f64],
    trials: u64,
    seed: u64,
) -> Result<Ecdf> {
    check_radius(eps)?;
    if taus.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(Error::Precondition(
            "τ values must be finite and non-negative".into(),
        ));
    }
    let sampler = SymbolicSampler::new(map)?;
    let ball = IntervalUnion::ball(zeta, eps, topology)?;
    let pb = rational_to_f64(&ball.measure());
    let steps: Vec<u64> = taus.iter().map(|t| (t / pb).floor() as u64).collect();
    let cap = steps.iter().copied().max().unwrap_or(0);
    let hole = ball.to_f64();
    // bin `cap + 1` collects censored trials
    let hist = histogram(trials, cap as usize + 2, |i| {
        if cap == 0 {
            return 1;
        }
        let mut rng = trial_rng(seed, i);
        match first_entry(&sampler, &mut rng, cap, |x| hole.contains(&x)) {
            Some(j) => j as usize,
            None => cap as usize + 1,
        }
    });
    let censored = hist[cap as usize + 1];
    let counts = steps
        .iter()
        .map(|&t| hist[t as usize + 1..].iter().sum())
        .collect();
    Ok(Ecdf::from_counts(
        taus.to_vec(),
        counts,
        trials,
        censored,
        seed,
    ))
}

/// Least-squares escape rate from the survival curve of a hole.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeFit {
    pub t: Vec<u64>,
    pub log_survival: Vec<f64>,
    /// Per-step escape rate.
    pub slope: f64,
    pub window: (u64, u64),
    pub residual: f64,
    pub hole_measure: f64,
    pub trials: u64,
    pub censored: u64,
    pub seed: u64,
}

/// Escape rate through `hole`, fitting `−log P(r > t)` on
/// `[5/(θ̂ P(hole)), last t with at least 100 survivors]`.
pub fn estimate_escape_rate_hole(
    map: &FullBranchMap,
    hole: &IntervalUnion<Rational>,
    theta_hat: f64,
    trials: u64,
    seed: u64,
) -> Result<EscapeFit> {
    let pb = rational_to_f64(&hole.measure());
    if hole.is_empty() {
        return Ok(EscapeFit {
            t: Vec::new(),
            log_survival: Vec::new(),
            slope: 0.0,
            window: (0, 0),
            residual: 0.0,
            hole_measure: 0.0,
            trials,
            censored: trials,
            seed,
        });
    }
    if !(theta_hat > 0.0 && theta_hat <= 1.0) {
        return Err(Error::Precondition(format!(
            "θ̂ must lie in (0,1], got {theta_hat}"
        )));
    }
    let sampler = SymbolicSampler::new(map)?;
    let cap = (50.0 / pb).ceil() as u64;
    let h = hole.to_f64();
    let hist = histogram(trials, cap as usize + 2, |i| {
        let mut rng = trial_rng(seed, i);
        match first_entry(&sampler, &mut rng, cap, |x| h.contains(&x)) {
            Some(j) => j as usize,
            None => cap as usize + 1,
        }
    });
    let censored = hist[cap as usize + 1];
    // survivors[t] = #{r > t}
    let mut survivors = vec![0u64; cap as usize + 1];
    let mut acc = censored;
    for t in (0..=cap as usize).rev() {
        survivors[t] = acc;
        acc += hist[t];
    }
    let t0 = (5.0 / (theta_hat * pb)).ceil() as u64;
    let t1 = (0..=cap)
        .rev()
        .find(|&t| survivors[t as usize] >= 100)
        .unwrap_or(0);
    if t1 < t0 + 10 {
        return Err(Error::TooFewSurvivors(format!(
            "window [{t0}, {t1}] is too short with {trials} trials; increase trials"
        )));
    }
    let t: Vec<u64> = (t0..=t1).collect();
    let y: Vec<f64> = t
        .iter()
        .map(|&s| -(survivors[s as usize] as f64 / trials as f64).ln())
        .collect();
    let (slope, intercept) = ols(&t, &y);
    let residual = t
        .iter()
        .zip(&y)
        .map(|(&s, &v)| (v - slope * s as f64 - intercept).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(EscapeFit {
        log_survival: y.iter().map(|v| -v).collect(),
        t,
        slope: slope.max(0.0),
        window: (t0, t1),
        residual,
        hole_measure: pb,
        trials,
        censored,
        seed,
    })
}

/// Escape rate through `B(ζ, ε)`, with `θ̂` from the periodic structure of `ζ`.
pub fn estimate_escape_rate(
    map: &FullBranchMap,
    zeta: &Rational,
    eps: &Rational,
    topology: Topology,
    trials: u64,
    seed: u64,
) -> Result<EscapeFit> {
    check_radius(eps)?;
    let hole = IntervalUnion::ball(zeta, eps, topology)?;
    let theta = theta_limit(map, zeta, crate::dynamics::DEFAULT_PERIOD_CAP)?;
    estimate_escape_rate_hole(map, &hole, rational_to_f64(&theta.theta), trials, seed)
}

fn ols(x: &[u64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().map(|&v| v as f64).sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let dx = a as f64 - mx;
        sxy += dx * (b - my);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
