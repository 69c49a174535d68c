//! Convergence sweeps comparing estimates with limit laws and error brackets.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::estimate::{estimate_evl, estimate_hts};
use crate::bounds::{
    big_l, optimize_kt_evl, optimize_kt_hts, sharp_evl_bracket, sharp_hts_bracket, DecayModel,
    SharpEvlInput, SharpHtsInput,
};
use crate::dynamics::{bv_norm_indicator, FullBranchMap, DEFAULT_PERIOD_CAP};
use crate::error::{Error, Result};
use crate::extremes::{
    annulus_set, first_return_r, theta_limit, threshold_for, Observable, ReturnTime,
};
use crate::interval::IntervalUnion;
use crate::scalar::{rational_to_f64, Rational};

pub const CSV_HEADER: &str =
    "scale,estimate,ci_half,limit,deviation,bracket,ratio,seed,k,t,r,theta_n";

/// One grid point of a sweep; `scale` is `n` for EVL and `ε` for HTS.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub scale: f64,
    pub estimate: f64,
    pub ci_half: f64,
    pub limit: f64,
    pub deviation: f64,
    /// `None` when the blocking parameters are infeasible.
    pub bracket: Option<f64>,
    pub ratio: Option<f64>,
    pub seed: u64,
    pub k: u64,
    pub t: u64,
    pub r: u64,
    pub theta_n: f64,
}

pub fn to_csv(rows: &[SweepRow]) -> String {
    let opt = |v: Option<f64>| v.map_or(String::from("NA"), |x| format!("{x:e}"));
    let mut s = format!("{CSV_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{:e},{},{:e},{},{},{},{},{},{},{}",
            r.scale,
            r.estimate,
            r.ci_half,
            r.limit,
            r.deviation,
            opt(r.bracket),
            opt(r.ratio),
            r.seed,
            r.k,
            r.t,
            r.r,
            r.theta_n
        );
    }
    s
}

/// Shared parameters of a sweep.
#[derive(Clone, Debug)]
pub struct SweepSpec<'a> {
    pub map: &'a FullBranchMap,
    pub obs: &'a Observable,
    pub tau: Rational,
    /// Annulus depth; defaults to the period of the centre.
    pub q: Option<usize>,
    pub trials: u64,
    pub seed: u64,
    pub gamma: DecayModel,
}

impl SweepSpec<'_> {
    fn theta_and_q(&self) -> Result<(f64, usize)> {
        let lim = theta_limit(self.map, &self.obs.center, DEFAULT_PERIOD_CAP)?;
        Ok((rational_to_f64(&lim.theta), self.q.unwrap_or(lim.q)))
    }
}

fn return_time(map: &FullBranchMap, a: &IntervalUnion<Rational>, horizon: u64) -> Result<u64> {
    if a.is_empty() || horizon == 0 {
        return Ok(horizon.max(1));
    }
    Ok(match first_return_r(map, a, horizon as usize)? {
        ReturnTime::Finite(r) => r as u64,
        ReturnTime::ExceedsHorizon => horizon,
    })
}

/// EVL rows over the `n` grid with the sharp bracket at optimizer `(k, t)`.
pub fn evl_sweep(spec: &SweepSpec, ns: &[u64]) -> Result<Vec<SweepRow>> {
    let (theta, q) = spec.theta_and_q()?;
    let tau = rational_to_f64(&spec.tau);
    let limit = (-theta * tau).exp();
    let mut rows = Vec::with_capacity(ns.len());
    for (i, &n) in ns.iter().enumerate() {
        let sched = threshold_for(spec.obs, n, &spec.tau)?;
        let u = spec.obs.ball_exact(&sched.radius)?;
        let a = annulus_set(spec.map, &u, q)?;
        let pa = rational_to_f64(&a.measure());
        let theta_n = pa / rational_to_f64(&sched.p);
        let seed = spec.seed.wrapping_add(i as u64);
        let est = estimate_evl(
            spec.map,
            spec.obs,
            n,
            std::slice::from_ref(&spec.tau),
            spec.trials,
            seed,
        )?;
        let (estimate, ci_half) = (est.estimates[0], est.half_widths[0]);
        let deviation = (estimate - limit).abs();
        let (mut k, mut t, mut r, mut bracket) = (0, 0, 0, None);
        if n >= 4 && pa > 0.0 {
            let bp = optimize_kt_evl(n, pa, &spec.gamma)?;
            let ell = bp.ell_evl(n).max(0) as u64;
            (k, t) = (bp.k, bp.t);
            r = return_time(spec.map, &a, ell)?;
            let inp = SharpEvlInput {
                tau,
                n,
                theta,
                pa,
                k,
                t,
                r,
            };
            bracket = sharp_evl_bracket(&inp, &spec.gamma).ok().map(|b| b.total);
        }
        rows.push(SweepRow {
            scale: n as f64,
            estimate,
            ci_half,
            limit,
            deviation,
            bracket,
            ratio: bracket.map(|b| deviation / b),
            seed,
            k,
            t,
            r,
            theta_n,
        });
    }
    Ok(rows)
}

/// HTS rows over the `ε` grid at a fixed `τ` with the sharp hitting-time bracket.
pub fn hts_sweep(spec: &SweepSpec, eps: &[Rational]) -> Result<Vec<SweepRow>> {
    let (theta, q) = spec.theta_and_q()?;
    let tau = rational_to_f64(&spec.tau);
    let limit = (-theta * tau).exp();
    let mut rows = Vec::with_capacity(eps.len());
    for (i, e) in eps.iter().enumerate() {
        let b = spec.obs.ball_exact(e)?;
        let pb = rational_to_f64(&b.measure());
        let a = annulus_set(spec.map, &b, q)?;
        let pa = rational_to_f64(&a.measure());
        let seed = spec.seed.wrapping_add(i as u64);
        let est = estimate_hts(
            spec.map,
            &spec.obs.center,
            e,
            spec.obs.topology,
            &[tau],
            spec.trials,
            seed,
        )?;
        let (estimate, ci_half) = (est.estimates[0], est.half_widths[0]);
        let deviation = (estimate - limit).abs();
        let (mut k, mut t, mut r, mut bracket) = (0, 0, 0, None);
        if let Ok(bp) = optimize_kt_hts(pb, &spec.gamma) {
            (k, t) = (bp.k, bp.t);
            let ell = bp.ell_hts(pb);
            if ell >= 1 && big_l(ell, pa) > 0.0 && pa > 0.0 {
                r = return_time(spec.map, &a, ell as u64)?;
                let inp = SharpHtsInput {
                    tau,
                    pb,
                    pa,
                    theta,
                    k,
                    t,
                    r,
                    ell: ell as u64,
                    m: bv_norm_indicator(&a),
                };
                bracket = sharp_hts_bracket(&inp, &spec.gamma).ok().map(|b| b.total);
            }
        }
        rows.push(SweepRow {
            scale: rational_to_f64(e),
            estimate,
            ci_half,
            limit,
            deviation,
            bracket,
            ratio: bracket.map(|b| deviation / b),
            seed,
            k,
            t,
            r,
            theta_n: pa / pb,
        });
    }
    Ok(rows)
}

/// `max / min` of the deviation-to-bracket ratio over rows that have one.
pub fn ratio_spread(rows: &[SweepRow]) -> Result<(f64, f64)> {
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    if ratios.is_empty() {
        return Err(Error::Precondition("no row has a finite bracket".into()));
    }
    let max = ratios.iter().copied().fold(0.0, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((max, min))
}
