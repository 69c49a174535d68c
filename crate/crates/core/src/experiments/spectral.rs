//! Escape rate from the leading eigenvalue of an Ulam matrix with a hole.

use num::{Integer, One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::dynamics::{ulam::aligned_to_grid, ulam_matrix, FullBranchMap};
use crate::error::{Error, Result};
use crate::interval::IntervalUnion;
use crate::scalar::Rational;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeOracle {
    /// `−log ρ`, infinite when the hole is everything.
    pub rate: f64,
    pub spectral_radius: f64,
    pub bins: usize,
    pub iterations: usize,
    pub total_escape: bool,
}

/// Smallest multiple of the common denominator of the hole endpoints that
/// is at least `min_bins`.
pub fn aligned_bins(hole: &IntervalUnion<Rational>, min_bins: usize) -> Result<usize> {
    let mut den = num::BigInt::one();
    for p in hole.parts() {
        for e in [p.lo(), p.hi()] {
            den = den.lcm(e.denom());
        }
    }
    let d = den
        .to_usize()
        .filter(|d| *d <= 1 << 24)
        .ok_or_else(|| Error::HoleNotAligned(format!("common denominator {den} is too large")))?;
    Ok(d * min_bins.div_ceil(d).max(1))
}

/// `−log` of the spectral radius of the Ulam matrix restricted to the bins
/// outside `hole`. Power iteration stops at relative change `1e-12`.
pub fn ulam_escape_oracle(
    map: &FullBranchMap,
    hole: &IntervalUnion<Rational>,
    bins: usize,
) -> Result<EscapeOracle> {
    if bins < 64 {
        return Err(Error::Precondition(format!(
            "need at least 64 bins, got {bins}"
        )));
    }
    let ends: Vec<Rational> = hole
        .parts()
        .iter()
        .flat_map(|p| [p.lo().clone(), p.hi().clone()])
        .collect();
    if !aligned_to_grid(&ends, bins) {
        return Err(Error::HoleNotAligned(format!("{hole} on {bins} bins")));
    }
    if hole.is_empty() {
        return Ok(EscapeOracle {
            rate: 0.0,
            spectral_radius: 1.0,
            bins,
            iterations: 0,
            total_escape: false,
        });
    }
    if hole.is_full() {
        return Ok(EscapeOracle {
            rate: f64::INFINITY,
            spectral_radius: 0.0,
            bins,
            iterations: 0,
            total_escape: true,
        });
    }
    let nb = Rational::from_integer(bins.into());
    let keep: Vec<bool> = (0..bins)
        .map(|i| {
            !hole.contains(
                &((Rational::from_integer(i.into()) + Rational::new(1.into(), 2.into())) / &nb),
            )
        })
        .collect();
    let m = ulam_matrix(map, bins)?;
    let mut v: Vec<f64> = keep.iter().map(|&k| if k { 1.0 } else { 0.0 }).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    let mut w = vec![0.0; bins];
    let mut rho = 0.0;
    let cap = 1_000_000;
    for it in 1..=cap {
        m.left_multiply(&v, Some(&keep), &mut w);
        let r: f64 = w.iter().sum();
        if r == 0.0 {
            return Ok(EscapeOracle {
                rate: f64::INFINITY,
                spectral_radius: 0.0,
                bins,
                iterations: it,
                total_escape: true,
            });
        }
        w.iter_mut().for_each(|x| *x /= r);
        let diff: f64 = v.iter().zip(&w).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut v, &mut w);
        if (r - rho).abs() <= 1e-12 * r && diff <= 1e-10 {
            return Ok(EscapeOracle {
                rate: -r.ln(),
                spectral_radius: r,
                bins,
                iterations: it,
                total_escape: false,
            });
        }
        rho = r;
    }
    Err(Error::NonConvergent(cap))
}

/// `P(r > t)` for `t = 0..=t_max` under Lebesgue measure, propagated through
/// the Ulam chain with the hole bins removed. Exact when the uniform grid is
/// a Markov partition, as for affine maps with integer slopes and branch
/// ends on the grid.
pub fn markov_survival(
    map: &FullBranchMap,
    hole: &IntervalUnion<Rational>,
    bins: usize,
    t_max: usize,
) -> Result<Vec<f64>> {
    let ends: Vec<Rational> = hole
        .parts()
        .iter()
        .flat_map(|p| [p.lo().clone(), p.hi().clone()])
        .collect();
    if !aligned_to_grid(&ends, bins) {
        return Err(Error::HoleNotAligned(format!("{hole} on {bins} bins")));
    }
    let nb = Rational::from_integer(bins.into());
    let keep: Vec<bool> = (0..bins)
        .map(|i| {
            !hole.contains(
                &((Rational::from_integer(i.into()) + Rational::new(1.into(), 2.into())) / &nb),
            )
        })
        .collect();
    let m = ulam_matrix(map, bins)?;
    let mut v = vec![1.0 / bins as f64; bins];
    let mut w = vec![0.0; bins];
    let mut out = Vec::with_capacity(t_max + 1);
    out.push(1.0);
    for _ in 0..t_max {
        m.left_multiply(&v, Some(&keep), &mut w);
        std::mem::swap(&mut v, &mut w);
        out.push(v.iter().sum());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval::Topology;
    use crate::scalar::ratio;

    #[test]
    fn markov_survival_matches_interval_algebra() {
        use crate::extremes::{exact_hts_prob, DEFAULT_COMPONENT_BUDGET};
        use crate::scalar::rational_to_f64;
        let maps = [
            FullBranchMap::doubling(),
            FullBranchMap::from_widths("w3", &[ratio(1, 2), ratio(1, 4), ratio(1, 4)]).unwrap(),
        ];
        let hole = IntervalUnion::ball(&ratio(1, 3), &ratio(1, 20), Topology::Circle).unwrap();
        for map in &maps {
            let s = markov_survival(map, &hole, 120, 8).unwrap();
            for (t, v) in s.iter().enumerate() {
                let exact = rational_to_f64(
                    &exact_hts_prob(map, &hole, t, DEFAULT_COMPONENT_BUDGET).unwrap(),
                );
                assert!(
                    (v - exact).abs() < 1e-12,
                    "{} t {t}: {v} vs {exact}",
                    map.name()
                );
            }
        }
    }

    #[test]
    fn trivial_holes() {
        let d = FullBranchMap::doubling();
        let e = ulam_escape_oracle(&d, &IntervalUnion::empty(Topology::Circle), 64).unwrap();
        assert_eq!(e.rate, 0.0);
        let f = ulam_escape_oracle(&d, &IntervalUnion::full(Topology::Circle), 64).unwrap();
        assert!(f.total_escape && f.rate.is_infinite());
    }

    #[test]
    fn alignment() {
        let hole = IntervalUnion::ball(&ratio(0, 1), &ratio(1, 100), Topology::Circle).unwrap();
        assert_eq!(aligned_bins(&hole, 64).unwrap(), 100);
        assert_eq!(aligned_bins(&hole, 150).unwrap(), 200);
        assert!(matches!(
            ulam_escape_oracle(&FullBranchMap::doubling(), &hole, 64),
            Err(Error::HoleNotAligned(_))
        ));
        assert!(ulam_escape_oracle(&FullBranchMap::doubling(), &hole, 32).is_err());
    }

    #[test]
    fn half_hole_of_doubling() {
        // Survivors of [1/2, 1) under doubling are the points with all binary
        // digits 0, a set of measure 2^{-t}: the rate is log 2.
        let hole = IntervalUnion::single(Topology::Circle, ratio(1, 2), ratio(1, 1)).unwrap();
        let e = ulam_escape_oracle(&FullBranchMap::doubling(), &hole, 64).unwrap();
        assert!((e.rate - 2f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn refinement_does_not_change_a_markov_hole() {
        // Uniform bins are a Markov partition for the doubling map.
        let hole = IntervalUnion::ball(&ratio(0, 1), &ratio(1, 64), Topology::Circle).unwrap();
        let a = ulam_escape_oracle(&FullBranchMap::doubling(), &hole, 64).unwrap();
        let b = ulam_escape_oracle(&FullBranchMap::doubling(), &hole, 1024).unwrap();
        assert!((a.rate - b.rate).abs() < 1e-9);
        assert!(a.rate > 0.0);
    }
}
