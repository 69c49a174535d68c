//! Ulam discretisation of the transfer operator on a uniform partition.

use std::fmt::Write as _;

use num::{Signed, ToPrimitive};

use super::map::{BranchKind, FullBranchMap};
use crate::error::{Error, Result};
use crate::scalar::{rational_to_f64, Rational};

/// Sparse row-stochastic matrix; row `i` lists `(j, P_ij)` with `j` ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct UlamMatrix {
    bins: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl UlamMatrix {
    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .iter()
            .find(|(k, _)| *k == j)
            .map_or(0.0, |(_, p)| *p)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|(_, p)| p).sum())
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.bins]; self.bins];
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, p) in r {
                out[i][j] = p;
            }
        }
        out
    }

    /// `v ↦ v P` restricted to the states where `keep` is true.
    pub fn left_multiply(&self, v: &[f64], keep: Option<&[bool]>, out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (i, r) in self.rows.iter().enumerate() {
            let vi = v[i];
            if vi == 0.0 {
                continue;
            }
            for &(j, p) in r {
                if keep.is_none_or(|k| k[j]) {
                    out[j] += vi * p;
                }
            }
        }
    }

    /// Leading left eigenvector, normalised to sum 1.
    pub fn stationary(&self, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
        let n = self.bins;
        let mut v = vec![1.0 / n as f64; n];
        let mut w = vec![0.0; n];
        for _ in 0..max_iter {
            self.left_multiply(&v, None, &mut w);
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= s);
            let diff: f64 = v.iter().zip(&w).map(|(a, b)| (a - b).abs()).sum();
            std::mem::swap(&mut v, &mut w);
            if diff < tol {
                return Ok(v);
            }
        }
        Err(Error::NonConvergent(max_iter))
    }

    /// Sparse CSV with columns `row,col,p`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("row,col,p\n");
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, p) in r {
                let _ = writeln!(s, "{i},{j},{p:.17e}");
            }
        }
        s
    }
}

/// Entry `(i,j) = m(bin_i ∩ T^{-1} bin_j) / m(bin_i)` on `bins` equal cells.
/// Exact rational arithmetic for affine branches, bisection otherwise.
pub fn ulam_matrix(map: &FullBranchMap, bins: usize) -> Result<UlamMatrix> {
    if bins == 0 {
        return Err(Error::Precondition("need at least one bin".into()));
    }
    let nb = Rational::from_integer(bins.into());
    let mut rows = Vec::with_capacity(bins);
    for i in 0..bins {
        let lo = Rational::from_integer(i.into()) / &nb;
        let hi = Rational::from_integer((i + 1).into()) / &nb;
        let mut row: Vec<(usize, f64)> = Vec::new();
        for b in map.branches() {
            let plo = if b.lo > lo { b.lo.clone() } else { lo.clone() };
            let phi = if b.hi < hi { b.hi.clone() } else { hi.clone() };
            if plo >= phi {
                continue;
            }
            match &b.kind {
                BranchKind::Affine { slope, intercept } => {
                    let (ya, yb) = (slope * &plo + intercept, slope * &phi + intercept);
                    let (y0, y1) = if ya <= yb { (ya, yb) } else { (yb, ya) };
                    let inv = slope.abs();
                    // Bins covered by the image [y0, y1] ⊂ [0, 1].
                    let j0 = (&y0 * &nb).floor().to_integer().to_usize().unwrap_or(0);
                    let mut j = j0.min(bins - 1);
                    loop {
                        let blo = Rational::from_integer(j.into()) / &nb;
                        if blo >= y1 {
                            break;
                        }
                        let bhi = Rational::from_integer((j + 1).into()) / &nb;
                        let ov_lo = if blo > y0 { blo } else { y0.clone() };
                        let ov_hi = if bhi < y1 { bhi } else { y1.clone() };
                        if ov_lo < ov_hi {
                            let p = (ov_hi - ov_lo) / &inv * &nb;
                            push_entry(&mut row, j, rational_to_f64(&p));
                        }
                        j += 1;
                        if j >= bins {
                            break;
                        }
                    }
                }
                BranchKind::Smooth(s) => {
                    let (a, c) = (rational_to_f64(&plo), rational_to_f64(&phi));
                    let increasing = (s.f)(c) >= (s.f)(a);
                    let bin_w = 1.0 / bins as f64;
                    for j in 0..bins {
                        let (y0, y1) = (j as f64 * bin_w, (j + 1) as f64 * bin_w);
                        let x0 = invert(&*s.f, a, c, y0, increasing);
                        let x1 = invert(&*s.f, a, c, y1, increasing);
                        let len = (x1 - x0).abs();
                        if len > 0.0 {
                            push_entry(&mut row, j, len / bin_w);
                        }
                    }
                }
            }
        }
        row.sort_by_key(|e| e.0);
        rows.push(row);
    }
    Ok(UlamMatrix { bins, rows })
}

fn push_entry(row: &mut Vec<(usize, f64)>, j: usize, p: f64) {
    if let Some(e) = row.iter_mut().find(|e| e.0 == j) {
        e.1 += p;
    } else {
        row.push((j, p));
    }
}

/// Point of `[a, c]` where a monotone `f` crosses `y`, clamped to the ends.
fn invert(f: &dyn Fn(f64) -> f64, a: f64, c: f64, y: f64, increasing: bool) -> f64 {
    let (mut lo, mut hi) = (a, c);
    let below = |x: f64| if increasing { f(x) < y } else { f(x) > y };
    if !below(lo) {
        return lo;
    }
    if below(hi) {
        return hi;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if below(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// True when every endpoint of the rational set sits on the bin grid.
pub fn aligned_to_grid(endpoints: &[Rational], bins: usize) -> bool {
    let nb = Rational::from_integer(bins.into());
    endpoints.iter().all(|e| (e * &nb).is_integer())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::map::BranchSpec;
    use crate::scalar::ratio;

    #[test]
    fn doubling_two_bins() {
        let m = ulam_matrix(&FullBranchMap::doubling(), 2).unwrap();
        assert_eq!(m.to_dense(), vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let one = ulam_matrix(&FullBranchMap::doubling(), 1).unwrap();
        assert_eq!(one.to_dense(), vec![vec![1.0]]);
    }

    #[test]
    fn rows_are_stochastic_and_lebesgue_is_stationary() {
        let maps = [
            FullBranchMap::doubling(),
            FullBranchMap::tripling(),
            FullBranchMap::from_widths("w3", &[ratio(1, 2), ratio(1, 4), ratio(1, 4)]).unwrap(),
        ];
        for map in maps {
            for bins in [7, 64, 100] {
                let m = ulam_matrix(&map, bins).unwrap();
                assert!(m.row_sums().iter().all(|s| (s - 1.0).abs() < 1e-12));
                let v = m.stationary(1e-14, 10_000).unwrap();
                assert!(v.iter().all(|x| (x - 1.0 / bins as f64).abs() < 1e-8));
            }
        }
    }

    #[test]
    fn smooth_branches_give_stochastic_rows() {
        let m = FullBranchMap::new(
            "convex",
            vec![
                BranchSpec::smooth(
                    ratio(0, 1),
                    ratio(1, 2),
                    |x| 1.5 * x + x * x,
                    |x| 1.5 + 2.0 * x,
                ),
                BranchSpec::increasing(ratio(1, 2), ratio(1, 1)),
            ],
        )
        .unwrap();
        let u = ulam_matrix(&m, 50).unwrap();
        assert!(u.row_sums().iter().all(|s| (s - 1.0).abs() < 1e-12));
        assert!(!u.row(0).is_empty());
    }

    #[test]
    fn csv_has_one_line_per_entry() {
        let m = ulam_matrix(&FullBranchMap::doubling(), 4).unwrap();
        assert_eq!(m.to_csv().lines().count(), 1 + 8);
        assert!(aligned_to_grid(&[ratio(1, 4), ratio(3, 4)], 4));
        assert!(!aligned_to_grid(&[ratio(1, 3)], 4));
    }
}
