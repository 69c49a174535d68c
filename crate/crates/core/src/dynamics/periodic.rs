//! Periodic points, partition functions and finite-n pressure.

use num::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use super::map::FullBranchMap;
use crate::error::{Error, Result};
use crate::scalar::{rational_to_f64, Rational};

pub const DEFAULT_PERIOD_CAP: usize = 20;

/// Largest number of symbolic solutions enumerated explicitly.
pub const POINT_BUDGET: usize = 1 << 22;

/// One solution of `F^n x = x`, one per `n`-cylinder.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicPoint {
    /// Canonical representative in `[0,1)`.
    pub point: Rational,
    /// `|DF^n(x)|`.
    pub multiplier: Rational,
    pub word: Vec<usize>,
    /// The raw solution was `1`, the same circle point as `0`.
    pub boundary_degenerate: bool,
}

/// All `d^n` symbolic solutions of `F^n x = x`.
pub fn periodic_points(map: &FullBranchMap, n: usize, cap: usize) -> Result<Vec<PeriodicPoint>> {
    if !map.is_affine() {
        return Err(Error::NotAffine("periodic points"));
    }
    if n == 0 || n > cap {
        return Err(Error::CapExceeded { cap, requested: n });
    }
    let d = map.branch_count();
    let count = d.checked_pow(n as u32).unwrap_or(usize::MAX);
    if count > POINT_BUDGET {
        return Err(Error::BudgetExceeded {
            components: count,
            budget: POINT_BUDGET,
        });
    }
    let mut out = Vec::with_capacity(count);
    let mut word = Vec::with_capacity(n);
    enumerate(
        map,
        n,
        &mut word,
        Rational::one(),
        Rational::zero(),
        &mut out,
    );
    Ok(out)
}

fn enumerate(
    map: &FullBranchMap,
    n: usize,
    word: &mut Vec<usize>,
    a: Rational,
    c: Rational,
    out: &mut Vec<PeriodicPoint>,
) {
    if word.len() == n {
        // F^n x = a x + c on the cylinder; |a| > 1 so the solution is unique.
        let x = &c / (Rational::one() - &a);
        let degenerate = x.is_one();
        out.push(PeriodicPoint {
            point: if degenerate { Rational::zero() } else { x },
            multiplier: a.abs(),
            word: word.clone(),
            boundary_degenerate: degenerate,
        });
        return;
    }
    for i in 0..map.branch_count() {
        let (s, t) = map.branches()[i].affine_coeffs().expect("affine");
        word.push(i);
        enumerate(map, n, word, s * &a, s * &c + t, out);
        word.pop();
    }
}

/// Distinct circle points among the symbolic solutions.
pub fn canonical_periodic_points(points: &[PeriodicPoint]) -> Vec<PeriodicPoint> {
    points
        .iter()
        .filter(|p| !p.boundary_degenerate)
        .cloned()
        .collect()
}

/// Potentials that are constant on 1-cylinders.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Potential {
    /// `-log |DF|`.
    Geometric,
    Constant {
        value: f64,
    },
    /// One value per branch.
    Tabulated {
        values: Vec<f64>,
    },
}

impl Potential {
    fn branch_value(&self, map: &FullBranchMap, i: usize) -> f64 {
        match self {
            Potential::Geometric => {
                let (s, _) = map.branches()[i].affine_coeffs().expect("affine");
                -rational_to_f64(&s.abs()).ln()
            }
            Potential::Constant { value } => *value,
            Potential::Tabulated { values } => values[i],
        }
    }

    /// `V_n(Φ)`: supremum of oscillation over `n`-cylinders. These
    /// potentials are locally constant, so every variation vanishes.
    pub fn variation(&self, _n: usize) -> f64 {
        0.0
    }

    fn check(&self, map: &FullBranchMap) -> Result<()> {
        if let Potential::Tabulated { values } = self {
            if values.len() != map.branch_count() {
                return Err(Error::Precondition(format!(
                    "tabulated potential has {} values for {} branches",
                    values.len(),
                    map.branch_count()
                )));
            }
        }
        Ok(())
    }
}

/// `Z_n(Φ) = Σ_{F^n x = x} e^{S_n Φ(x)}` over the symbolic solutions.
pub fn z_n(map: &FullBranchMap, potential: &Potential, n: usize, cap: usize) -> Result<f64> {
    potential.check(map)?;
    let d = map.branch_count();
    let count = d.checked_pow(n as u32).unwrap_or(usize::MAX);
    if n == 0 || n > cap {
        return Err(Error::CapExceeded { cap, requested: n });
    }
    if !map.is_affine() {
        return Err(Error::NotAffine("partition function"));
    }
    if count > POINT_BUDGET {
        // Full shift with a 1-cylinder potential: Z_n = (Σ_i e^{φ_i})^n.
        let base: f64 = (0..d).map(|i| potential.branch_value(map, i).exp()).sum();
        return Ok(base.powi(n as i32));
    }
    // e^{S_n Φ} is the product of per-branch weights along the word.
    let weights: Vec<f64> = (0..d)
        .map(|i| match potential {
            Potential::Geometric => {
                let (s, _) = map.branches()[i].affine_coeffs().expect("affine");
                rational_to_f64(&(Rational::one() / s.abs()))
            }
            _ => potential.branch_value(map, i).exp(),
        })
        .collect();
    // Kahan summation keeps 1e-12 accuracy over millions of terms.
    let mut acc = (0.0, 0.0);
    sum_words(&weights, n, 1.0, &mut acc);
    Ok(acc.0)
}

fn sum_words(weights: &[f64], left: usize, prod: f64, acc: &mut (f64, f64)) {
    if left == 0 {
        let y = prod - acc.1;
        let t = acc.0 + y;
        acc.1 = (t - acc.0) - y;
        acc.0 = t;
        return;
    }
    for &w in weights {
        sum_words(weights, left - 1, prod * w, acc);
    }
}

/// Exact `Z_n(-log|DF|) = Σ 1/|DF^n(x)|`.
pub fn z_n_geometric_exact(map: &FullBranchMap, n: usize, cap: usize) -> Result<Rational> {
    let points = periodic_points(map, n, cap)?;
    Ok(points.iter().fold(Rational::zero(), |acc, p| {
        acc + Rational::one() / &p.multiplier
    }))
}

/// `(1/n) log Z_n(Φ)` for `n = 1..=n_max`.
pub fn pressure(
    map: &FullBranchMap,
    potential: &Potential,
    n_max: usize,
    cap: usize,
) -> Result<Vec<f64>> {
    if n_max > cap {
        return Err(Error::CapExceeded {
            cap,
            requested: n_max,
        });
    }
    (1..=n_max)
        .map(|n| Ok(z_n(map, potential, n, cap)?.ln() / n as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;

    fn w3() -> FullBranchMap {
        FullBranchMap::from_widths("w3", &[ratio(1, 2), ratio(1, 4), ratio(1, 4)]).unwrap()
    }

    #[test]
    fn doubling_fixed_points() {
        let pts = periodic_points(&FullBranchMap::doubling(), 1, DEFAULT_PERIOD_CAP).unwrap();
        assert_eq!(pts.len(), 2);
        assert!(pts
            .iter()
            .all(|p| p.point == ratio(0, 1) && p.multiplier == ratio(2, 1)));
        assert_eq!(pts.iter().filter(|p| p.boundary_degenerate).count(), 1);
        let canon = canonical_periodic_points(&pts);
        assert_eq!(canon.len(), 1);
    }

    #[test]
    fn doubling_period_two() {
        let pts = periodic_points(&FullBranchMap::doubling(), 2, DEFAULT_PERIOD_CAP).unwrap();
        let xs: Vec<_> = pts.iter().map(|p| p.point.clone()).collect();
        assert!(xs.contains(&ratio(1, 3)) && xs.contains(&ratio(2, 3)));
        assert!(pts.iter().all(|p| p.multiplier == ratio(4, 1)));
    }

    #[test]
    fn periodic_points_are_exact_fixed_points() {
        for map in [FullBranchMap::doubling(), FullBranchMap::tripling(), w3()] {
            for n in 1..=5 {
                let pts = periodic_points(&map, n, DEFAULT_PERIOD_CAP).unwrap();
                assert_eq!(pts.len(), map.branch_count().pow(n as u32));
                for p in pts {
                    let mut x = p.point.clone();
                    for _ in 0..n {
                        x = map.step_exact(&x);
                    }
                    assert_eq!(x, p.point);
                }
            }
        }
    }

    #[test]
    fn cap_is_enforced() {
        assert_eq!(
            periodic_points(&FullBranchMap::doubling(), 21, DEFAULT_PERIOD_CAP),
            Err(Error::CapExceeded {
                cap: 20,
                requested: 21
            })
        );
    }

    #[test]
    fn partition_function_examples() {
        let d = FullBranchMap::doubling();
        for n in 1..=8 {
            assert_eq!(z_n_geometric_exact(&d, n, 20).unwrap(), ratio(1, 1));
        }
        assert_eq!(z_n_geometric_exact(&w3(), 1, 20).unwrap(), ratio(1, 1));
        assert_eq!(
            z_n(&d, &Potential::Constant { value: 0.0 }, 3, 20).unwrap(),
            8.0
        );
        let p = pressure(&w3(), &Potential::Constant { value: 0.0 }, 5, 20).unwrap();
        assert!(p.iter().all(|v| (v - 3f64.ln()).abs() < 1e-12));
        let g = pressure(&d, &Potential::Geometric, 6, 20).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-12));
        let t = Potential::Tabulated {
            values: vec![0.0, 1.0],
        };
        let z = z_n(&d, &t, 4, 20).unwrap();
        assert!((z - (1.0 + 1f64.exp()).powi(4)).abs() < 1e-9);
        assert!(z_n(&d, &Potential::Tabulated { values: vec![0.0] }, 2, 20).is_err());
    }

    #[test]
    fn large_n_uses_the_product_formula() {
        let z = z_n(
            &FullBranchMap::tripling(),
            &Potential::Constant { value: 0.0 },
            20,
            20,
        )
        .unwrap();
        assert!((z.ln() / 20.0 - 3f64.ln()).abs() < 1e-12);
    }
}
