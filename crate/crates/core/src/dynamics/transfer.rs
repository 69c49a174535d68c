//! Exact Lebesgue transfer operator on rational step functions.
//!
//! For an affine full-branch map, `L g(y) = Σ_i |ψ_i'| g(ψ_i(y))`. A
//! breakpoint `p` of `g` inside branch `i` becomes the breakpoint `T(p)` of
//! `L g`, so the number of breakpoints never grows and `∫ g · 1_A ∘ T^j`
//! can be computed exactly for large `j`.

use num::{One, Signed, Zero};

use super::map::FullBranchMap;
use crate::error::{Error, Result};
use crate::interval::IntervalUnion;
use crate::scalar::{ratio, Rational};

/// Right-continuous step function on `[0,1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepFunction {
    /// `0 = b_0 < b_1 < … < b_m = 1`.
    breaks: Vec<Rational>,
    /// Value on `[b_i, b_{i+1})`.
    values: Vec<Rational>,
}

impl StepFunction {
    pub fn constant(c: Rational) -> Self {
        StepFunction {
            breaks: vec![Rational::zero(), Rational::one()],
            values: vec![c],
        }
    }

    pub fn indicator(s: &IntervalUnion<Rational>) -> Self {
        let mut breaks = vec![Rational::zero()];
        let mut values = Vec::new();
        for p in s.parts() {
            if *p.lo() > *breaks.last().expect("non-empty") {
                values.push(Rational::zero());
                breaks.push(p.lo().clone());
            }
            values.push(Rational::one());
            breaks.push(p.hi().clone());
        }
        if !breaks.last().expect("non-empty").is_one() {
            values.push(Rational::zero());
            breaks.push(Rational::one());
        }
        let mut f = StepFunction { breaks, values };
        f.compact();
        f
    }

    pub fn breakpoints(&self) -> &[Rational] {
        &self.breaks
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        let i = self.breaks.partition_point(|b| b <= x).saturating_sub(1);
        self.values[i.min(self.values.len() - 1)].clone()
    }

    pub fn integral(&self) -> Rational {
        self.values
            .iter()
            .enumerate()
            .fold(Rational::zero(), |acc, (i, v)| {
                acc + v * (&self.breaks[i + 1] - &self.breaks[i])
            })
    }

    /// `∫ g · 1_S`.
    pub fn integrate_over(&self, s: &IntervalUnion<Rational>) -> Rational {
        let mut total = Rational::zero();
        for p in s.parts() {
            let start = self
                .breaks
                .partition_point(|b| b <= p.lo())
                .saturating_sub(1);
            for i in start..self.values.len() {
                if self.breaks[i] >= *p.hi() {
                    break;
                }
                let lo = if self.breaks[i] > *p.lo() {
                    &self.breaks[i]
                } else {
                    p.lo()
                };
                let hi = if self.breaks[i + 1] < *p.hi() {
                    &self.breaks[i + 1]
                } else {
                    p.hi()
                };
                if lo < hi {
                    total += &self.values[i] * (hi - lo);
                }
            }
        }
        total
    }

    fn compact(&mut self) {
        let mut breaks = vec![self.breaks[0].clone()];
        let mut values: Vec<Rational> = Vec::with_capacity(self.values.len());
        for (i, v) in self.values.iter().enumerate() {
            if values.last() == Some(v) {
                *breaks.last_mut().expect("non-empty") = self.breaks[i + 1].clone();
            } else {
                values.push(v.clone());
                breaks.push(self.breaks[i + 1].clone());
            }
        }
        self.breaks = breaks;
        self.values = values;
    }
}

/// Exact Lebesgue transfer operator of an affine map.
pub fn transfer(map: &FullBranchMap, g: &StepFunction) -> Result<StepFunction> {
    if !map.is_affine() {
        return Err(Error::NotAffine("transfer operator"));
    }
    let mut breaks = vec![Rational::zero(), Rational::one()];
    for (i, b) in map.branches().iter().enumerate() {
        for p in &g.breaks {
            if *p > b.lo && *p < b.hi {
                breaks.push(map.apply_branch(i, p)?);
            }
        }
    }
    breaks.sort();
    breaks.dedup();
    let two = ratio(2, 1);
    let mut values = Vec::with_capacity(breaks.len() - 1);
    for w in breaks.windows(2) {
        let mid = (&w[0] + &w[1]) / &two;
        let mut v = Rational::zero();
        for b in map.branches() {
            let (s, t) = b.affine_coeffs().expect("affine");
            let x = (&mid - t) / s;
            v += g.eval(&x) / s.abs();
        }
        values.push(v);
    }
    let mut f = StepFunction { breaks, values };
    f.compact();
    Ok(f)
}

/// `m(A ∩ T^{-j} B)` for `j = 0..=j_max`, exactly.
pub fn correlation_sequence(
    map: &FullBranchMap,
    a: &IntervalUnion<Rational>,
    b: &IntervalUnion<Rational>,
    j_max: usize,
) -> Result<Vec<Rational>> {
    // ∫ 1_A · 1_B∘T^j = ∫ L^j(1_A) · 1_B
    let mut g = StepFunction::indicator(a);
    let mut out = Vec::with_capacity(j_max + 1);
    out.push(g.integrate_over(b));
    for _ in 0..j_max {
        g = transfer(map, &g)?;
        out.push(g.integrate_over(b));
    }
    Ok(out)
}
