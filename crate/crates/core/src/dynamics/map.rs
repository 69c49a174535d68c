use std::fmt;
use std::sync::Arc;

use num::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::interval::{IntervalUnion, Topology};
use crate::scalar::{format_rational, ratio, rational_to_f64, Rational, Scalar};

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A monotone branch given by function handles. Only float evaluation is
/// available for these.
#[derive(Clone)]
pub struct SmoothBranch {
    pub f: RealFn,
    pub df: RealFn,
}

impl fmt::Debug for SmoothBranch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SmoothBranch { .. }")
    }
}

#[derive(Clone, Debug)]
pub enum BranchKind {
    Affine {
        slope: Rational,
        intercept: Rational,
    },
    Smooth(SmoothBranch),
}

/// One branch of a full-branch map: a bijection from `[lo, hi)` onto `[0, 1)`.
#[derive(Clone, Debug)]
pub struct BranchSpec {
    pub lo: Rational,
    pub hi: Rational,
    pub kind: BranchKind,
}

impl BranchSpec {
    pub fn affine(lo: Rational, hi: Rational, slope: Rational, intercept: Rational) -> Self {
        BranchSpec {
            lo,
            hi,
            kind: BranchKind::Affine { slope, intercept },
        }
    }

    /// Orientation-preserving affine branch onto `[0,1)`.
    pub fn increasing(lo: Rational, hi: Rational) -> Self {
        let w = &hi - &lo;
        let slope = Rational::one() / &w;
        let intercept = -&lo / &w;
        Self::affine(lo, hi, slope, intercept)
    }

    /// Orientation-reversing affine branch onto `(0,1]`.
    pub fn decreasing(lo: Rational, hi: Rational) -> Self {
        let w = &hi - &lo;
        let slope = -Rational::one() / &w;
        let intercept = &hi / &w;
        Self::affine(lo, hi, slope, intercept)
    }

    pub fn smooth<F, D>(lo: Rational, hi: Rational, f: F, df: D) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        BranchSpec {
            lo,
            hi,
            kind: BranchKind::Smooth(SmoothBranch {
                f: Arc::new(f),
                df: Arc::new(df),
            }),
        }
    }

    pub fn width(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn affine_coeffs(&self) -> Option<(&Rational, &Rational)> {
        match &self.kind {
            BranchKind::Affine { slope, intercept } => Some((slope, intercept)),
            BranchKind::Smooth(_) => None,
        }
    }

    fn eval_f64(&self, x: f64) -> f64 {
        match &self.kind {
            BranchKind::Affine { slope, intercept } => {
                rational_to_f64(slope) * x + rational_to_f64(intercept)
            }
            BranchKind::Smooth(s) => (s.f)(x),
        }
    }

    fn deriv_f64(&self, x: f64) -> f64 {
        match &self.kind {
            BranchKind::Affine { slope, .. } => rational_to_f64(slope),
            BranchKind::Smooth(s) => (s.df)(x),
        }
    }
}

/// Piecewise map on `[0,1)` whose branches each cover the whole interval.
#[derive(Clone, Debug)]
pub struct FullBranchMap {
    name: String,
    branches: Vec<BranchSpec>,
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

impl FullBranchMap {
    pub fn new(name: impl Into<String>, branches: Vec<BranchSpec>) -> Result<Self> {
        let map = FullBranchMap {
            name: name.into(),
            branches,
        };
        map.validate()?;
        Ok(map)
    }

    /// `x -> 2x mod 1`.
    pub fn doubling() -> Self {
        Self::from_widths("doubling", &[ratio(1, 2), ratio(1, 2)]).expect("valid widths")
    }

    /// `x -> 3x mod 1`.
    pub fn tripling() -> Self {
        Self::from_widths("tripling", &[ratio(1, 3), ratio(1, 3), ratio(1, 3)])
            .expect("valid widths")
    }

    /// Increasing affine branches with the given widths, left to right.
    pub fn from_widths(name: impl Into<String>, widths: &[Rational]) -> Result<Self> {
        let mut lo = Rational::zero();
        let mut branches = Vec::with_capacity(widths.len());
        for w in widths {
            if !w.is_positive() {
                return Err(Error::InvalidMap(format!(
                    "branch width {} is not positive",
                    format_rational(w)
                )));
            }
            let hi = &lo + w;
            branches.push(BranchSpec::increasing(lo.clone(), hi.clone()));
            lo = hi;
        }
        Self::new(name, branches)
    }

    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "doubling" => Ok(Self::doubling()),
            "tripling" => Ok(Self::tripling()),
            other => Err(Error::InvalidMap(format!("unknown builtin map {other:?}"))),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidMap(m));
        if self.branches.len() < 2 {
            return bad(format!(
                "need at least 2 branches, got {}",
                self.branches.len()
            ));
        }
        let mut expected_lo = Rational::zero();
        for (i, b) in self.branches.iter().enumerate() {
            if b.lo != expected_lo {
                return bad(format!(
                    "branch {i} starts at {} but previous ends at {}",
                    b.lo, expected_lo
                ));
            }
            if b.lo >= b.hi {
                return bad(format!("branch {i} has empty domain"));
            }
            match &b.kind {
                BranchKind::Affine { slope, intercept } => {
                    let w = b.width();
                    if slope.abs() * &w != Rational::one() {
                        return bad(format!("branch {i}: |slope| must equal 1/width"));
                    }
                    let at_lo = slope * &b.lo + intercept;
                    let at_hi = slope * &b.hi + intercept;
                    let (a, z) = if slope.is_positive() {
                        (at_lo, at_hi)
                    } else {
                        (at_hi, at_lo)
                    };
                    if !a.is_zero() || !z.is_one() {
                        return bad(format!("branch {i} is not onto [0,1)"));
                    }
                }
                BranchKind::Smooth(s) => {
                    let (lo, hi) = (rational_to_f64(&b.lo), rational_to_f64(&b.hi));
                    let ends = ((s.f)(lo), (s.f)(hi));
                    if !(near(ends.0, 0.0) && near(ends.1, 1.0)
                        || near(ends.0, 1.0) && near(ends.1, 0.0))
                    {
                        return bad(format!("branch {i} is not onto [0,1)"));
                    }
                    for k in 0..=16 {
                        let x = lo + (hi - lo) * (k as f64 / 16.0);
                        if (s.df)(x).abs() <= 1.0 {
                            return bad(format!("branch {i} is not expanding at {x}"));
                        }
                    }
                }
            }
            expected_lo = b.hi.clone();
        }
        if !expected_lo.is_one() {
            return bad("branch domains do not cover [0,1)".into());
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn branches(&self) -> &[BranchSpec] {
        &self.branches
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    pub fn widths(&self) -> Vec<Rational> {
        self.branches.iter().map(BranchSpec::width).collect()
    }

    pub fn max_width(&self) -> f64 {
        self.branches
            .iter()
            .map(|b| rational_to_f64(&b.width()))
            .fold(0.0, f64::max)
    }

    pub fn is_affine(&self) -> bool {
        self.branches.iter().all(|b| b.affine_coeffs().is_some())
    }

    fn require_affine(&self, what: &'static str) -> Result<()> {
        if self.is_affine() {
            Ok(())
        } else {
            Err(Error::NotAffine(what))
        }
    }

    /// Index of the branch whose half-open domain contains `x`.
    pub(crate) fn branch_of<T: Scalar>(&self, x: &T) -> usize {
        let idx = self
            .branches
            .partition_point(|b| T::from_rational(&b.lo) <= *x);
        idx.saturating_sub(1)
    }

    /// Branch index of `x`, rejecting interior branch boundaries.
    pub fn locate<T: Scalar>(&self, x: &T) -> Result<usize> {
        if !(T::zero() <= *x && *x < T::one()) {
            return Err(Error::OutsideDomain(x.to_string()));
        }
        let i = self.branch_of(x);
        if i > 0 && T::from_rational(&self.branches[i].lo) == *x {
            return Err(Error::BranchBoundary(x.to_string()));
        }
        Ok(i)
    }

    /// Image of `x` under the covering branch, reduced into `[0,1)`.
    pub fn apply<T: Scalar>(&self, x: &T) -> Result<T> {
        let i = self.locate(x)?;
        self.apply_branch(i, x)
    }

    /// Image of `x` under branch `i` with no boundary check; `1` is
    /// identified with `0`.
    pub(crate) fn apply_branch<T: Scalar>(&self, i: usize, x: &T) -> Result<T> {
        let b = &self.branches[i];
        let y = match &b.kind {
            BranchKind::Affine { slope, intercept } => {
                T::from_rational(slope) * x.clone() + T::from_rational(intercept)
            }
            BranchKind::Smooth(s) => {
                if T::EXACT {
                    return Err(Error::NotAffine("exact evaluation"));
                }
                T::from_f64((s.f)(x.to_f64()))
            }
        };
        Ok(if y >= T::one() { y - T::one() } else { y })
    }

    /// Half-open evaluation used by exact orbit tracking.
    pub(crate) fn step_exact(&self, x: &Rational) -> Rational {
        let i = self.branch_of(x);
        self.apply_branch(i, x).expect("affine map")
    }

    /// Derivative of the covering branch at `x`.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        let i = self.locate(&x)?;
        Ok(self.branches[i].deriv_f64(x))
    }

    /// Float evaluation for any branch kind.
    pub fn apply_f64(&self, x: f64) -> Result<f64> {
        let i = self.locate(&x)?;
        let y = self.branches[i].eval_f64(x);
        Ok(if y >= 1.0 { y - 1.0 } else { y.max(0.0) })
    }

    /// `T^{-1}(S)`: the union over branches of the inverse-branch images.
    pub fn preimage<T: Scalar>(&self, s: &IntervalUnion<T>) -> Result<IntervalUnion<T>> {
        self.require_affine("preimage")?;
        let mut raw = Vec::with_capacity(s.component_count() * self.branches.len());
        for b in &self.branches {
            let (slope, intercept) = b.affine_coeffs().expect("affine");
            let inv = T::from_rational(&(Rational::one() / slope));
            let shift = T::from_rational(&(-intercept / slope));
            raw.extend(s.affine_pairs(&inv, &shift));
        }
        // Branch domains are ordered, so the pieces already come sorted.
        Ok(IntervalUnion::from_sorted(s.topology(), raw))
    }

    /// `T(S)`: union of the forward images of `S ∩ C_i`.
    pub fn image<T: Scalar>(&self, s: &IntervalUnion<T>) -> Result<IntervalUnion<T>> {
        self.require_affine("image")?;
        let mut raw = Vec::new();
        for b in &self.branches {
            let dom = IntervalUnion::from_pairs(
                s.topology(),
                [(T::from_rational(&b.lo), T::from_rational(&b.hi))],
            );
            let piece = s.intersect(&dom)?;
            let (slope, intercept) = b.affine_coeffs().expect("affine");
            raw.extend(piece.affine_pairs(&T::from_rational(slope), &T::from_rational(intercept)));
        }
        Ok(IntervalUnion::from_pairs(s.topology(), raw))
    }

    /// `T^{-j}(S)`.
    pub fn preimage_iter<T: Scalar>(
        &self,
        s: &IntervalUnion<T>,
        j: usize,
    ) -> Result<IntervalUnion<T>> {
        let mut out = s.clone();
        for _ in 0..j {
            out = self.preimage(&out)?;
        }
        Ok(out)
    }

    /// Composition `F^n = A x + B` on the cylinder of `word` (first symbol
    /// applied first).
    pub fn word_affine(&self, word: &[usize]) -> Result<(Rational, Rational)> {
        self.require_affine("word composition")?;
        let mut a = Rational::one();
        let mut c = Rational::zero();
        for &i in word {
            let (s, t) = self.branches[i].affine_coeffs().expect("affine");
            c = s * &c + t;
            a = s * &a;
        }
        Ok((a, c))
    }

    /// Closure endpoints of the cylinder `[word]`.
    pub fn cylinder(&self, word: &[usize]) -> Result<(Rational, Rational)> {
        self.require_affine("cylinder")?;
        let (mut lo, mut hi) = (Rational::zero(), Rational::one());
        for &i in word.iter().rev() {
            let (s, t) = self.branches[i].affine_coeffs().expect("affine");
            let a = (&lo - t) / s;
            let b = (&hi - t) / s;
            if a <= b {
                lo = a;
                hi = b;
            } else {
                lo = b;
                hi = a;
            }
        }
        Ok((lo, hi))
    }

    /// Symbolic itinerary of `x` over `n` steps.
    pub fn itinerary(&self, x: &Rational, n: usize) -> Vec<usize> {
        let mut x = x.clone();
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.branch_of(&x));
            x = self.step_exact(&x);
        }
        out
    }

    /// Metric used for balls around points of this map.
    pub fn default_topology(&self) -> Topology {
        Topology::Circle
    }
}
