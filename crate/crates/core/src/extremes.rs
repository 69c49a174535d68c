//! Exceedance sets, annuli, survivor sets, extremal indices and exact
//! small-horizon probabilities.

use num::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::dynamics::{correlation_sequence, FullBranchMap};
use crate::error::{Error, Result};
use crate::interval::{IntervalUnion, Topology};
use crate::scalar::{format_rational, ratio, rational_to_f64, Rational, Scalar};

/// Default component cap for exact survivor-set computations.
pub const DEFAULT_COMPONENT_BUDGET: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "kebab-case")]
pub enum Profile {
    /// `φ(x) = -log dist(x, ζ)`.
    NegLog,
    /// `φ(x) = C - dist(x, ζ)^β`.
    Power { beta: f64, c: f64 },
}

/// Observable maximised at `center` whose super-level sets are balls.
#[derive(Clone, Debug, PartialEq)]
pub struct Observable {
    pub center: Rational,
    pub profile: Profile,
    pub topology: Topology,
}

impl Observable {
    pub fn neg_log(center: Rational) -> Self {
        Observable {
            center,
            profile: Profile::NegLog,
            topology: Topology::Circle,
        }
    }

    pub fn power(center: Rational, beta: f64, c: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite() && c.is_finite()) {
            return Err(Error::Precondition(format!(
                "power profile needs beta > 0, got {beta}"
            )));
        }
        Ok(Observable {
            center,
            profile: Profile::Power { beta, c },
            topology: Topology::Circle,
        })
    }

    pub fn with_topology(mut self, topology: Topology) -> Self {
        self.topology = topology;
        self
    }

    pub fn sup(&self) -> f64 {
        match self.profile {
            Profile::NegLog => f64::INFINITY,
            Profile::Power { c, .. } => c,
        }
    }

    pub fn distance(&self, x: f64) -> f64 {
        let d = (x - rational_to_f64(&self.center)).abs();
        match self.topology {
            Topology::Circle => d.min(1.0 - d),
            Topology::Line => d,
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        let d = self.distance(x);
        match self.profile {
            Profile::NegLog => -d.ln(),
            Profile::Power { beta, c } => c - d.powf(beta),
        }
    }

    /// Radius `ρ(u)` with `{φ > u} = B(ζ, ρ(u))`.
    pub fn radius_for(&self, u: f64) -> Result<f64> {
        if u >= self.sup() || u.is_nan() {
            return Err(Error::ThresholdAboveSup(u.to_string()));
        }
        let r = match self.profile {
            Profile::NegLog => (-u).exp(),
            Profile::Power { beta, c } => (c - u).powf(1.0 / beta),
        };
        if r >= 0.5 {
            return Err(Error::RadiusOutOfRange(r.to_string()));
        }
        Ok(r)
    }

    /// Level `u` whose exceedance set is the ball of radius `r`.
    pub fn threshold_for_radius(&self, r: f64) -> f64 {
        match self.profile {
            Profile::NegLog => -r.ln(),
            Profile::Power { beta, c } => c - r.powf(beta),
        }
    }

    /// `U(u) = {φ > u}`.
    pub fn exceedance_set(&self, u: f64) -> Result<IntervalUnion<f64>> {
        let r = self.radius_for(u)?;
        IntervalUnion::ball(&rational_to_f64(&self.center), &r, self.topology)
    }

    /// Exceedance set given directly by an exact radius.
    pub fn ball_exact(&self, radius: &Rational) -> Result<IntervalUnion<Rational>> {
        IntervalUnion::ball(&self.center, radius, self.topology)
    }

    /// Radius whose ball has measure `p` (line balls are clipped at the ends).
    pub fn radius_for_measure(&self, p: &Rational) -> Result<Rational> {
        let two = ratio(2, 1);
        match self.topology {
            Topology::Circle => Ok(p / two),
            Topology::Line => {
                let one = Rational::one();
                let m = if self.center < &one - &self.center {
                    self.center.clone()
                } else {
                    &one - &self.center
                };
                let half = p / &two;
                Ok(if half <= m { half } else { p - m })
            }
        }
    }
}

/// Level `u_n` with `n · P(U(u_n)) = τ` exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdSchedule {
    pub tau: Rational,
    pub n: u64,
    pub radius: Rational,
    pub p: Rational,
    pub u: f64,
}

pub fn threshold_for(obs: &Observable, n: u64, tau: &Rational) -> Result<ThresholdSchedule> {
    if n == 0 {
        return Err(Error::InfeasibleThreshold("n = 0".into()));
    }
    let p = tau / Rational::from_integer(n.into());
    if !p.is_positive() || p >= Rational::one() {
        return Err(Error::InfeasibleThreshold(format_rational(&p)));
    }
    let radius = obs.radius_for_measure(&p)?;
    if radius >= ratio(1, 2) {
        return Err(Error::InfeasibleThreshold(format_rational(&p)));
    }
    let ball = obs.ball_exact(&radius)?;
    debug_assert_eq!(ball.measure(), p);
    let u = obs.threshold_for_radius(rational_to_f64(&radius));
    Ok(ThresholdSchedule {
        tau: tau.clone(),
        n,
        radius,
        p,
        u,
    })
}

fn check_budget<T: Scalar>(s: &IntervalUnion<T>, budget: usize) -> Result<()> {
    if s.component_count() > budget {
        return Err(Error::BudgetExceeded {
            components: s.component_count(),
            budget,
        });
    }
    Ok(())
}

/// `A^(q) = U ∩ ⋂_{i=1}^q T^{-i}(U^c)`.
pub fn annulus_set<T: Scalar>(
    map: &FullBranchMap,
    u: &IntervalUnion<T>,
    q: usize,
) -> Result<IntervalUnion<T>> {
    let mut a = u.clone();
    let mut pre = u.clone();
    for _ in 0..q {
        pre = map.preimage(&pre)?;
        a = a.difference(&pre)?;
        if a.is_empty() {
            break;
        }
    }
    Ok(a)
}

/// `𝒲_{s,ℓ}(B) = ⋂_{i=⌊s⌋}^{⌊s⌋+max(⌊ℓ⌋−1,0)} T^{-i}(B^c)`; `𝒲_{s,0}` is
/// the whole space.
pub fn survivor_set<T: Scalar>(
    map: &FullBranchMap,
    b: &IntervalUnion<T>,
    s: f64,
    l: f64,
    budget: usize,
) -> Result<IntervalUnion<T>> {
    if !(s >= 0.0 && l >= 0.0) {
        return Err(Error::Precondition(format!(
            "need s, l >= 0, got s = {s}, l = {l}"
        )));
    }
    if l == 0.0 {
        return Ok(IntervalUnion::full(b.topology()));
    }
    let terms = (l.floor() as usize).max(1);
    let bc = b.complement();
    let mut w = bc.clone();
    for _ in 1..terms {
        w = bc.intersect(&map.preimage(&w)?)?;
        check_budget(&w, budget)?;
    }
    for _ in 0..(s.floor() as usize) {
        w = map.preimage(&w)?;
        check_budget(&w, budget)?;
    }
    Ok(w)
}

/// `P(A^(q)) / P(U)`.
pub fn theta_n<T: Scalar>(map: &FullBranchMap, u: &IntervalUnion<T>, q: usize) -> Result<T> {
    let pu = u.measure();
    if pu <= T::zero() {
        return Err(Error::Precondition(
            "exceedance set has zero measure".into(),
        ));
    }
    Ok(annulus_set(map, u, q)?.measure() / pu)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThetaLimit {
    /// Prime period of ζ, or 0 when ζ has no period up to the cap.
    pub q: usize,
    pub theta: Rational,
    /// `|DF^p(ζ)|` in the periodic case.
    pub multiplier: Option<Rational>,
}

/// Extremal index from the closed form `θ = 1 − 1/|DF^p(ζ)|`.
pub fn theta_limit(map: &FullBranchMap, zeta: &Rational, cap: usize) -> Result<ThetaLimit> {
    if !map.is_affine() {
        return Err(Error::NotAffine("extremal index"));
    }
    if zeta.is_negative() || *zeta >= Rational::one() {
        return Err(Error::OutsideDomain(format_rational(zeta)));
    }
    let mut x = zeta.clone();
    let mut slope = Rational::one();
    for p in 1..=cap {
        let i = map.branch_of(&x);
        let b = &map.branches()[i];
        if i > 0 && x == b.lo {
            // One-sided images must agree on the circle, otherwise the
            // orbit is ambiguous at a discontinuity.
            let left = &map.branches()[i - 1];
            let (sl, tl) = left.affine_coeffs().expect("affine");
            let from_left = sl * &x + tl;
            let from_right = map.step_exact(&x);
            let l = if from_left.is_one() {
                Rational::zero()
            } else {
                from_left
            };
            if l != from_right {
                return Err(Error::PeriodInconclusive(cap));
            }
        }
        let (s, _) = b.affine_coeffs().expect("affine");
        slope *= s.abs();
        x = map.step_exact(&x);
        if x == *zeta {
            let theta = Rational::one() - Rational::one() / &slope;
            return Ok(ThetaLimit {
                q: p,
                theta,
                multiplier: Some(slope),
            });
        }
    }
    Ok(ThetaLimit {
        q: 0,
        theta: Rational::one(),
        multiplier: None,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnTime {
    Finite(usize),
    ExceedsHorizon,
}

impl ReturnTime {
    pub fn value(self) -> Option<usize> {
        match self {
            ReturnTime::Finite(r) => Some(r),
            ReturnTime::ExceedsHorizon => None,
        }
    }
}

/// Smallest `j ∈ [1, horizon]` with `T^j(A) ∩ A` of positive measure.
pub fn first_return_r<T: Scalar>(
    map: &FullBranchMap,
    a: &IntervalUnion<T>,
    horizon: usize,
) -> Result<ReturnTime> {
    if a.measure() <= T::zero() {
        return Err(Error::Precondition("return time of a null set".into()));
    }
    let mut img = a.clone();
    for j in 1..=horizon {
        img = map.image(&img)?;
        if !img.intersect(a)?.is_empty() {
            return Ok(ReturnTime::Finite(j));
        }
    }
    Ok(ReturnTime::ExceedsHorizon)
}

/// Summation range of the short-range recurrence sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DprimeRange {
    /// `j = q+1 ..= ⌊n/k⌋ − 1`, as in the general error theorem.
    #[default]
    Theorem,
    /// `j = 1 ..= ⌊n/k⌋`, as in its corollary with a limiting index.
    Corollary,
}

impl DprimeRange {
    pub fn bounds(self, n: u64, q: usize, k: u64) -> (u64, u64) {
        let m = n / k.max(1);
        match self {
            DprimeRange::Theorem => (q as u64 + 1, m.saturating_sub(1)),
            DprimeRange::Corollary => (1, m),
        }
    }
}

/// `n Σ_j P(A ∩ T^{-j} A)` over the chosen range, exact.
pub fn dprime_sum(
    map: &FullBranchMap,
    a: &IntervalUnion<Rational>,
    n: u64,
    q: usize,
    k: u64,
    range: DprimeRange,
) -> Result<Rational> {
    if k == 0 {
        return Err(Error::Precondition("k must be positive".into()));
    }
    let (lo, hi) = range.bounds(n, q, k);
    if lo > hi || a.is_empty() {
        return Ok(Rational::zero());
    }
    let seq = correlation_sequence(map, a, a, hi as usize)?;
    let sum = seq[lo as usize..=hi as usize]
        .iter()
        .fold(Rational::zero(), |acc, v| acc + v);
    Ok(sum * Rational::from_integer(n.into()))
}

/// `P(M_n ≤ u) = P(𝒲_{0,n}(U))`.
pub fn exact_evl_prob<T: Scalar>(
    map: &FullBranchMap,
    u: &IntervalUnion<T>,
    n: usize,
    budget: usize,
) -> Result<T> {
    Ok(survivor_set(map, u, 0.0, n as f64, budget)?.measure())
}

/// `P(r_B > t) = P(T^{-1} 𝒲_{0,t}(B))`.
pub fn exact_hts_prob<T: Scalar>(
    map: &FullBranchMap,
    b: &IntervalUnion<T>,
    t: usize,
    budget: usize,
) -> Result<T> {
    if t == 0 {
        return Ok(T::one());
    }
    let w = survivor_set(map, b, 0.0, t as f64, budget)?;
    let pre = map.preimage(&w)?;
    check_budget(&pre, budget)?;
    Ok(pre.measure())
}

/// Exceedance set, annulus, index and return time for one level.
#[derive(Clone, Debug)]
pub struct EventFamily {
    pub u: IntervalUnion<Rational>,
    pub q: usize,
    pub a: IntervalUnion<Rational>,
    pub theta_n: Rational,
    pub r: ReturnTime,
}

impl EventFamily {
    pub fn new(
        map: &FullBranchMap,
        u: IntervalUnion<Rational>,
        q: usize,
        horizon: usize,
    ) -> Result<Self> {
        let a = annulus_set(map, &u, q)?;
        let theta_n = &a.measure() / &u.measure();
        let r = if a.is_empty() {
            ReturnTime::ExceedsHorizon
        } else {
            first_return_r(map, &a, horizon)?
        };
        Ok(EventFamily {
            u,
            q,
            a,
            theta_n,
            r,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::parse_rational;

    fn q(n: i64, d: i64) -> Rational {
        ratio(n, d)
    }

    const C: Topology = Topology::Circle;

    #[test]
    fn exceedance_set_examples() {
        let obs = Observable::neg_log(q(1, 3));
        let (n, tau) = (1000.0, 1.0);
        let u = obs.exceedance_set((2.0f64 * n / tau).ln()).unwrap();
        assert!((u.measure() - tau / n).abs() < 1e-15);
        let mut last = 1.0;
        for u in [2.0, 4.0, 8.0, 16.0] {
            let m = obs.exceedance_set(u).unwrap().measure();
            assert!(m < last);
            last = m;
        }
        let p = Observable::power(q(1, 2), 1.0, 1.0).unwrap();
        assert!((p.radius_for(0.9).unwrap() - 0.1).abs() < 1e-12);
        assert!(matches!(
            p.radius_for(1.0),
            Err(Error::ThresholdAboveSup(_))
        ));
        assert!(matches!(p.radius_for(0.0), Err(Error::RadiusOutOfRange(_))));
    }

    #[test]
    fn threshold_examples() {
        let obs = Observable::neg_log(q(1, 3));
        let s = threshold_for(&obs, 1000, &q(1, 1)).unwrap();
        assert_eq!(s.p, q(1, 1000));
        assert!((s.u - 2000f64.ln()).abs() < 1e-12);
        assert!(matches!(
            threshold_for(&obs, 1000, &q(0, 1)),
            Err(Error::InfeasibleThreshold(_))
        ));
        assert!(matches!(
            threshold_for(&obs, 10, &q(10, 1)),
            Err(Error::InfeasibleThreshold(_))
        ));
        let s = threshold_for(&obs, 100, &q(2, 1)).unwrap();
        assert_eq!(obs.ball_exact(&s.radius).unwrap().measure(), q(1, 50));
        // clipped ball on the line still has the requested measure
        let line = Observable::neg_log(q(1, 100)).with_topology(Topology::Line);
        let s = threshold_for(&line, 10, &q(1, 2)).unwrap();
        assert_eq!(line.ball_exact(&s.radius).unwrap().measure(), q(1, 20));
    }

    #[test]
    fn annulus_examples() {
        let d = FullBranchMap::doubling();
        let u = IntervalUnion::ball(&q(1, 3), &q(1, 100), C).unwrap();
        let a = annulus_set(&d, &u, 2).unwrap();
        assert_eq!(a.measure(), q(3, 200));
        assert_eq!(annulus_set(&d, &u, 0).unwrap(), u);
        // ζ = 1/5 has period 4, so nothing returns within three steps
        let v = IntervalUnion::ball(&q(1, 5), &q(1, 1000), C).unwrap();
        assert_eq!(annulus_set(&d, &v, 3).unwrap(), v);
    }

    #[test]
    fn annuli_are_nested() {
        let d = FullBranchMap::doubling();
        let u = IntervalUnion::ball(&q(1, 7), &q(1, 40), C).unwrap();
        let mut prev = u.clone();
        for k in 0..6 {
            let a = annulus_set(&d, &u, k).unwrap();
            assert!(a.is_subset_of(&prev).unwrap());
            prev = a;
        }
    }

    #[test]
    fn survivor_set_matches_orbit_maxima() {
        let d = FullBranchMap::doubling();
        let u = IntervalUnion::ball(&q(1, 3), &q(1, 20), C).unwrap();
        let n = 8;
        let w = survivor_set(&d, &u, 0.0, n as f64, DEFAULT_COMPONENT_BUDGET).unwrap();
        for i in 0..1000 {
            let x = parse_rational(&format!("{}/1001", i)).unwrap();
            let mut y = x.clone();
            let mut hit = false;
            for _ in 0..n {
                hit |= u.contains(&y);
                y = d.step_exact(&y);
            }
            assert_eq!(w.contains(&x), !hit, "x = {x}");
        }
        assert!(survivor_set(&d, &u, 3.0, 0.0, 10).unwrap().is_full());
        assert_eq!(
            survivor_set(&d, &u, 0.0, 1.0, 10).unwrap().measure(),
            Rational::one() - u.measure()
        );
    }

    #[test]
    fn survivor_budget_is_enforced() {
        let d = FullBranchMap::doubling();
        let u = IntervalUnion::ball(&q(1, 3), &q(1, 1000), C).unwrap();
        assert!(matches!(
            survivor_set(&d, &u, 0.0, 16.0, 100),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn theta_n_examples() {
        let d = FullBranchMap::doubling();
        for den in [25, 50, 100, 1000] {
            let u = IntervalUnion::ball(&q(1, 3), &q(1, den), C).unwrap();
            assert_eq!(theta_n(&d, &u, 2).unwrap(), q(3, 4));
            assert_eq!(theta_n(&d, &u, 0).unwrap(), q(1, 1));
        }
        let t = FullBranchMap::tripling();
        let u = IntervalUnion::ball(&q(0, 1), &q(1, 100), C).unwrap();
        assert_eq!(theta_n(&t, &u, 1).unwrap(), q(2, 3));
    }

    #[test]
    fn theta_limit_examples() {
        let d = FullBranchMap::doubling();
        let a = theta_limit(&d, &q(1, 3), 20).unwrap();
        assert_eq!((a.q, a.theta), (2, q(3, 4)));
        let b = theta_limit(&d, &q(0, 1), 20).unwrap();
        assert_eq!((b.q, b.theta), (1, q(1, 2)));
        let c = theta_limit(&d, &parse_rational("0.3183098861837907").unwrap(), 20).unwrap();
        assert_eq!((c.q, c.theta), (0, q(1, 1)));
        let t = theta_limit(&FullBranchMap::tripling(), &q(0, 1), 20).unwrap();
        assert_eq!(t.theta, q(2, 3));
    }

    #[test]
    fn first_return_examples() {
        let d = FullBranchMap::doubling();
        let b = IntervalUnion::ball(&q(1, 3), &q(1, 100), C).unwrap();
        assert_eq!(first_return_r(&d, &b, 50).unwrap(), ReturnTime::Finite(2));
        let full = IntervalUnion::<Rational>::full(C);
        assert_eq!(first_return_r(&d, &full, 5).unwrap(), ReturnTime::Finite(1));
        let mut last = 0;
        for den in [100, 1000, 10_000] {
            let u = IntervalUnion::ball(&q(1, 3), &q(1, den), C).unwrap();
            let a = annulus_set(&d, &u, 2).unwrap();
            let r = first_return_r(&d, &a, 200).unwrap().value().unwrap();
            assert!(r >= 3 && r > last, "den {den}: R = {r}");
            last = r;
        }
        let tiny = IntervalUnion::ball(&q(1, 5), &q(1, 10_000), C).unwrap();
        assert_eq!(
            first_return_r(&d, &tiny, 2).unwrap(),
            ReturnTime::ExceedsHorizon
        );
    }

    #[test]
    fn dprime_examples() {
        let d = FullBranchMap::doubling();
        let u = IntervalUnion::ball(&q(1, 3), &q(1, 512), C).unwrap();
        let a = annulus_set(&d, &u, 2).unwrap();
        let v = dprime_sum(&d, &a, 256, 2, 16, DprimeRange::Theorem).unwrap();
        assert!(v.is_positive());
        assert!(dprime_sum(&d, &a, 256, 20, 16, DprimeRange::Theorem)
            .unwrap()
            .is_zero());
        // with A this small nothing returns before ⌊n/k⌋
        let small = IntervalUnion::ball(&q(1, 5), &q(1, 1_000_000), C).unwrap();
        assert!(dprime_sum(&d, &small, 64, 0, 16, DprimeRange::Theorem)
            .unwrap()
            .is_zero());
    }

    #[test]
    fn exact_probability_examples() {
        let d = FullBranchMap::doubling();
        let u = IntervalUnion::from_pairs(C, [(q(2, 5), q(3, 5))]);
        assert_eq!(exact_evl_prob(&d, &u, 1, 1000).unwrap(), q(4, 5));
        // 1 - P(U) - P(T^{-1}U) + P(U ∩ T^{-1}U)
        let pre = d.preimage(&u).unwrap();
        let overlap = u.intersect(&pre).unwrap().measure();
        assert_eq!(exact_evl_prob(&d, &u, 2, 1000).unwrap(), q(3, 5) + overlap);
        let grid = 100_000;
        let w = survivor_set(&d, &u, 0.0, 2.0, 1000).unwrap().to_f64();
        let inside = (0..grid)
            .filter(|i| {
                let x = (*i as f64 + 0.5) / grid as f64;
                !u.to_f64().contains(&x) && !u.to_f64().contains(&d.apply_f64(x).unwrap())
            })
            .count();
        assert!((inside as f64 / grid as f64 - w.measure()).abs() < 1e-4);

        let b = IntervalUnion::ball(&q(1, 3), &q(1, 20), C).unwrap();
        assert_eq!(exact_hts_prob(&d, &b, 0, 1000).unwrap(), q(1, 1));
        let h = exact_hts_prob(&d, &b, 6, 100_000).unwrap();
        assert_eq!(h, exact_evl_prob(&d, &b, 6, 100_000).unwrap());
        assert!(h >= Rational::one() - q(6, 1) * b.measure());
    }

    #[test]
    fn stationarity_of_exceedance_probability() {
        let d = FullBranchMap::from_widths("w3", &[q(1, 2), q(1, 4), q(1, 4)]).unwrap();
        let u = IntervalUnion::ball(&q(2, 7), &q(1, 30), C).unwrap();
        let mut pre = u.clone();
        for _ in 0..10 {
            pre = d.preimage(&pre).unwrap();
            assert_eq!(pre.measure(), u.measure());
        }
    }

    #[test]
    fn event_family_bundles_consistent_values() {
        let d = FullBranchMap::doubling();
        let u = IntervalUnion::ball(&q(1, 3), &q(1, 100), C).unwrap();
        let f = EventFamily::new(&d, u, 2, 100).unwrap();
        assert_eq!(f.theta_n, q(3, 4));
        assert!(f.r.value().unwrap() >= 3);
    }
}
