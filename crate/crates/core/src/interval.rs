//! Finite unions of subintervals of `[0,1)` with exact or floating
//! endpoints.
//!
//! Sets are handled up to measure zero: open and closed ends are not
//! distinguished, and components are stored half-open as `[lo, hi)`.
//! On the circle a set wrapping through 0 is stored as two components,
//! one starting at 0 and one ending at 1.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Rational, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    #[default]
    Circle,
    Line,
}

/// A non-empty interval `[lo, hi)` inside `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Interval<T> {
    lo: T,
    hi: T,
}

impl<T: Scalar> Interval<T> {
    pub fn new(lo: T, hi: T) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::Precondition(
                "interval endpoints must be finite".into(),
            ));
        }
        if !(T::zero() <= lo && lo < hi && hi <= T::one()) {
            return Err(Error::Precondition(format!(
                "need 0 <= lo < hi <= 1, got [{lo}, {hi})"
            )));
        }
        Ok(Interval { lo, hi })
    }

    pub fn lo(&self) -> &T {
        &self.lo
    }

    pub fn hi(&self) -> &T {
        &self.hi
    }

    pub fn length(&self) -> T {
        self.hi.clone() - self.lo.clone()
    }

    pub fn contains(&self, x: &T) -> bool {
        self.lo <= *x && *x < self.hi
    }
}

/// Canonical finite union of disjoint, non-adjacent intervals.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalUnion<T> {
    parts: Vec<Interval<T>>,
    topology: Topology,
}

fn cmp_lo<T: PartialOrd>(a: &(T, T), b: &(T, T)) -> Ordering {
    a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal)
}

impl<T: Scalar> IntervalUnion<T> {
    pub fn empty(topology: Topology) -> Self {
        IntervalUnion {
            parts: Vec::new(),
            topology,
        }
    }

    pub fn full(topology: Topology) -> Self {
        IntervalUnion {
            parts: vec![Interval {
                lo: T::zero(),
                hi: T::one(),
            }],
            topology,
        }
    }

    /// Builds a canonical union from arbitrary pairs. Pairs are clipped to
    /// `[0,1]`; empty and reversed pairs are dropped.
    pub fn from_pairs<I>(topology: Topology, pairs: I) -> Self
    where
        I: IntoIterator<Item = (T, T)>,
    {
        let mut raw: Vec<(T, T)> = pairs
            .into_iter()
            .map(|(lo, hi)| (T::max_of(&lo, &T::zero()), T::min_of(&hi, &T::one())))
            .filter(|(lo, hi)| lo < hi)
            .collect();
        raw.sort_by(cmp_lo);
        Self::from_sorted(topology, raw)
    }

    /// Merges pairs already sorted by `lo`.
    pub(crate) fn from_sorted(topology: Topology, raw: Vec<(T, T)>) -> Self {
        let mut parts: Vec<Interval<T>> = Vec::with_capacity(raw.len());
        for (lo, hi) in raw {
            if lo >= hi {
                continue;
            }
            if let Some(last) = parts.last_mut() {
                let gap = lo.clone() - last.hi.clone();
                if T::negligible_gap(&gap) {
                    if hi > last.hi {
                        last.hi = hi;
                    }
                    continue;
                }
            }
            parts.push(Interval { lo, hi });
        }
        IntervalUnion { parts, topology }
    }

    pub fn single(topology: Topology, lo: T, hi: T) -> Result<Self> {
        let iv = Interval::new(lo, hi)?;
        Ok(IntervalUnion {
            parts: vec![iv],
            topology,
        })
    }

    /// Ball of the given radius. On the circle the arc may wrap through 0;
    /// on the line it is clipped to `[0,1]`.
    pub fn ball(center: &T, radius: &T, topology: Topology) -> Result<Self> {
        if !(T::zero() < *radius && *radius < T::half()) {
            return Err(Error::RadiusOutOfRange(radius.to_string()));
        }
        if !(T::zero() <= *center && *center < T::one()) {
            return Err(Error::OutsideDomain(center.to_string()));
        }
        let lo = center.clone() - radius.clone();
        let hi = center.clone() + radius.clone();
        let pairs = match topology {
            Topology::Line => vec![(lo, hi)],
            Topology::Circle => {
                let mut v = Vec::with_capacity(2);
                if lo < T::zero() {
                    v.push((lo.clone() + T::one(), T::one()));
                }
                if hi > T::one() {
                    v.push((T::zero(), hi.clone() - T::one()));
                }
                v.push((lo, hi));
                v
            }
        };
        Ok(Self::from_pairs(topology, pairs))
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn parts(&self) -> &[Interval<T>] {
        &self.parts
    }

    pub fn component_count(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.parts.len() == 1 && self.parts[0].lo == T::zero() && self.parts[0].hi == T::one()
    }

    pub fn measure(&self) -> T {
        self.parts.iter().fold(T::zero(), |acc, p| acc + p.length())
    }

    pub fn contains(&self, x: &T) -> bool {
        let idx = self.parts.partition_point(|p| p.lo <= *x);
        idx > 0 && self.parts[idx - 1].contains(x)
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.topology != other.topology {
            return Err(Error::TopologyMismatch);
        }
        Ok(())
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        // Linear merge of two sorted lists.
        let mut raw = Vec::with_capacity(self.parts.len() + other.parts.len());
        let (mut i, mut j) = (0, 0);
        while i < self.parts.len() || j < other.parts.len() {
            let take_left = match (self.parts.get(i), other.parts.get(j)) {
                (Some(a), Some(b)) => a.lo <= b.lo,
                (Some(_), None) => true,
                _ => false,
            };
            let p = if take_left {
                i += 1;
                &self.parts[i - 1]
            } else {
                j += 1;
                &other.parts[j - 1]
            };
            raw.push((p.lo.clone(), p.hi.clone()));
        }
        Ok(Self::from_sorted(self.topology, raw))
    }

    pub fn intersect(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let mut raw = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.parts.len() && j < other.parts.len() {
            let a = &self.parts[i];
            let b = &other.parts[j];
            let lo = T::max_of(&a.lo, &b.lo);
            let hi = T::min_of(&a.hi, &b.hi);
            if lo < hi {
                raw.push((lo, hi));
            }
            if a.hi <= b.hi {
                i += 1;
            } else {
                j += 1;
            }
        }
        Ok(Self::from_sorted(self.topology, raw))
    }

    pub fn complement(&self) -> Self {
        let mut raw = Vec::with_capacity(self.parts.len() + 1);
        let mut start = T::zero();
        for p in &self.parts {
            if p.lo > start {
                raw.push((start.clone(), p.lo.clone()));
            }
            start = p.hi.clone();
        }
        if start < T::one() {
            raw.push((start, T::one()));
        }
        Self::from_sorted(self.topology, raw)
    }

    /// `self \ other`.
    pub fn difference(&self, other: &Self) -> Result<Self> {
        self.intersect(&other.complement())
    }

    /// Containment up to measure zero.
    pub fn is_subset_of(&self, other: &Self) -> Result<bool> {
        let rest = self.difference(other)?;
        Ok(if T::EXACT {
            rest.is_empty()
        } else {
            rest.measure().to_f64() < 1e-12
        })
    }

    /// Applies `x -> scale * x + shift` to every component.
    pub(crate) fn affine_pairs(&self, scale: &T, shift: &T) -> Vec<(T, T)> {
        let forward = *scale > T::zero();
        let map = |x: &T| scale.clone() * x.clone() + shift.clone();
        let mut out: Vec<(T, T)> = self
            .parts
            .iter()
            .map(|p| {
                let (a, b) = (map(&p.lo), map(&p.hi));
                if forward {
                    (a, b)
                } else {
                    (b, a)
                }
            })
            .collect();
        if !forward {
            out.reverse();
        }
        out
    }

    pub fn to_f64(&self) -> IntervalUnion<f64> {
        IntervalUnion {
            parts: self
                .parts
                .iter()
                .map(|p| Interval {
                    lo: p.lo.to_f64(),
                    hi: p.hi.to_f64(),
                })
                .collect(),
            topology: self.topology,
        }
    }

    /// JSON array of `[lo, hi]` pairs.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.parts
                .iter()
                .map(|p| serde_json::Value::Array(vec![p.lo.to_json(), p.hi.to_json()]))
                .collect(),
        )
    }

    pub fn from_json(value: &serde_json::Value, topology: Topology) -> Result<Self> {
        let items = value
            .as_array()
            .ok_or_else(|| Error::Parse("interval union must be a JSON array".into()))?;
        let mut pairs = Vec::with_capacity(items.len());
        for item in items {
            match item.as_array().map(|a| a.as_slice()) {
                Some([lo, hi]) => pairs.push((T::from_json(lo)?, T::from_json(hi)?)),
                _ => return Err(Error::Parse(format!("expected [lo, hi], got {item}"))),
            }
        }
        Ok(Self::from_pairs(topology, pairs))
    }
}

impl IntervalUnion<Rational> {
    pub fn ball_exact(center: &Rational, radius: &Rational, topology: Topology) -> Result<Self> {
        Self::ball(center, radius, topology)
    }
}

impl<T: Scalar> fmt::Display for IntervalUnion<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.parts.is_empty() {
            return write!(f, "∅");
        }
        for (i, p) in self.parts.iter().enumerate() {
            if i > 0 {
                write!(f, " ∪ ")?;
            }
            write!(f, "[{}, {})", p.lo, p.hi)?;
        }
        Ok(())
    }
}
