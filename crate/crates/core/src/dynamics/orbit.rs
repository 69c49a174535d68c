//! Lebesgue-distributed orbits built from i.i.d. branch digits.
//!
//! Forward iteration of `2x mod 1` in binary floating point collapses to 0
//! after about 53 steps. Instead each point is reconstructed from the
//! digits that follow it: `x_k = ψ_{i_k}(ψ_{i_{k+1}}(... ψ_{i_{k+D-1}}(u)))`
//! where `ψ_i` are the inverse branches and `u` is uniform. Inverse
//! branches contract, so rounding errors do not grow.

use rand::{Rng, RngCore};

use super::map::FullBranchMap;
use crate::error::{Error, Result};
use crate::scalar::rational_to_f64;

pub const DEFAULT_DEPTH: usize = 64;

/// Precomputed digit thresholds and inverse branches of an affine map.
#[derive(Clone, Debug)]
pub struct SymbolicSampler {
    /// Cumulative widths scaled to `2^64`; the last entry is implicit.
    thresholds: Vec<u64>,
    offset: Vec<f64>,
    scale: Vec<f64>,
    depth: usize,
    /// `(b, table)` when every cumulative width is a multiple of `2^-b`;
    /// each digit then consumes only `b` random bits.
    dyadic: Option<(u32, Vec<u8>)>,
}

/// Digits together with the reconstructed orbit.
#[derive(Clone, Debug)]
pub struct SymbolicOrbit {
    pub digits: Vec<u8>,
    pub points: Vec<f64>,
    pub depth: usize,
}

impl SymbolicSampler {
    pub fn new(map: &FullBranchMap) -> Result<Self> {
        if !map.is_affine() {
            return Err(Error::NotAffine("symbolic sampling"));
        }
        if map.branch_count() > u8::MAX as usize {
            return Err(Error::InvalidMap(
                "too many branches for symbolic sampling".into(),
            ));
        }
        let two64 = 2f64.powi(64);
        let mut thresholds = Vec::new();
        let mut offset = Vec::new();
        let mut scale = Vec::new();
        let mut cum = num::BigRational::from_integer(0.into());
        let mut cums = Vec::new();
        for (i, b) in map.branches().iter().enumerate() {
            cum += b.width();
            cums.push(cum.clone());
            if i + 1 < map.branch_count() {
                thresholds.push((rational_to_f64(&cum) * two64).min(u64::MAX as f64) as u64);
            }
            let (s, t) = b.affine_coeffs().expect("affine");
            // ψ(y) = (y - t) / s
            offset.push(rational_to_f64(&(-t / s)));
            scale.push(rational_to_f64(
                &(num::BigRational::from_integer(1.into()) / s),
            ));
        }
        let dyadic = dyadic_table(&cums);
        Ok(SymbolicSampler {
            thresholds,
            offset,
            scale,
            depth: DEFAULT_DEPTH,
            dyadic,
        })
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = depth.max(1);
        self
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    #[inline]
    pub fn digit<R: RngCore>(&self, rng: &mut R) -> u8 {
        let r = rng.next_u64();
        let mut i = 0;
        while i < self.thresholds.len() && r >= self.thresholds[i] {
            i += 1;
        }
        i as u8
    }

    /// Appends `count` digits.
    pub fn push_digits<R: RngCore>(&self, rng: &mut R, out: &mut Vec<u8>, count: usize) {
        match &self.dyadic {
            Some((b, table)) => {
                let per = (64 / b) as usize;
                let mask = (1u64 << b) - 1;
                let mut left = count;
                while left > 0 {
                    let mut r = rng.next_u64();
                    for _ in 0..per.min(left) {
                        out.push(table[(r & mask) as usize]);
                        r >>= b;
                    }
                    left -= per.min(left);
                }
            }
            None => out.extend((0..count).map(|_| self.digit(rng))),
        }
    }

    #[inline]
    fn inverse(&self, digit: u8, y: f64) -> f64 {
        let i = digit as usize;
        self.offset[i] + self.scale[i] * y
    }

    /// Orbit of length `horizon` from a single stream of digits.
    pub fn sample<R: Rng>(&self, rng: &mut R, horizon: usize) -> SymbolicOrbit {
        let mut stream = OrbitStream::new(self, horizon.max(1));
        let mut points = Vec::with_capacity(horizon);
        let mut digits = Vec::with_capacity(horizon);
        while points.len() < horizon {
            let want = (horizon - points.len()).min(stream.chunk);
            points.extend_from_slice(stream.next_chunk(rng, want));
            digits.extend_from_slice(&stream.digits[..want]);
        }
        SymbolicOrbit {
            digits,
            points,
            depth: self.depth,
        }
    }
}

/// Streams an orbit chunk by chunk so trials can stop early.
pub struct OrbitStream<'a> {
    sampler: &'a SymbolicSampler,
    digits: Vec<u8>,
    points: Vec<f64>,
    chunk: usize,
    consumed: usize,
}

impl<'a> OrbitStream<'a> {
    pub fn new(sampler: &'a SymbolicSampler, chunk: usize) -> Self {
        let chunk = chunk.max(1);
        OrbitStream {
            sampler,
            digits: Vec::with_capacity(chunk + sampler.depth),
            points: vec![0.0; chunk],
            chunk,
            consumed: 0,
        }
    }

    /// Next `len ≤ chunk` points of the orbit.
    pub fn next_chunk<R: Rng>(&mut self, rng: &mut R, len: usize) -> &[f64] {
        let len = len.min(self.chunk);
        // Drop digits used by the previous chunk; the lookahead stays.
        self.digits.drain(..self.consumed.min(self.digits.len()));
        let need = len + self.sampler.depth;
        if self.digits.len() < need {
            let missing = need - self.digits.len();
            self.sampler.push_digits(rng, &mut self.digits, missing);
        }
        let mut y: f64 = rng.random();
        for j in (0..need).rev() {
            y = self.sampler.inverse(self.digits[j], y);
            if j < len {
                self.points[j] = y;
            }
        }
        self.consumed = len;
        &self.points[..len]
    }
}

fn dyadic_table(cums: &[num::BigRational]) -> Option<(u32, Vec<u8>)> {
    let mut bits = 0u32;
    for c in cums {
        let d = c.denom();
        let tz = d.trailing_zeros().unwrap_or(0);
        if *d != num::BigInt::from(1) << tz {
            return None;
        }
        bits = bits.max(tz as u32);
    }
    if bits == 0 || bits > 8 {
        return None;
    }
    let size = 1usize << bits;
    let table = (0..size)
        .map(|v| {
            let x = num::BigRational::new(v.into(), size.into());
            cums[..cums.len() - 1].iter().filter(|c| **c <= x).count() as u8
        })
        .collect();
    Some((bits, table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn coding_consistency() {
        let maps = [
            FullBranchMap::doubling(),
            FullBranchMap::tripling(),
            FullBranchMap::from_widths("w3", &[ratio(1, 2), ratio(1, 4), ratio(1, 4)]).unwrap(),
        ];
        for map in maps {
            let s = SymbolicSampler::new(&map).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let orbit = s.sample(&mut rng, 10_000);
            for k in 0..orbit.points.len() {
                let x = orbit.points[k];
                let b = map.branch_of(&x);
                assert_eq!(b as u8, orbit.digits[k]);
                if k + 1 < orbit.points.len() {
                    let y = map.apply_f64(x).unwrap();
                    let diff = (y - orbit.points[k + 1]).abs();
                    assert!(
                        diff.min(1.0 - diff) < 1e-12,
                        "step {k}: {y} vs {}",
                        orbit.points[k + 1]
                    );
                }
            }
        }
    }

    #[test]
    fn doubling_digits_are_fair() {
        let s = SymbolicSampler::new(&FullBranchMap::doubling()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200_000;
        let ones: usize = (0..n).map(|_| s.digit(&mut rng) as usize).sum();
        let p = ones as f64 / n as f64;
        assert!((p - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt());
    }

    #[test]
    fn dyadic_tables() {
        let w3 =
            FullBranchMap::from_widths("w3", &[ratio(1, 2), ratio(1, 4), ratio(1, 4)]).unwrap();
        let s = SymbolicSampler::new(&w3).unwrap();
        assert_eq!(s.dyadic, Some((2, vec![0, 0, 1, 2])));
        assert!(SymbolicSampler::new(&FullBranchMap::tripling())
            .unwrap()
            .dyadic
            .is_none());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut out = Vec::new();
        s.push_digits(&mut rng, &mut out, 100_000);
        let zeros = out.iter().filter(|&&d| d == 0).count() as f64 / 1e5;
        assert!((zeros - 0.5).abs() < 0.01);
    }

    #[test]
    fn occupation_frequency_matches_measure() {
        let s = SymbolicSampler::new(&FullBranchMap::doubling()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let orbit = s.sample(&mut rng, 1_000_000);
        let hits = orbit
            .points
            .iter()
            .filter(|&&x| (0.2..0.3).contains(&x))
            .count();
        let freq = hits as f64 / 1e6;
        assert!((freq - 0.1).abs() < 1e-3, "{freq}");
    }

    #[test]
    fn streamed_chunks_continue_the_same_orbit() {
        let map = FullBranchMap::doubling();
        let s = SymbolicSampler::new(&map).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut stream = OrbitStream::new(&s, 100);
        let a = stream.next_chunk(&mut rng, 100).to_vec();
        let b = stream.next_chunk(&mut rng, 100).to_vec();
        let y = map.apply_f64(a[99]).unwrap();
        assert!((y - b[0]).abs() < 1e-12);
    }

    #[test]
    fn smooth_maps_are_rejected() {
        let m = FullBranchMap::new(
            "convex",
            vec![
                super::super::map::BranchSpec::smooth(
                    ratio(0, 1),
                    ratio(1, 2),
                    |x| 1.5 * x + x * x,
                    |x| 1.5 + 2.0 * x,
                ),
                super::super::map::BranchSpec::increasing(ratio(1, 2), ratio(1, 1)),
            ],
        )
        .unwrap();
        assert!(SymbolicSampler::new(&m).is_err());
    }
}
