//! Closed-form error brackets and blocking-parameter optimizers.
//!
//! Every bracket is returned without the theorems' non-constructive
//! constant `C`; see [`ErrorBudget::constant`].

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dynamics::FullBranchMap;
use crate::error::{Error, Result};
use crate::extremes::{annulus_set, survivor_set};
use crate::interval::IntervalUnion;
use num::{Signed, Zero};

use crate::scalar::Rational;

/// Rate function `γ` of decay of correlations against `L^1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum DecayModel {
    /// `γ(t) = c0 · λ^t`.
    Exponential { c0: f64, lambda: f64 },
    /// `γ(t) = values[t]`, holding the last value beyond the table.
    Tabulated { values: Vec<f64> },
    /// `γ ≡ 0`.
    Zero,
}

impl DecayModel {
    pub fn exponential(c0: f64, lambda: f64) -> Result<Self> {
        let m = DecayModel::Exponential { c0, lambda };
        m.validate()?;
        Ok(m)
    }

    /// `c0 = 4`, `λ` = widest branch.
    pub fn default_for(map: &FullBranchMap) -> Self {
        DecayModel::Exponential {
            c0: 4.0,
            lambda: map.max_width(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DecayModel::Exponential { c0, lambda } => {
                if !(*c0 > 0.0 && *lambda > 0.0 && *lambda < 1.0) {
                    return Err(Error::Precondition(format!(
                        "exponential decay needs c0 > 0 and 0 < lambda < 1, got c0 = {c0}, lambda = {lambda}"
                    )));
                }
            }
            DecayModel::Tabulated { values } => {
                if values.is_empty() || values.iter().any(|v| v.is_nan() || *v < 0.0) {
                    return Err(Error::Precondition(
                        "tabulated decay needs non-negative values".into(),
                    ));
                }
                if values.windows(2).any(|w| w[1] > w[0]) {
                    return Err(Error::Precondition(
                        "tabulated decay must be non-increasing".into(),
                    ));
                }
            }
            DecayModel::Zero => {}
        }
        Ok(())
    }

    pub fn gamma(&self, t: u64) -> f64 {
        match self {
            DecayModel::Exponential { c0, lambda } => c0 * lambda.powf(t as f64),
            DecayModel::Tabulated { values } => values[(t as usize).min(values.len() - 1)],
            DecayModel::Zero => 0.0,
        }
    }

    /// `Σ_{j=from}^{to-1} γ(j)`; zero for an empty range.
    pub fn sum(&self, from: u64, to: u64) -> f64 {
        if from >= to {
            return 0.0;
        }
        match self {
            DecayModel::Exponential { c0, lambda } => {
                c0 * (lambda.powf(from as f64) - lambda.powf(to as f64)) / (1.0 - lambda)
            }
            DecayModel::Tabulated { values } => {
                let last = values.len() as u64 - 1;
                let head: f64 = (from..to.min(last)).map(|j| values[j as usize]).sum();
                let tail_from = from.max(last);
                head + (to - tail_from.min(to)) as f64 * values[last as usize]
            }
            DecayModel::Zero => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub name: String,
    pub value: f64,
}

fn term(name: &str, value: f64) -> Term {
    Term {
        name: name.to_string(),
        value,
    }
}

/// Per-term breakdown of a theorem's error bracket.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub theorem: String,
    pub terms: Vec<Term>,
    pub total: f64,
    /// `kΥ/L` for the hitting-time bracket.
    pub exponent_shift: Option<f64>,
    /// The exponent shift is at least `θ`, so the bracket does not decay.
    pub vacuous: bool,
    /// Intermediate quantities that are not summed.
    pub details: Vec<Term>,
    pub constant: String,
}

impl ErrorBudget {
    fn new(theorem: &str, terms: Vec<Term>) -> Self {
        let total = terms.iter().map(|t| t.value).sum();
        ErrorBudget {
            theorem: theorem.to_string(),
            terms,
            total,
            exponent_shift: None,
            vacuous: false,
            details: Vec::new(),
            constant: "C excluded".to_string(),
        }
    }

    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.name == name).map(|t| t.value)
    }

    pub fn detail(&self, name: &str) -> Option<f64> {
        self.details
            .iter()
            .find(|t| t.name == name)
            .map(|t| t.value)
    }

    /// CSV rows `scale,term,value` including a `total` row.
    pub fn csv_rows(&self, scale: &str) -> String {
        let mut s = String::new();
        for t in &self.terms {
            let _ = writeln!(s, "{scale},{},{:e}", t.name, t.value);
        }
        let _ = writeln!(s, "{scale},total,{:e}", self.total);
        s
    }
}

/// `Ξ_{A,s}`. When `s < R` the two `(s − R)` factors clamp to zero.
pub fn xi(pa: f64, m: f64, s: u64, t: u64, r: u64, gamma: &DecayModel) -> f64 {
    let g = gamma.gamma(t);
    let sr = s.saturating_sub(r) as f64;
    let s = s as f64;
    m * s * g + m * sr * (pa + m * g) * gamma.sum(r, s as u64) + s * sr * (pa * pa + pa * m * g)
}

/// `Υ_A = t (P(A) + M γ(t)) + Ξ_{A,ℓ}`.
pub fn upsilon(pa: f64, m: f64, l: u64, t: u64, r: u64, gamma: &DecayModel) -> f64 {
    t as f64 * (pa + m * gamma.gamma(t)) + xi(pa, m, l, t, r, gamma)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockingParams {
    pub k: u64,
    pub t: u64,
    pub objective: f64,
}

impl BlockingParams {
    /// `ℓ = ⌊n/k⌋ − t`.
    pub fn ell_evl(&self, n: u64) -> i64 {
        (n / self.k) as i64 - self.t as i64
    }

    /// `ℓ = ⌊⌊1/P(B)⌋/k⌋ − t`.
    pub fn ell_hts(&self, pb: f64) -> i64 {
        ((1.0 / pb).floor() as u64 / self.k) as i64 - self.t as i64
    }
}

/// `L = 1 − ℓ P(A)`.
pub fn big_l(ell: i64, pa: f64) -> f64 {
    1.0 - ell as f64 * pa
}

pub fn evl_objective(n: u64, pa: f64, gamma: &DecayModel, k: u64, t: u64) -> f64 {
    let (nf, kf) = (n as f64, k as f64);
    kf * t as f64 * pa + nf * gamma.gamma(t) * (1.0 + nf * pa / kf) + (nf * pa).powi(2) / kf
}

pub fn hts_objective(pb: f64, gamma: &DecayModel, k: u64, t: u64) -> f64 {
    k as f64 * t as f64 * pb + gamma.gamma(t) / pb + 1.0 / k as f64
}

/// Minimises a function that is convex in `k` for each `t` over
/// `1 ≤ k ≤ kmax(t)`, `1 ≤ t ≤ t_max`. Ties go to smaller `t`, then `k`.
fn minimise<F, K>(t_max: u64, kmax: K, k_star: impl Fn(u64) -> f64, f: F) -> Option<BlockingParams>
where
    F: Fn(u64, u64) -> f64,
    K: Fn(u64) -> u64,
{
    let mut best: Option<BlockingParams> = None;
    for t in 1..=t_max {
        let km = kmax(t);
        if km == 0 {
            break;
        }
        let ks = k_star(t);
        let base = if ks.is_finite() {
            ks.floor().clamp(1.0, km as f64) as u64
        } else {
            km
        };
        for k in [base.saturating_sub(1).max(1), base, (base + 1).min(km)] {
            let v = f(k, t);
            let better = match &best {
                None => true,
                Some(b) => v < b.objective || (v == b.objective && (t, k) < (b.t, b.k)),
            };
            if better {
                best = Some(BlockingParams { k, t, objective: v });
            }
        }
    }
    best
}

/// Optimal `(k, t)` with `kt < n` for the sharp extreme-value bracket.
pub fn optimize_kt_evl(n: u64, pa: f64, gamma: &DecayModel) -> Result<BlockingParams> {
    if n < 4 {
        return Err(Error::NoFeasiblePair(format!("n = {n} is below 4")));
    }
    if !(pa > 0.0 && pa < 1.0) {
        return Err(Error::Precondition(format!(
            "P(A) must lie in (0,1), got {pa}"
        )));
    }
    let nf = n as f64;
    let t_max = n - 1;
    minimise(
        t_max,
        |t| (n - 1) / t,
        |t| {
            let b = nf * gamma.gamma(t) * nf * pa + (nf * pa).powi(2);
            (b / (t as f64 * pa)).sqrt()
        },
        |k, t| evl_objective(n, pa, gamma, k, t),
    )
    .ok_or_else(|| Error::NoFeasiblePair(format!("n = {n}")))
}

/// Largest integer strictly below `1/p`.
fn below_inverse(p: f64) -> u64 {
    ((1.0 / p).ceil() as u64).saturating_sub(1)
}

/// Optimal `(k, t)` with `kt < 1/P(B)` for the sharp hitting-time bracket.
pub fn optimize_kt_hts(pb: f64, gamma: &DecayModel) -> Result<BlockingParams> {
    if !(pb > 0.0 && pb < 1.0) {
        return Err(Error::Precondition(format!(
            "P(B) must lie in (0,1), got {pb}"
        )));
    }
    let m = below_inverse(pb);
    minimise(
        m,
        |t| m / t,
        |t| (1.0 / (t as f64 * pb)).sqrt(),
        |k, t| hts_objective(pb, gamma, k, t),
    )
    .ok_or_else(|| Error::NoFeasiblePair(format!("P(B) = {pb}")))
}

/// Brute-force oracle over every feasible pair with `kt ≤ limit`.
pub fn exhaustive_scan<F: Fn(u64, u64) -> f64>(limit: u64, f: F) -> Option<BlockingParams> {
    let mut best: Option<BlockingParams> = None;
    for t in 1..=limit {
        for k in 1..=limit / t {
            let v = f(k, t);
            if best.as_ref().is_none_or(|b| v < b.objective) {
                best = Some(BlockingParams { k, t, objective: v });
            }
        }
    }
    best
}

/// Inputs of the general error bracket for `P(M_n ≤ u_n)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralEvlInput {
    pub tau: f64,
    pub n: u64,
    pub q: usize,
    pub k: u64,
    pub t: u64,
    pub pu: f64,
    pub pa: f64,
    pub gamma_mix: f64,
    pub dprime: f64,
}

impl GeneralEvlInput {
    pub fn theta_n(&self) -> f64 {
        if self.pu > 0.0 {
            self.pa / self.pu
        } else {
            1.0
        }
    }
}

fn general_terms(inp: &GeneralEvlInput, theta: f64) -> Vec<Term> {
    let (tau, n, k) = (inp.tau, inp.n as f64, inp.k as f64);
    let w = (-theta * tau).exp();
    vec![
        term("gap", k * inp.t as f64 * tau / n),
        term("mixing", n * inp.gamma_mix),
        term("recurrence", inp.dprime),
        term("poisson", w * ((tau - n * inp.pu).abs() + tau * tau / k)),
        term("annulus", inp.q as f64 * (inp.pu - inp.pa)),
    ]
}

/// Bracket against `e^{−θ_n τ}`.
pub fn general_evl_bracket(inp: &GeneralEvlInput) -> Result<ErrorBudget> {
    let th = inp.theta_n();
    if !(0.0..=1.0).contains(&th) {
        return Err(Error::Precondition(format!("θ_n = {th} outside [0,1]")));
    }
    let mut b = ErrorBudget::new("general", general_terms(inp, th));
    b.details.push(term("theta_n", th));
    Ok(b)
}

/// Bracket against `e^{−θ τ}` with the extra `|θ_n − θ|` term.
pub fn general_evl_bracket_limit(inp: &GeneralEvlInput, theta: f64) -> Result<ErrorBudget> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::Precondition(format!("θ = {theta} outside [0,1]")));
    }
    let th = inp.theta_n();
    let mut terms = general_terms(inp, theta);
    terms.push(term(
        "index",
        (-theta * inp.tau).exp() * (th - theta).abs() * inp.tau,
    ));
    let mut b = ErrorBudget::new("general-limit", terms);
    b.details.push(term("theta_n", th));
    Ok(b)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharpEvlInput {
    pub tau: f64,
    pub n: u64,
    pub theta: f64,
    pub pa: f64,
    pub k: u64,
    pub t: u64,
    pub r: u64,
}

/// Sharp extreme-value bracket.
pub fn sharp_evl_bracket(inp: &SharpEvlInput, gamma: &DecayModel) -> Result<ErrorBudget> {
    if inp.k == 0 {
        return Err(Error::Precondition("k must be positive".into()));
    }
    let ell = (inp.n / inp.k) as i64 - inp.t as i64;
    if ell < 1 {
        return Err(Error::Precondition(format!("ℓ = ⌊n/k⌋ − t = {ell} < 1")));
    }
    let (n, k) = (inp.n as f64, inp.k as f64);
    let x = inp.theta * inp.tau;
    let w = (-x).exp();
    let terms = vec![
        term("threshold", w * (x - n * inp.pa).abs()),
        term("gap", w * k * inp.t as f64 * x / n),
        term("mixing", w * n * gamma.gamma(inp.t) * (1.0 + x / k)),
        term("poisson", w * x * x / k),
        term("recurrence", w * x * gamma.sum(inp.r, ell as u64)),
    ];
    let mut b = ErrorBudget::new("sharp-evl", terms);
    b.details.push(term("ell", ell as f64));
    Ok(b)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharpHtsInput {
    pub tau: f64,
    pub pb: f64,
    pub pa: f64,
    pub theta: f64,
    pub k: u64,
    pub t: u64,
    pub r: u64,
    pub ell: u64,
    pub m: f64,
}

/// Sharp hitting-time bracket. A shift `kΥ/L ≥ θ` is flagged as vacuous.
pub fn sharp_hts_bracket(inp: &SharpHtsInput, gamma: &DecayModel) -> Result<ErrorBudget> {
    let l = big_l(inp.ell as i64, inp.pa);
    if !(l > 0.0 && l <= 1.0) {
        return Err(Error::Precondition(format!(
            "L = 1 − ℓP(A) = {l} outside (0,1]"
        )));
    }
    if inp.k == 0 || inp.pb.is_nan() || inp.pb <= 0.0 {
        return Err(Error::Precondition("need k > 0 and P(B) > 0".into()));
    }
    let (tau, k) = (inp.tau, inp.k as f64);
    let big_gamma = k * inp.t as f64 * inp.pa
        + gamma.gamma(inp.t) / inp.pb
        + 1.0 / k
        + gamma.sum(inp.r, inp.ell);
    let alpha = (inp.theta - inp.pa / inp.pb + inp.t as f64 * k * inp.pa).abs();
    let ups = upsilon(inp.pa, inp.m, inp.ell, inp.t, inp.r, gamma);
    let shift = k * ups / l;
    let w = (-(inp.theta - shift) * tau).exp();
    let terms = vec![
        term("alpha-gamma", w * tau * tau * alpha * big_gamma),
        term("gamma-blocks", w * tau * tau * big_gamma / k),
        term(
            "alpha-gamma-blocks",
            w * tau.powi(3) * alpha * big_gamma / k,
        ),
    ];
    let mut b = ErrorBudget::new("sharp-hts", terms);
    b.exponent_shift = Some(shift);
    b.vacuous = shift >= inp.theta;
    b.details = vec![
        term("Gamma", big_gamma),
        term("alpha", alpha),
        term("Upsilon", ups),
        term("L", l),
        term("ell", inp.ell as f64),
    ];
    Ok(b)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeWindow {
    pub lower: f64,
    pub nominal: f64,
    pub degenerate: bool,
}

/// `lower = (θ − kΥ/L)·P(B)`, `nominal = θ·P(B)`.
pub fn escape_rate_window(theta: f64, k: u64, ups: f64, l: f64, pb: f64) -> EscapeWindow {
    let shift = k as f64 * ups / l;
    EscapeWindow {
        lower: (theta - shift) * pb,
        nominal: theta * pb,
        degenerate: shift.is_nan() || shift >= theta,
    }
}

/// Block estimate `kΥ(L+Υ)^{k−1}(1+L+Υ)` for `|P(𝒲_{0,n}(A)) − L^k|`.
pub fn block_estimate(k: u64, ups: f64, l: f64) -> f64 {
    k as f64 * ups * (l + ups).powf(k as f64 - 1.0) * (1.0 + l + ups)
}

/// The sharper `5kΥL^{k−1}`, valid when `kΥ < L/2`.
pub fn block_estimate_small(k: u64, ups: f64, l: f64) -> Option<f64> {
    (k as f64 * ups < l / 2.0).then(|| 5.0 * k as f64 * ups * l.powf(k as f64 - 1.0))
}

/// Centre and radius for `P(𝒲_{0,τn}(A))` at fractional times.
pub fn fractional_block_estimate(
    tau: f64,
    k: u64,
    ell: u64,
    pa: f64,
    ups: f64,
    l: f64,
) -> (f64, f64) {
    let tk = tau * k as f64;
    let whole = tk.floor();
    if whole > 0.0 {
        let centre = l.powf(whole);
        (
            centre,
            (3.0 + ups) * tk.ceil() * ups * (l + ups).powf(whole - 1.0),
        )
    } else {
        (1.0 - (tk * ell as f64).floor() * pa, ups)
    }
}

/// `e^x (1 − x²/(2n) + x³(8+3x)/(24n²))` and its distance to `(1+x/n)^n`.
///
/// The defect is summed from the power series of `(1+x/n)^n e^{−x}` in
/// `1/n`, so it keeps full relative accuracy even below `1e-16`.
pub fn exp_approx_error(x: f64, n: u64) -> Result<(f64, f64)> {
    let nf = n as f64;
    if n == 0 || x.abs() >= nf {
        return Err(Error::Precondition(format!(
            "need n ≥ 1 and |x| < n, got x = {x}, n = {n}"
        )));
    }
    let h = 1.0 / nf;
    let approx = x.exp() * (1.0 - x * x * h / 2.0 + x.powi(3) * (8.0 + 3.0 * x) * h * h / 24.0);
    // log((1+xh)^{1/h} e^{−x}) = Σ_{j≥1} d_j h^j with d_j = (−1)^j x^{j+1}/(j+1).
    let terms = 200;
    let d: Vec<f64> = (0..=terms)
        .map(|j| {
            if j == 0 {
                0.0
            } else {
                (-1f64).powi(j as i32) * x.powi(j as i32 + 1) / (j + 1) as f64
            }
        })
        .collect();
    // exp of a power series: e_j = (1/j) Σ_{i=1}^j i d_i e_{j−i}.
    let mut e = vec![0.0; terms + 1];
    e[0] = 1.0;
    for j in 1..=terms {
        e[j] = (1..=j).map(|i| i as f64 * d[i] * e[j - i]).sum::<f64>() / j as f64;
    }
    let mut tail = 0.0;
    let mut hp = h.powi(3);
    for ej in e.iter().skip(3) {
        let add = ej * hp;
        tail += add;
        if add.abs() < 1e-30 * tail.abs().max(1e-300) {
            break;
        }
        hp *= h;
    }
    Ok((approx, x.exp() * tail.abs()))
}

/// Both sides of the balls-versus-annuli comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct AnnuliGap {
    /// `|P(𝒲_{0,n}(B)) − P(𝒲_{0,n}(A))|`.
    pub lhs: Rational,
    /// `Σ_{j=1}^q P(𝒲_{0,n}(A) ∩ T^{−n+j}(B∖A))`.
    pub rhs: Rational,
}

impl AnnuliGap {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }
}

/// Exact comparison for `A = B ∖ ⋃_{j=1}^q T^{−j}B`, `q < n`.
pub fn annuli_gap_bound(
    map: &FullBranchMap,
    b: &IntervalUnion<Rational>,
    q: usize,
    n: usize,
    budget: usize,
) -> Result<AnnuliGap> {
    if q >= n && q > 0 {
        return Err(Error::Precondition(format!(
            "need q < n, got q = {q}, n = {n}"
        )));
    }
    let a = annulus_set(map, b, q)?;
    let wa = survivor_set(map, &a, 0.0, n as f64, budget)?;
    let wb = survivor_set(map, b, 0.0, n as f64, budget)?;
    let lhs = (wb.measure() - wa.measure()).abs();
    let diff = b.difference(&a)?;
    let mut rhs = Rational::zero();
    for j in 1..=q {
        let pre = map.preimage_iter(&diff, n - j)?;
        rhs += wa.intersect(&pre)?.measure();
    }
    Ok(AnnuliGap { lhs, rhs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval::Topology;
    use crate::scalar::ratio;

    fn exp_half() -> DecayModel {
        DecayModel::Exponential {
            c0: 1.0,
            lambda: 0.5,
        }
    }

    #[test]
    fn decay_sums() {
        let g = DecayModel::Exponential {
            c0: 4.0,
            lambda: 0.5,
        };
        let direct: f64 = (3..10).map(|j| g.gamma(j)).sum();
        assert!((g.sum(3, 10) - direct).abs() < 1e-14);
        assert_eq!(g.sum(5, 5), 0.0);
        let t = DecayModel::Tabulated {
            values: vec![1.0, 0.5, 0.25],
        };
        assert_eq!(t.gamma(7), 0.25);
        assert_eq!(t.sum(1, 5), 0.5 + 0.25 * 3.0);
        assert_eq!(t.sum(0, 2), 1.5);
        assert!(DecayModel::exponential(1.0, 1.5).is_err());
        assert!(DecayModel::Tabulated {
            values: vec![0.1, 0.2]
        }
        .validate()
        .is_err());
    }

    #[test]
    fn xi_reductions() {
        let (pa, m, s, t, r) = (1e-3, 4.0, 100, 20, 5);
        assert!((xi(pa, m, s, t, r, &DecayModel::Zero) - 100.0 * 95.0 * pa * pa).abs() < 1e-15);
        let g = exp_half();
        let expect = m * 100.0 * g.gamma(t) + m * m * 95.0 * g.gamma(t) * g.sum(r, s);
        assert!((xi(0.0, m, s, t, r, &g) - expect).abs() < 1e-18);
        // s below R clamps the (s − R) terms
        assert_eq!(xi(pa, m, 3, t, r, &DecayModel::Zero), 0.0);
    }

    #[test]
    fn xi_and_upsilon_regression() {
        // Re-derived by hand, summand by summand:
        //   M s γ(t)                 = 4·100·2^-20
        //   M (s−R)(PA + Mγ(t)) Σγ   = 4·95·(1e-3 + 4·2^-20)·(2^-4 − 2^-99)/(1/2)
        //   s (s−R)(PA² + PA Mγ(t))  = 100·95·(1e-6 + 4e-3·2^-20)
        let g = exp_half();
        let g20 = 2f64.powi(-20);
        let a = 400.0 * g20;
        let b = 380.0 * (1e-3 + 4.0 * g20) * (2f64.powi(-5) - 2f64.powi(-100)) * 2.0;
        let c = 9500.0 * (1e-6 + 4e-3 * g20);
        let v = xi(1e-3, 4.0, 100, 20, 5, &g);
        assert!((v - (a + b + c)).abs() < 1e-15);
        assert!((v - 0.033_758_308_410_644_53).abs() < 1e-12, "{v:.17}");
        let u = upsilon(1e-3, 4.0, 100, 20, 5, &g);
        assert!((u - v - 20.0 * (1e-3 + 4.0 * g20)).abs() < 1e-15);
        assert!((u - 0.053_834_602_355_957_04).abs() < 1e-12, "{u:.17}");
        assert_eq!(
            upsilon(1e-3, 4.0, 100, 0, 5, &DecayModel::Zero),
            xi(1e-3, 4.0, 100, 0, 5, &DecayModel::Zero)
        );
    }

    #[test]
    fn evl_optimizer_matches_scan() {
        for (n, pa, g) in [
            (10_000u64, 1e-4, exp_half()),
            (1000, 1e-3, DecayModel::Zero),
            (
                500,
                3e-3,
                DecayModel::Exponential {
                    c0: 4.0,
                    lambda: 0.5,
                },
            ),
            (
                64,
                0.05,
                DecayModel::Exponential {
                    c0: 4.0,
                    lambda: 0.9,
                },
            ),
        ] {
            let opt = optimize_kt_evl(n, pa, &g).unwrap();
            let scan = exhaustive_scan(n - 1, |k, t| evl_objective(n, pa, &g, k, t)).unwrap();
            assert_eq!((opt.k, opt.t), (scan.k, scan.t), "n = {n}");
            assert!(opt.k * opt.t < n);
        }
        let z = optimize_kt_evl(1000, 1e-3, &DecayModel::Zero).unwrap();
        assert_eq!(z.t, 1);
        assert!(optimize_kt_evl(3, 0.1, &DecayModel::Zero).is_err());
    }

    #[test]
    fn evl_optimum_beats_reference_schedule() {
        let g = DecayModel::Exponential {
            c0: 4.0,
            lambda: 0.5,
        };
        let delta = 0.5;
        for n in [100u64, 1000, 10_000] {
            let pa = 0.75 / n as f64;
            let opt = optimize_kt_evl(n, pa, &g).unwrap();
            let t = (n as f64).powf(1.0 / (1.0 + delta)).round() as u64;
            let k = (n as f64)
                .powf(delta / (2.0 + 2.0 * delta))
                .round()
                .max(1.0) as u64;
            assert!(opt.objective <= evl_objective(n, pa, &g, k, t));
        }
    }

    #[test]
    fn hts_optimizer_matches_scan_and_is_monotone() {
        for (pb, g) in [
            (0.01, exp_half()),
            (0.02, DecayModel::Zero),
            (
                0.003,
                DecayModel::Exponential {
                    c0: 4.0,
                    lambda: 0.5,
                },
            ),
        ] {
            let opt = optimize_kt_hts(pb, &g).unwrap();
            let scan =
                exhaustive_scan(below_inverse(pb), |k, t| hts_objective(pb, &g, k, t)).unwrap();
            assert_eq!((opt.k, opt.t), (scan.k, scan.t), "pb = {pb}");
            assert!(((opt.k * opt.t) as f64) < 1.0 / pb);
        }
        let z = optimize_kt_hts(0.01, &DecayModel::Zero).unwrap();
        assert_eq!(z.t, 1);
        let mut last = f64::INFINITY;
        for pb in [0.1, 0.05, 0.02, 0.01, 0.005, 0.001] {
            let o = optimize_kt_hts(pb, &DecayModel::Zero).unwrap().objective;
            assert!(o <= last);
            last = o;
        }
        assert!(optimize_kt_hts(1.0, &DecayModel::Zero).is_err());
        assert_eq!(below_inverse(0.25), 3);
        assert_eq!(below_inverse(0.3), 3);
    }

    #[test]
    fn general_bracket_reductions() {
        let inp = GeneralEvlInput {
            tau: 1.0,
            n: 1000,
            q: 0,
            k: 10,
            t: 5,
            pu: 1e-3,
            pa: 1e-3,
            gamma_mix: 0.0,
            dprime: 0.0,
        };
        let b = general_evl_bracket(&inp).unwrap();
        let expect = 10.0 * 5.0 / 1000.0 + (-1f64).exp() / 10.0;
        assert!((b.total - expect).abs() < 1e-15);
        assert_eq!(b.term("annulus"), Some(0.0));
        let c = general_evl_bracket_limit(&inp, 1.0).unwrap();
        assert!((c.total - b.total).abs() < 1e-15);
        let zero = GeneralEvlInput {
            tau: 0.0,
            pu: 0.0,
            pa: 0.0,
            gamma_mix: 1e-6,
            dprime: 0.25,
            q: 2,
            ..inp
        };
        let c = general_evl_bracket_limit(&zero, 0.75).unwrap();
        assert!((c.total - (1000.0 * 1e-6 + 0.25)).abs() < 1e-15);
    }

    #[test]
    fn general_bracket_regression() {
        // doubling map, ζ = 1/3, n = 4096, τ = 1, q = 2, exact threshold
        let inp = GeneralEvlInput {
            tau: 1.0,
            n: 4096,
            q: 2,
            k: 8,
            t: 30,
            pu: 1.0 / 4096.0,
            pa: 0.75 / 4096.0,
            gamma_mix: 4.0 * 0.5f64.powi(30),
            dprime: 0.1,
        };
        let b = general_evl_bracket(&inp).unwrap();
        let terms = [
            8.0 * 30.0 / 4096.0,
            4096.0 * 4.0 * 0.5f64.powi(30),
            0.1,
            (-0.75f64).exp() / 8.0,
            2.0 * 0.25 / 4096.0,
        ];
        for (t, v) in b.terms.iter().zip(terms) {
            assert!((t.value - v).abs() < 1e-15, "{}", t.name);
        }
        assert!(
            (b.total - 0.217_776_898_194_189_33).abs() < 1e-12,
            "{:.17}",
            b.total
        );
        let c = general_evl_bracket_limit(
            &GeneralEvlInput {
                pa: 0.7 / 4096.0,
                ..inp
            },
            0.75,
        )
        .unwrap();
        let extra = (-0.75f64).exp() * (0.7f64 - 0.75).abs();
        assert!((c.term("index").unwrap() - extra).abs() < 1e-15);
    }

    #[test]
    fn sharp_evl_reductions() {
        let exact = SharpEvlInput {
            tau: 1.0,
            n: 1 << 14,
            theta: 0.75,
            pa: 0.75 / 16384.0,
            k: 12,
            t: 40,
            r: 14,
        };
        let b = sharp_evl_bracket(&exact, &DecayModel::Zero).unwrap();
        assert!(b.term("threshold").unwrap().abs() < 1e-15);
        let w = (-0.75f64).exp();
        let expect = w * (12.0 * 40.0 * 0.75 / 16384.0 + 0.75 * 0.75 / 12.0);
        assert!((b.total - expect).abs() < 1e-15);
        let g = DecayModel::Exponential {
            c0: 4.0,
            lambda: 0.5,
        };
        let full = sharp_evl_bracket(&exact, &g).unwrap();
        let mixing = w * 16384.0 * 4.0 * 0.5f64.powi(40) * (1.0 + 0.75 / 12.0);
        let rec = w * 0.75 * g.sum(14, 16384 / 12 - 40);
        assert!((full.term("mixing").unwrap() - mixing).abs() < 1e-18);
        assert!((full.term("recurrence").unwrap() - rec).abs() < 1e-15);
        assert!(
            (full.total - 0.032_694_345_760_176_914).abs() < 1e-12,
            "{:.17}",
            full.total
        );
        assert!(sharp_evl_bracket(
            &SharpEvlInput {
                k: 100,
                t: 200,
                ..exact
            },
            &g
        )
        .is_err());
    }

    #[test]
    fn sharp_hts_reductions() {
        let g = DecayModel::Exponential {
            c0: 4.0,
            lambda: 0.5,
        };
        let inp = SharpHtsInput {
            tau: 1.0,
            pb: 0.02,
            pa: 0.015,
            theta: 0.75,
            k: 5,
            t: 4,
            r: 6,
            ell: 6,
            m: 4.0,
        };
        let b = sharp_hts_bracket(&inp, &g).unwrap();
        let gamma_big = 5.0 * 4.0 * 0.015 + g.gamma(4) / 0.02 + 0.2 + g.sum(6, 6);
        let alpha = (0.75f64 - 0.75 + 20.0 * 0.015).abs();
        assert!((b.detail("Gamma").unwrap() - gamma_big).abs() < 1e-12);
        assert!((b.detail("alpha").unwrap() - alpha).abs() < 1e-15);
        let ups = upsilon(0.015, 4.0, 6, 4, 6, &g);
        let l = 1.0 - 6.0 * 0.015;
        assert!((b.exponent_shift.unwrap() - 5.0 * ups / l).abs() < 1e-15);
        assert!(b.vacuous);
        let zero_alpha = SharpHtsInput {
            pa: 0.0,
            pb: 0.02,
            theta: 0.0,
            ..inp
        };
        assert_eq!(
            sharp_hts_bracket(&zero_alpha, &g).unwrap().detail("alpha"),
            Some(0.0)
        );
        assert!(sharp_hts_bracket(
            &SharpHtsInput {
                ell: 100,
                pa: 0.02,
                ..inp
            },
            &g
        )
        .is_err());
    }

    #[test]
    fn brackets_do_not_grow_when_decay_improves() {
        let slow = DecayModel::Exponential {
            c0: 4.0,
            lambda: 0.6,
        };
        let fast = DecayModel::Exponential {
            c0: 4.0,
            lambda: 0.5,
        };
        let e = SharpEvlInput {
            tau: 1.5,
            n: 4096,
            theta: 0.75,
            pa: 0.7 / 4096.0,
            k: 8,
            t: 20,
            r: 12,
        };
        assert!(
            sharp_evl_bracket(&e, &fast).unwrap().total
                <= sharp_evl_bracket(&e, &slow).unwrap().total
        );
        let h = SharpHtsInput {
            tau: 1.0,
            pb: 0.002,
            pa: 0.0015,
            theta: 0.75,
            k: 10,
            t: 12,
            r: 9,
            ell: 38,
            m: 4.0,
        };
        assert!(
            sharp_hts_bracket(&h, &fast).unwrap().total
                <= sharp_hts_bracket(&h, &slow).unwrap().total
        );
    }

    #[test]
    fn escape_window_examples() {
        let w = escape_rate_window(0.5, 3, 0.0, 0.9, 0.02);
        assert_eq!(w.lower, w.nominal);
        assert!((w.nominal - 0.01).abs() < 1e-15);
        let v = escape_rate_window(0.5, 3, 0.01, 0.9, 0.02);
        assert!(v.lower <= v.nominal && !v.degenerate);
        assert!(escape_rate_window(0.5, 3, 0.2, 0.9, 0.02).degenerate);
    }

    #[test]
    fn block_estimates() {
        assert!((block_estimate(2, 0.01, 0.9) - 2.0 * 0.01 * 0.91 * 1.91).abs() < 1e-15);
        assert!(block_estimate_small(2, 0.01, 0.9).is_some());
        assert!(block_estimate_small(100, 0.01, 0.9).is_none());
        let (c, r) = fractional_block_estimate(0.05, 10, 30, 0.01, 0.02, 0.7);
        assert_eq!((c, r), (1.0 - 15.0 * 0.01, 0.02));
        let (c, _) = fractional_block_estimate(0.25, 10, 30, 0.01, 0.02, 0.7);
        assert!((c - 0.49).abs() < 1e-15);
    }

    #[test]
    fn exp_approx_examples() {
        assert_eq!(exp_approx_error(0.0, 10).unwrap(), (1.0, 0.0));
        let a = exp_approx_error(-1.0, 100).unwrap().1;
        let b = exp_approx_error(-1.0, 10).unwrap().1;
        assert!(a < b);
        for x in [-1.5f64, 0.5, 1.0, 2.0] {
            for n in [10u64, 37, 100] {
                let (approx, defect) = exp_approx_error(x, n).unwrap();
                let direct = (n as f64 * (x / n as f64).ln_1p()).exp();
                assert!(
                    ((direct - approx).abs() - defect).abs() < 1e-13,
                    "x {x} n {n}"
                );
            }
        }
        let scaled: Vec<f64> = [10u64, 100, 1000, 10_000]
            .iter()
            .map(|&n| exp_approx_error(1.0, n).unwrap().1 * (n as f64).powi(3))
            .collect();
        let (lo, hi) = scaled
            .iter()
            .fold((f64::MAX, 0f64), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(hi / lo < 2.0);
        assert!(exp_approx_error(5.0, 5).is_err());
    }

    #[test]
    fn annuli_gap_examples() {
        let d = FullBranchMap::doubling();
        let b = IntervalUnion::ball(&ratio(1, 3), &ratio(1, 50), Topology::Circle).unwrap();
        let zero = annuli_gap_bound(&d, &b, 0, 6, 1_000_000).unwrap();
        assert_eq!(zero.rhs, ratio(0, 1));
        assert_eq!(zero.lhs, ratio(0, 1));
        let g = annuli_gap_bound(&d, &b, 2, 10, 1_000_000).unwrap();
        assert!(g.rhs > ratio(0, 1));
        assert!(g.holds());
        // B ∖ A empty when ζ has no early return
        let c = IntervalUnion::ball(&ratio(1, 5), &ratio(1, 1000), Topology::Circle).unwrap();
        assert_eq!(
            annuli_gap_bound(&d, &c, 3, 8, 1_000_000).unwrap().rhs,
            ratio(0, 1)
        );
    }
}
