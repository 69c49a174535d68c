use std::path::Path;

use serde_json::json;

use extremal::bounds::annuli_gap_bound;
use extremal::bounds::{
    big_l, escape_rate_window, general_evl_bracket, general_evl_bracket_limit, optimize_kt_evl,
    optimize_kt_hts, sharp_evl_bracket, sharp_hts_bracket, DecayModel, ErrorBudget,
    GeneralEvlInput, SharpEvlInput, SharpHtsInput,
};
use extremal::config::{MapSpec, RunConfig};
use extremal::dynamics::{
    bv_norm_indicator, pressure as pressure_curve, z_n, FullBranchMap, Potential,
    DEFAULT_PERIOD_CAP,
};
use extremal::experiments::{
    aligned_bins, estimate_escape_rate_hole, estimate_hts, evl_sweep, ulam_escape_oracle, SweepSpec,
};
use extremal::extremes::{
    annulus_set, dprime_sum, first_return_r, theta_limit, theta_n, threshold_for, DprimeRange,
    Observable, ReturnTime, ThetaLimit, DEFAULT_COMPONENT_BUDGET,
};
use extremal::scalar::{format_rational, parse_count_list, rational_to_f64};
use extremal::{IntervalUnion, Rational, Topology};

use crate::output::{f, opt, write, Table};
use crate::{BoundsArgs, CheckArgs, CliError, CommonArgs, PressureArgs, StochasticArgs};

type Res = Result<(), CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn map_spec(s: &str) -> MapSpec {
    if s.contains(',') {
        MapSpec {
            widths: Some(s.split(',').map(|w| w.trim().to_string()).collect()),
            ..Default::default()
        }
    } else {
        MapSpec::builtin(s.trim())
    }
}

fn merge_map(cfg: &mut RunConfig, map: &Option<String>) {
    if let Some(m) = map {
        cfg.map = map_spec(m);
    }
    if cfg.map == MapSpec::default() {
        cfg.map = MapSpec::builtin("doubling");
    }
}

fn merge_common(cfg: &mut RunConfig, a: &CommonArgs) -> Result<(), CliError> {
    merge_map(cfg, &a.map);
    if let Some(z) = &a.zeta {
        cfg.observable.zeta = z.clone();
    }
    if let Some(t) = &a.topology {
        cfg.observable.topology = match t.as_str() {
            "circle" => Topology::Circle,
            "line" => Topology::Line,
            other => return Err(usage(format!("unknown topology {other:?}"))),
        };
    }
    for (dst, src) in [
        (&mut cfg.n, &a.n),
        (&mut cfg.eps, &a.eps),
        (&mut cfg.tau, &a.tau),
    ] {
        if src.is_some() {
            *dst = src.clone();
        }
    }
    if a.q.is_some() {
        cfg.q = a.q;
    }
    if a.no_decay {
        cfg.decay = Some(DecayModel::Zero);
    } else if a.c0.is_some() || a.lambda.is_some() {
        let (c0, lambda) = match &cfg.decay {
            Some(DecayModel::Exponential { c0, lambda }) => (*c0, *lambda),
            _ => {
                let d = DecayModel::default_for(&cfg.map.build()?);
                match d {
                    DecayModel::Exponential { c0, lambda } => (c0, lambda),
                    _ => (4.0, 0.5),
                }
            }
        };
        cfg.decay = Some(DecayModel::exponential(
            a.c0.unwrap_or(c0),
            a.lambda.unwrap_or(lambda),
        )?);
    }
    Ok(())
}

fn merge_stochastic(cfg: &mut RunConfig, a: &StochasticArgs) -> Result<(u64, u64), CliError> {
    merge_common(cfg, &a.common)?;
    if a.trials.is_some() {
        cfg.trials = a.trials.clone();
    }
    if a.seed.is_some() {
        cfg.seed = a.seed;
    }
    if a.bins.is_some() {
        cfg.bins = a.bins;
    }
    let seed = cfg
        .seed
        .ok_or_else(|| usage("--seed is required for Monte-Carlo commands"))?;
    if cfg.trials.is_none() {
        cfg.trials = Some("100000".into());
    }
    let trials = cfg.trial_count()?;
    if trials == 0 {
        return Err(usage("trials must be positive"));
    }
    Ok((trials, seed))
}

struct Setup {
    map: FullBranchMap,
    obs: Observable,
    limit: ThetaLimit,
    q: usize,
    gamma: DecayModel,
}

fn setup(cfg: &mut RunConfig) -> Result<Setup, CliError> {
    let map = cfg.map.build()?;
    let obs = cfg.observable.build()?;
    let limit = theta_limit(&map, &obs.center, DEFAULT_PERIOD_CAP)?;
    let q = cfg.q.unwrap_or(limit.q);
    let gamma = cfg.decay_for(&map)?;
    cfg.decay = Some(gamma.clone());
    Ok(Setup {
        map,
        obs,
        limit,
        q,
        gamma,
    })
}

fn required<T>(v: extremal::Result<Vec<T>>, name: &str) -> Result<Vec<T>, CliError> {
    let v = v?;
    if v.is_empty() {
        return Err(usage(format!("--{name} must list at least one value")));
    }
    Ok(v)
}

fn return_time(
    map: &FullBranchMap,
    a: &IntervalUnion<Rational>,
    horizon: u64,
) -> Result<u64, CliError> {
    if a.is_empty() || horizon == 0 {
        return Ok(horizon.max(1));
    }
    Ok(match first_return_r(map, a, horizon as usize)? {
        ReturnTime::Finite(r) => r as u64,
        ReturnTime::ExceedsHorizon => horizon,
    })
}

fn hole(obs: &Observable, eps: &Rational) -> Result<IntervalUnion<Rational>, CliError> {
    if *eps == Rational::from_integer(0.into()) {
        Ok(IntervalUnion::empty(obs.topology))
    } else {
        Ok(obs.ball_exact(eps)?)
    }
}

pub fn evl(mut cfg: RunConfig, a: &StochasticArgs, out: &Path) -> Res {
    let (trials, seed) = merge_stochastic(&mut cfg, a)?;
    if cfg.n.is_none() {
        cfg.n = Some("1e3,1e4,1e5".into());
    }
    if cfg.tau.is_none() {
        cfg.tau = Some("1".into());
    }
    let s = setup(&mut cfg)?;
    let ns = required(cfg.n_grid(), "n")?;
    let taus = required(cfg.tau_grid(), "tau")?;
    let mut table = Table::new(&[
        "scale",
        "estimate",
        "ci_half",
        "limit",
        "deviation",
        "bracket",
        "ratio",
        "seed",
        "tau",
        "k",
        "t",
        "r",
        "theta_n",
    ]);
    for (j, tau) in taus.iter().enumerate() {
        if *tau <= Rational::from_integer(0.into()) {
            return Err(usage(format!(
                "tau must be positive, got {}",
                format_rational(tau)
            )));
        }
        let spec = SweepSpec {
            map: &s.map,
            obs: &s.obs,
            tau: tau.clone(),
            q: Some(s.q),
            trials,
            seed: seed.wrapping_add((j * ns.len()) as u64),
            gamma: s.gamma.clone(),
        };
        for row in evl_sweep(&spec, &ns)? {
            table.push(vec![
                format!("{}", row.scale as u64),
                f(row.estimate),
                f(row.ci_half),
                f(row.limit),
                f(row.deviation),
                opt(row.bracket),
                opt(row.ratio),
                row.seed.to_string(),
                format_rational(tau),
                row.k.to_string(),
                row.t.to_string(),
                row.r.to_string(),
                f(row.theta_n),
            ]);
        }
    }
    let detail = json!({ "theta": format_rational(&s.limit.theta), "q": s.q });
    write(out, "evl", &cfg, &table, &detail)
}

pub fn hts(mut cfg: RunConfig, a: &StochasticArgs, out: &Path) -> Res {
    let (trials, seed) = merge_stochastic(&mut cfg, a)?;
    if cfg.tau.is_none() {
        cfg.tau = Some("0,1/2,1,2".into());
    }
    let s = setup(&mut cfg)?;
    let eps = required(cfg.eps_grid(), "eps")?;
    let taus: Vec<f64> = required(cfg.tau_grid(), "tau")?
        .iter()
        .map(rational_to_f64)
        .collect();
    let theta = rational_to_f64(&s.limit.theta);
    let mut table = Table::new(&[
        "scale",
        "estimate",
        "ci_half",
        "limit",
        "deviation",
        "bracket",
        "ratio",
        "seed",
        "tau",
        "ci_lo",
        "ci_hi",
        "censored",
        "k",
        "t",
        "r",
        "vacuous",
    ]);
    for (i, e) in eps.iter().enumerate() {
        let sd = seed.wrapping_add(i as u64);
        let ecdf = estimate_hts(&s.map, &s.obs.center, e, s.obs.topology, &taus, trials, sd)?;
        let inp = hts_input(&s, &s.obs.ball_exact(e)?)?;
        for (j, &tau) in taus.iter().enumerate() {
            let limit = (-theta * tau).exp();
            let deviation = (ecdf.estimates[j] - limit).abs();
            let budget = match &inp {
                Some(inp) if tau > 0.0 => {
                    sharp_hts_bracket(&SharpHtsInput { tau, ..inp.clone() }, &s.gamma).ok()
                }
                _ => None,
            };
            let bracket = budget.as_ref().map(|b| b.total);
            table.push(vec![
                format_rational(e),
                f(ecdf.estimates[j]),
                f(ecdf.half_widths[j]),
                f(limit),
                f(deviation),
                opt(bracket),
                opt(bracket.map(|b| deviation / b)),
                sd.to_string(),
                f(tau),
                f(ecdf.lower[j]),
                f(ecdf.upper[j]),
                ecdf.censored.to_string(),
                inp.as_ref().map_or("NA".into(), |p| p.k.to_string()),
                inp.as_ref().map_or("NA".into(), |p| p.t.to_string()),
                inp.as_ref().map_or("NA".into(), |p| p.r.to_string()),
                budget.map_or("NA".into(), |b| b.vacuous.to_string()),
            ]);
        }
    }
    write(
        out,
        "hts",
        &cfg,
        &table,
        &json!({ "theta": format_rational(&s.limit.theta) }),
    )
}

/// Hitting-time bracket inputs at `τ = 1` with optimizer-chosen `(k, t)`;
/// `None` when no admissible block length exists.
fn hts_input(s: &Setup, b: &IntervalUnion<Rational>) -> Result<Option<SharpHtsInput>, CliError> {
    let pb = rational_to_f64(&b.measure());
    if pb <= 0.0 {
        return Ok(None);
    }
    let a_set = annulus_set(&s.map, b, s.q)?;
    let pa = rational_to_f64(&a_set.measure());
    let Ok(bp) = optimize_kt_hts(pb, &s.gamma) else {
        return Ok(None);
    };
    let ell = bp.ell_hts(pb);
    if ell < 1 || pa <= 0.0 || big_l(ell, pa) <= 0.0 {
        return Ok(None);
    }
    let r = return_time(&s.map, &a_set, ell as u64)?;
    Ok(Some(SharpHtsInput {
        tau: 1.0,
        pb,
        pa,
        theta: rational_to_f64(&s.limit.theta),
        k: bp.k,
        t: bp.t,
        r,
        ell: ell as u64,
        m: bv_norm_indicator(&a_set),
    }))
}

pub fn escape(mut cfg: RunConfig, a: &StochasticArgs, out: &Path) -> Res {
    let (trials, seed) = merge_stochastic(&mut cfg, a)?;
    let s = setup(&mut cfg)?;
    let eps = required(cfg.eps_grid(), "eps")?;
    let min_bins = cfg.bins.unwrap_or(64);
    let theta = rational_to_f64(&s.limit.theta);
    let mut table = Table::new(&[
        "scale",
        "hole_measure",
        "rate",
        "rate_over_pb",
        "oracle_rate",
        "oracle_bins",
        "window_lower",
        "window_nominal",
        "degenerate",
        "fit_from",
        "fit_to",
        "residual",
        "censored",
        "seed",
    ]);
    let mut fits = Vec::new();
    for (i, e) in eps.iter().enumerate() {
        let sd = seed.wrapping_add(i as u64);
        let h = hole(&s.obs, e)?;
        let fit = estimate_escape_rate_hole(&s.map, &h, theta, trials, sd)?;
        let pb = rational_to_f64(&h.measure());
        let bins = aligned_bins(&h, min_bins)?;
        let oracle = ulam_escape_oracle(&s.map, &h, bins)?;
        let mut window = None;
        if let Some(inp) = hts_input(&s, &h)? {
            if let Ok(b) = sharp_hts_bracket(&inp, &s.gamma) {
                let (ups, l) = (
                    b.detail("Upsilon").unwrap_or(f64::NAN),
                    b.detail("L").unwrap_or(f64::NAN),
                );
                window = Some(escape_rate_window(theta, inp.k, ups, l, pb));
            }
        }
        table.push(vec![
            format_rational(e),
            f(pb),
            f(fit.slope),
            if pb > 0.0 {
                f(fit.slope / pb)
            } else {
                "NA".into()
            },
            f(oracle.rate),
            oracle.bins.to_string(),
            opt(window.as_ref().map(|w| w.lower)),
            opt(window.as_ref().map(|w| w.nominal)),
            window
                .as_ref()
                .map_or("NA".into(), |w| w.degenerate.to_string()),
            fit.window.0.to_string(),
            fit.window.1.to_string(),
            f(fit.residual),
            fit.censored.to_string(),
            sd.to_string(),
        ]);
        fits.push(
            json!({ "eps": format_rational(e), "fit": fit, "oracle": oracle, "window": window }),
        );
    }
    write(out, "escape", &cfg, &table, &fits)
}

pub fn ei(mut cfg: RunConfig, a: &CommonArgs, out: &Path) -> Res {
    merge_common(&mut cfg, a)?;
    if cfg.eps.is_none() && cfg.n.is_none() {
        cfg.eps = Some("1/10,1/100,1/1000".into());
    }
    if cfg.n.is_some() && cfg.tau.is_none() {
        cfg.tau = Some("1".into());
    }
    let s = setup(&mut cfg)?;
    let mut balls = Vec::new();
    for e in cfg.eps_grid().unwrap_or_default() {
        balls.push((format_rational(&e), "eps", s.obs.ball_exact(&e)?));
    }
    if cfg.n.is_some() {
        let taus = required(cfg.tau_grid(), "tau")?;
        for n in required(cfg.n_grid(), "n")? {
            for tau in &taus {
                let sched = threshold_for(&s.obs, n, tau)?;
                balls.push((n.to_string(), "n", s.obs.ball_exact(&sched.radius)?));
            }
        }
    }
    let mut table = Table::new(&[
        "scale",
        "grid",
        "q",
        "p_u",
        "p_a",
        "theta_n",
        "theta_n_float",
        "theta_limit",
    ]);
    for (scale, grid, u) in &balls {
        let a_set = annulus_set(&s.map, u, s.q)?;
        let th = theta_n(&s.map, u, s.q)?;
        table.push(vec![
            scale.clone(),
            grid.to_string(),
            s.q.to_string(),
            format_rational(&u.measure()),
            format_rational(&a_set.measure()),
            format_rational(&th),
            f(rational_to_f64(&th)),
            format_rational(&s.limit.theta),
        ]);
    }
    let detail = json!({
        "period": s.limit.q,
        "theta": format_rational(&s.limit.theta),
        "multiplier": s.limit.multiplier.as_ref().map(format_rational),
    });
    write(out, "ei", &cfg, &table, &detail)
}

fn push_budget(table: &mut Table, scale: &str, b: &ErrorBudget, k: u64, t: u64, r: u64) {
    let row = |kind: &str, name: &str, v: f64| {
        vec![
            scale.to_string(),
            b.theorem.clone(),
            k.to_string(),
            t.to_string(),
            r.to_string(),
            kind.into(),
            name.into(),
            f(v),
        ]
    };
    for term in &b.terms {
        table.push(row("term", &term.name, term.value));
    }
    table.push(row("total", "total", b.total));
    for d in &b.details {
        table.push(row("detail", &d.name, d.value));
    }
    if let Some(shift) = b.exponent_shift {
        table.push(row("detail", "exponent_shift", shift));
        table.push(row("detail", "vacuous", if b.vacuous { 1.0 } else { 0.0 }));
    }
}

/// Largest short-range sum computed exactly before the general bracket is skipped.
const DPRIME_LIMIT: u64 = 2048;

pub fn bounds(mut cfg: RunConfig, a: &BoundsArgs, out: &Path) -> Res {
    merge_common(&mut cfg, &a.common)?;
    if cfg.n.is_none() && cfg.eps.is_none() {
        cfg.n = Some("1e3,1e4,1e5".into());
    }
    if cfg.tau.is_none() {
        cfg.tau = Some("1".into());
    }
    let s = setup(&mut cfg)?;
    let theta = rational_to_f64(&s.limit.theta);
    let taus = required(cfg.tau_grid(), "tau")?;
    if taus.len() != 1 {
        return Err(usage("bounds takes a single tau"));
    }
    let tau_r = &taus[0];
    let tau = rational_to_f64(tau_r);
    let mut table = Table::new(&["scale", "theorem", "k", "t", "r", "kind", "name", "value"]);
    let mut budgets = Vec::new();
    for n in cfg.n_grid().unwrap_or_default() {
        let sched = threshold_for(&s.obs, n, tau_r)?;
        let u = s.obs.ball_exact(&sched.radius)?;
        let a_set = annulus_set(&s.map, &u, s.q)?;
        let pa = rational_to_f64(&a_set.measure());
        let pu = rational_to_f64(&sched.p);
        let bp = optimize_kt_evl(n, pa, &s.gamma)?;
        let ell = bp.ell_evl(n).max(0) as u64;
        let r = return_time(&s.map, &a_set, ell)?;
        let scale = n.to_string();
        let b31 = sharp_evl_bracket(
            &SharpEvlInput {
                tau,
                n,
                theta,
                pa,
                k: bp.k,
                t: bp.t,
                r,
            },
            &s.gamma,
        )?;
        push_budget(&mut table, &scale, &b31, bp.k, bp.t, r);
        budgets.push(json!({ "n": n, "k": bp.k, "t": bp.t, "r": r, "budget": b31 }));
        let (_, hi) = DprimeRange::Theorem.bounds(n, s.q, bp.k);
        if hi <= DPRIME_LIMIT {
            let dp = rational_to_f64(&dprime_sum(
                &s.map,
                &a_set,
                n,
                s.q,
                bp.k,
                DprimeRange::Theorem,
            )?);
            let inp = GeneralEvlInput {
                tau,
                n,
                q: s.q,
                k: bp.k,
                t: bp.t,
                pu,
                pa,
                gamma_mix: s.gamma.gamma(bp.t),
                dprime: dp,
            };
            let b21 = general_evl_bracket(&inp)?;
            push_budget(&mut table, &scale, &b21, bp.k, bp.t, r);
            let b22 = general_evl_bracket_limit(&inp, theta)?;
            push_budget(&mut table, &scale, &b22, bp.k, bp.t, r);
            budgets.push(json!({ "n": n, "general": b21, "corollary": b22 }));
        }
    }
    for e in cfg.eps_grid().unwrap_or_default() {
        let b = s.obs.ball_exact(&e)?;
        let inp = hts_input(&s, &b)?.ok_or_else(|| {
            usage(format!(
                "eps = {}: no admissible block length",
                format_rational(&e)
            ))
        })?;
        let b32 = sharp_hts_bracket(&SharpHtsInput { tau, ..inp.clone() }, &s.gamma)?;
        push_budget(&mut table, &format_rational(&e), &b32, inp.k, inp.t, inp.r);
        budgets.push(json!({ "eps": format_rational(&e), "k": inp.k, "t": inp.t, "r": inp.r, "budget": b32 }));
    }
    write(out, "bounds", &cfg, &table, &budgets)
}

pub fn check(mut cfg: RunConfig, a: &CheckArgs, out: &Path) -> Res {
    merge_common(&mut cfg, &a.common)?;
    if cfg.n.is_none() {
        cfg.n = Some("256,1024,4096,16384".into());
    }
    if cfg.eps.is_none() {
        cfg.eps = Some("1/50".into());
    }
    let s = setup(&mut cfg)?;
    let mut dtable = Table::new(&["n", "k", "q", "range", "value", "value_float"]);
    let sched_tau = cfg
        .tau_grid()
        .ok()
        .and_then(|t| t.first().cloned())
        .unwrap_or_else(|| Rational::from_integer(1.into()));
    for n in required(cfg.n_grid(), "n")? {
        let k = (n as f64).powf(0.25).ceil() as u64;
        let sched = threshold_for(&s.obs, n, &sched_tau)?;
        let u = s.obs.ball_exact(&sched.radius)?;
        let a_set = annulus_set(&s.map, &u, s.q)?;
        for (name, range) in [
            ("theorem", DprimeRange::Theorem),
            ("corollary", DprimeRange::Corollary),
        ] {
            let v = dprime_sum(&s.map, &a_set, n, s.q, k, range)?;
            dtable.push(vec![
                n.to_string(),
                k.to_string(),
                s.q.to_string(),
                name.into(),
                format_rational(&v),
                f(rational_to_f64(&v)),
            ]);
        }
    }
    write(
        out,
        "check-dprime",
        &cfg,
        &dtable,
        &json!({ "tau": format_rational(&sched_tau) }),
    )?;

    let small = parse_count_list(&a.small_n)?;
    let mut gtable = Table::new(&["eps", "n", "q", "lhs", "rhs", "holds"]);
    let mut violations = Vec::new();
    for e in required(cfg.eps_grid(), "eps")? {
        let b = s.obs.ball_exact(&e)?;
        for &n in &small {
            #[allow(unused_mut)]
            let mut gap = annuli_gap_bound(&s.map, &b, s.q, n as usize, DEFAULT_COMPONENT_BUDGET)?;
            #[cfg(feature = "fault-injection")]
            if a.inject_fault {
                gap.lhs = &gap.rhs + Rational::new(1.into(), 1000.into());
            }
            let holds = gap.holds();
            if !holds {
                violations.push(format!("eps = {}, n = {n}", format_rational(&e)));
            }
            gtable.push(vec![
                format_rational(&e),
                n.to_string(),
                s.q.to_string(),
                format_rational(&gap.lhs),
                format_rational(&gap.rhs),
                holds.to_string(),
            ]);
        }
    }
    write(
        out,
        "check-annuli",
        &cfg,
        &gtable,
        &json!({ "violations": violations }),
    )?;
    if violations.is_empty() {
        Ok(())
    } else {
        Err(CliError::Violation(format!(
            "annulus domination fails at {}",
            violations.join("; ")
        )))
    }
}

fn parse_potential(s: &str) -> Result<Potential, CliError> {
    let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
    match kind {
        "geometric" => Ok(Potential::Geometric),
        "constant" => rest
            .parse()
            .map(|value| Potential::Constant { value })
            .map_err(|_| usage(format!("bad constant potential {rest:?}"))),
        "tabulated" => rest
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map(|values| Potential::Tabulated { values })
            .map_err(|_| usage(format!("bad tabulated potential {rest:?}"))),
        other => Err(usage(format!("unknown potential {other:?}"))),
    }
}

pub fn pressure(mut cfg: RunConfig, a: &PressureArgs, out: &Path) -> Res {
    merge_map(&mut cfg, &a.map);
    if let Some(p) = &a.potential {
        cfg.potential = Some(parse_potential(p)?);
    }
    if a.n_max.is_some() {
        cfg.n_max = a.n_max;
    }
    let potential = cfg.potential.clone().unwrap_or(Potential::Geometric);
    cfg.potential = Some(potential.clone());
    let n_max = *cfg.n_max.get_or_insert(10);
    let map = cfg.map.build()?;
    let p = pressure_curve(&map, &potential, n_max, DEFAULT_PERIOD_CAP)?;
    let mut table = Table::new(&["n", "z_n", "pressure_n"]);
    for (i, pn) in p.iter().enumerate() {
        let n = i + 1;
        table.push(vec![
            n.to_string(),
            f(z_n(&map, &potential, n, DEFAULT_PERIOD_CAP)?),
            f(*pn),
        ]);
    }
    write(
        out,
        "pressure",
        &cfg,
        &table,
        &json!({ "variation": potential.variation(n_max) }),
    )
}
