use std::sync::Arc;

use super::{estimate_of, path_summaries, run_paths, CheckItem, CheckReport, McConfig, McEstimate, PathSummary, Relation, Scenario};
use crate::domain::{Domain, SubdomainFamily};
use crate::error::{Error, Result};
use crate::fd::{solve, Lattice, SolveOptions, ValueField};
use crate::game::{control_triples, min_cost, GameSpec};
use crate::isaacs::{apply_l, bar_l_apply, FieldDerivatives};
use crate::sde::{ParamProcessRule, StopRule};
use crate::stats::{ks_two_sample, mean_stderr};
use crate::strategy::{AlphaPlay, AlphaResponse, Strategy};

/// Mean payoff against a reference value, optionally with a cap on the
/// standard error.
pub fn value_check(sc: &Scenario, cfg: &McConfig, reference: f64, max_stderr: Option<f64>) -> Result<CheckReport> {
    let s = path_summaries(sc, cfg)?;
    let est = estimate_of(&s.iter().map(|p| p.payoff).collect::<Vec<_>>(), &s);
    let mut items = vec![CheckItem::eq("value", est.mean, est.stderr, reference, 0.0)];
    if let Some(m) = max_stderr {
        items.push(CheckItem::new("stderr", est.stderr, 0.0, Relation::Le, m, 0.0));
    }
    Ok(CheckReport::new("value", items).with_run(cfg, est.n_paths, est.cap_fraction, true))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MartingaleKind {
    Super,
    Sub,
}

/// `κ_t = u(x_{t∧τ})e^{-φ} + ∫f e^{-φ} ∓ (ε/δ₁)∫e^{-φ}` at `0` and each
/// checkpoint; consecutive differences must have mean `≤ 0` (super) or
/// `≥ 0` (sub) within 3·stderr. Paths are simulated only up to the last
/// checkpoint, so the cap guard does not apply.
fn martingale_check(
    kind: MartingaleKind,
    sc: &Scenario,
    cfg: &McConfig,
    u: &ValueField,
    eps: f64,
    checkpoints: &[f64],
) -> Result<CheckReport> {
    let mut times = vec![0.0];
    times.extend(checkpoints.iter().copied().filter(|&t| t > 0.0));
    if times.windows(2).any(|w| !(w[1] > w[0])) || times.len() < 2 {
        return Err(Error::usage("checkpoints must be positive and increasing"));
    }
    let mut cfg = cfg.clone();
    cfg.t_cap = Some(*times.last().expect("nonempty"));
    let rate = match kind {
        MartingaleKind::Super => -eps / sc.spec.delta1,
        MartingaleKind::Sub => eps / sc.spec.delta1,
    };
    let rows = run_paths(sc, &cfg, |p| {
        let idx: Vec<usize> = times.iter().map(|&t| StopRule::FixedTime { t }.stop_index(p)).collect();
        let mut kappa = Vec::with_capacity(times.len());
        let mut integral = 0.0;
        let mut j = 0;
        for &k in &idx {
            while j < k {
                let w = (-p.phi[j]).exp() * (p.times[j + 1] - p.times[j]);
                integral += (p.running[j] + rate) * w;
                j += 1;
            }
            kappa.push(u.value_at(p.state(k)) * (-p.phi[k]).exp() + integral);
        }
        kappa
    })?;
    let mut items = Vec::new();
    for w in 1..times.len() {
        let d: Vec<f64> = rows.iter().map(|r| r[w] - r[w - 1]).collect();
        let (m, se) = mean_stderr(&d);
        let label = format!("k({}) - k({})", times[w], times[w - 1]);
        items.push(match kind {
            MartingaleKind::Super => CheckItem::le(label, m, se, 0.0),
            MartingaleKind::Sub => CheckItem::ge(label, m, se, 0.0),
        });
    }
    let name = match kind {
        MartingaleKind::Super => "supermartingale",
        MartingaleKind::Sub => "submartingale",
    };
    Ok(CheckReport::new(name, items).with_run(&cfg, rows.len(), 0.0, false))
}

pub fn supermartingale_check(sc: &Scenario, cfg: &McConfig, u: &ValueField, eps: f64, checkpoints: &[f64]) -> Result<CheckReport> {
    martingale_check(MartingaleKind::Super, sc, cfg, u, eps, checkpoints)
}

pub fn submartingale_check(sc: &Scenario, cfg: &McConfig, u: &ValueField, eps: f64, checkpoints: &[f64]) -> Result<CheckReport> {
    martingale_check(MartingaleKind::Sub, sc, cfg, u, eps, checkpoints)
}

/// Calibrates `N = sup E τ` over a grid of starting points and all constant
/// control pairs.
fn calibrate(sc: &Scenario, cfg: &McConfig, per_axis: usize, stat: &(dyn Fn(&crate::sde::PathRecord) -> f64 + Sync)) -> Result<f64> {
    let (na, nb) = (sc.spec.controls.n_alpha(), sc.spec.controls.n_beta());
    let mut best = f64::NEG_INFINITY;
    for x in sc.dom.interior_samples(per_axis) {
        for i in 0..na {
            for j in 0..nb {
                let cal = Scenario {
                    x0: x.clone(),
                    alpha: AlphaPlay::constant(i),
                    beta: Strategy::Constant(j),
                    ..sc.clone()
                };
                let xs = run_paths(&cal, cfg, stat)?;
                best = best.max(mean_stderr(&xs).0);
            }
        }
    }
    Ok(best)
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Moments of `X` against `n!·Mⁿ` with `M` the larger of the calibrated
/// supremum and the scenario's own mean.
fn moment_items(name: &str, xs: &[f64], m_cal: f64, max_power: u32) -> (Vec<CheckItem>, f64) {
    let (m1, _) = mean_stderr(xs);
    let big = m_cal.max(m1);
    let mut items = Vec::new();
    for n in 1..=max_power {
        let pow: Vec<f64> = xs.iter().map(|x| x.powi(n as i32)).collect();
        let (m, se) = mean_stderr(&pow);
        let bound = factorial(n) * big.powi(n as i32);
        let rel = if m > 0.0 { se / m } else { 0.0 };
        items.push(CheckItem::new(format!("E {name}^{n}"), m, se, Relation::Le, bound, 3.0 * rel * bound));
    }
    (items, big)
}

/// Exit-time moments `E τⁿ ≤ n!Nⁿ`, `n ≤ max_power ≤ 4`.
pub fn moment_check(sc: &Scenario, cfg: &McConfig, max_power: u32, calib_paths: usize, per_axis: usize) -> Result<CheckReport> {
    if !(1..=4).contains(&max_power) {
        return Err(Error::usage("max_power must lie in 1..=4"));
    }
    let s = path_summaries(sc, cfg)?;
    let taus: Vec<f64> = s.iter().map(|p| p.tau).collect();
    let cal_cfg = McConfig {
        n_paths: calib_paths,
        ..cfg.clone()
    };
    let n_cal = calibrate(sc, &cal_cfg, per_axis, &|p| p.tau)?;
    let (items, n) = moment_items("tau", &taus, n_cal, max_power);
    let est = estimate_of(&taus, &s);
    Ok(CheckReport::new("moments", items)
        .with_run(cfg, est.n_paths, est.cap_fraction, true)
        .note(format!("N = {n:.6e}")))
}

/// `‖h‖_{L_d(D)}` by the midpoint rule on the bounding box.
fn ld_norm(dom: &Domain, h: &(dyn Fn(&[f64]) -> f64 + Sync)) -> f64 {
    let d = dom.dim();
    let (lo, hi) = dom.bounding_box();
    let m = (4096f64.powf(1.0 / d as f64).round() as usize).max(4);
    let cell: f64 = lo.iter().zip(&hi).map(|(l, u)| (u - l) / m as f64).product();
    let mut acc = 0.0;
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0; d];
    loop {
        for i in 0..d {
            x[i] = lo[i] + (idx[i] as f64 + 0.5) * (hi[i] - lo[i]) / m as f64;
        }
        if dom.contains(&x) {
            acc += h(&x).abs().powi(d as i32);
        }
        let mut k = 0;
        while k < d {
            idx[k] += 1;
            if idx[k] < m {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == d {
            break;
        }
    }
    (acc * cell).powf(1.0 / d as f64)
}

/// Moments of the occupation integral `∫₀^τ |h(x)|dt` against
/// `n!(N_h‖h‖)ⁿ`, with `N_h` calibrated like `N` in [`moment_check`].
pub fn occupation_check(
    sc: &Scenario,
    cfg: &McConfig,
    h: &(dyn Fn(&[f64]) -> f64 + Sync),
    max_power: u32,
    calib_paths: usize,
    per_axis: usize,
) -> Result<CheckReport> {
    if !(1..=4).contains(&max_power) {
        return Err(Error::usage("max_power must lie in 1..=4"));
    }
    let occ = |p: &crate::sde::PathRecord| -> f64 { (0..p.n_steps()).map(|k| h(p.state(k)).abs() * (p.times[k + 1] - p.times[k])).sum() };
    let rows = run_paths(sc, cfg, |p| (occ(p), p.capped))?;
    let xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let capped = rows.iter().filter(|r| r.1).count();
    let norm = ld_norm(&sc.dom, h);
    let m_cal = if norm > 0.0 {
        calibrate(sc, &McConfig { n_paths: calib_paths, ..cfg.clone() }, per_axis, &occ)?
    } else {
        0.0
    };
    let (items, m) = moment_items("occupation", &xs, m_cal, max_power);
    let est = McEstimate::from_samples(&xs, capped);
    let n_h = if norm > 0.0 { m / norm } else { 0.0 };
    Ok(CheckReport::new("occupation", items)
        .with_run(cfg, est.n_paths, est.cap_fraction, true)
        .note(format!("||h|| = {norm:.6e}, N_h = {n_h:.6e}")))
}

/// Tail payoffs `E∫_{τ_n}^τ |f|e^{-φ}dt` against `sup Φ` over the part of
/// `∂D_n` inside `D`.
pub fn localization_check(
    sc: &Scenario,
    cfg: &McConfig,
    family: &SubdomainFamily,
    phi: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> Result<CheckReport> {
    let members = family.members();
    let parent = family.parent();
    let tol = 1e-9 * parent.diameter();
    let bounds: Vec<f64> = members
        .iter()
        .map(|m| {
            m.boundary_samples(256)
                .into_iter()
                .filter(|x| parent.signed_distance(x) < -tol)
                .map(|x| phi(&x))
                .fold(0.0, f64::max)
        })
        .collect();
    let rows = run_paths(sc, cfg, |p| {
        let tails: Vec<f64> = members
            .iter()
            .map(|m| {
                let k = StopRule::ExitSubdomain { domain: m.clone() }.stop_index(p);
                (k..p.n_steps())
                    .map(|j| p.running[j].abs() * (-p.phi[j]).exp() * (p.times[j + 1] - p.times[j]))
                    .sum()
            })
            .collect();
        (tails, p.capped)
    })?;
    let capped = rows.iter().filter(|r| r.1).count();
    let items = members
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let xs: Vec<f64> = rows.iter().map(|r| r.0[k]).collect();
            let (mean, se) = mean_stderr(&xs);
            CheckItem::le(format!("tail {m}"), mean, se, bounds[k])
        })
        .collect();
    Ok(CheckReport::new("localization", items).with_run(cfg, rows.len(), capped as f64 / rows.len() as f64, true))
}

/// Solves on each `D_n` (data `g` outside `D_n`) and compares with the
/// solve on `D` in the sup norm over the nodes of `D`. Passes iff the gaps
/// are nonincreasing and the last is `≤ tol`.
pub fn exhaustion_check(
    spec: &GameSpec,
    dom: &Domain,
    family: &SubdomainFamily,
    h: f64,
    opts: &SolveOptions,
    tol: f64,
) -> Result<CheckReport> {
    let full_lat = Arc::new(Lattice::new(dom.clone(), h)?);
    let (v, _) = solve(spec, full_lat.clone(), opts)?;
    let nodes: Vec<Vec<f64>> = (0..full_lat.n_nodes())
        .filter(|&k| full_lat.is_valid(k))
        .map(|k| full_lat.coord(k))
        .collect();
    let mut gaps = Vec::new();
    for m in family.members() {
        let (vn, _) = solve(spec, Arc::new(Lattice::new(m, h)?), opts)?;
        let gap = nodes.iter().map(|x| (vn.value_at(x) - v.value_at(x)).abs()).fold(0.0, f64::max);
        gaps.push(gap);
    }
    let mut items = Vec::new();
    for (k, &g) in gaps.iter().enumerate() {
        let label = format!("kappa[{k}]");
        items.push(match k {
            0 => CheckItem::new(label, g, 0.0, Relation::Le, f64::INFINITY, 0.0),
            _ => CheckItem::new(label, g, 0.0, Relation::Le, gaps[k - 1], 0.0),
        });
    }
    if let Some(&last) = gaps.last() {
        items.push(CheckItem::new("final gap", last, 0.0, Relation::Le, tol, 0.0));
    }
    Ok(CheckReport::new("exhaustion", items))
}

/// Pairwise agreement of the value across parameter rules, plus a
/// two-sample KS test against the first rule for every pure rotation.
pub fn p_invariance_check(sc: &Scenario, cfg: &McConfig, rules: &[ParamProcessRule], allowance: f64) -> Result<CheckReport> {
    let runs: Vec<Vec<PathSummary>> = rules
        .iter()
        .map(|r| path_summaries(&sc.clone().with_rule(r.clone()), cfg))
        .collect::<Result<_>>()?;
    let pays: Vec<Vec<f64>> = runs.iter().map(|s| s.iter().map(|p| p.payoff).collect()).collect();
    let ests: Vec<McEstimate> = pays.iter().zip(&runs).map(|(x, s)| estimate_of(x, s)).collect();
    let mut items = Vec::new();
    for i in 0..rules.len() {
        for j in (i + 1)..rules.len() {
            let se = ests[i].stderr.hypot(ests[j].stderr);
            items.push(CheckItem::new(
                format!("mean[{i}] - mean[{j}]"),
                ests[i].mean - ests[j].mean,
                se,
                Relation::Eq,
                0.0,
                3.0 * se + allowance,
            ));
        }
    }
    for (k, r) in rules.iter().enumerate().skip(1) {
        if let ParamProcessRule::TimeChangeRotation(p) = r {
            if p.scale == 1.0 {
                let ks = ks_two_sample(&pays[0], &pays[k]);
                items.push(CheckItem::new(format!("ks p-value [0] vs [{k}]"), ks.p_value, 0.0, Relation::Ge, 0.01, 0.0));
            }
        }
    }
    let cap = ests.iter().map(|e| e.cap_fraction).fold(0.0, f64::max);
    let n = ests.first().map_or(0, |e| e.n_paths);
    Ok(CheckReport::new("p_invariance", items).with_run(cfg, n, cap, true))
}

/// Max relative defect of `L^{αβ}u(p, x) = r^{αβ}(p, x)·L̄^{αβ}u(x)` over
/// every control triple and sample.
pub fn insensitivity_check(spec: &GameSpec, u: &dyn Fn(&[f64]) -> FieldDerivatives, samples: &[Vec<f64>]) -> CheckReport {
    let mut worst: f64 = 0.0;
    for x in samples {
        let du = u(x);
        for (i, j, k) in control_triples(spec) {
            let p = &spec.controls.params()[k];
            let lhs = apply_l(spec, i, j, p, x, &du);
            let rhs = spec.factor(i, j, p, x) * bar_l_apply(spec, i, j, x, &du);
            worst = worst.max((lhs - rhs).abs() / rhs.abs().max(1.0));
        }
    }
    CheckReport::new("insensitivity", vec![CheckItem::new("relative defect", worst, 0.0, Relation::Le, 1e-9, 0.0)])
}

/// Unilateral deviations from the mesh-`n` pair built on `u`: every
/// constant α against the β strategy must not beat `reference` by more than
/// the ε-slack, and every constant β against the α response must not push
/// below it by more.
#[allow(clippy::too_many_arguments)]
pub fn deviation_check(
    spec: &GameSpec,
    dom: &Domain,
    x0: &[f64],
    u: Arc<ValueField>,
    reference: f64,
    eps: f64,
    n: u32,
    cfg: &McConfig,
    prule: &ParamProcessRule,
) -> Result<CheckReport> {
    let c_min = min_cost(spec, &dom.interior_samples(5));
    let slack_of = |taus: &[f64]| {
        if c_min > 0.0 {
            eps / (spec.delta1 * c_min)
        } else {
            eps * mean_stderr(taus).0 / spec.delta1
        }
    };
    let beta = Strategy::eps_optimal_beta(spec, dom, u.clone(), eps, n)?;
    let alpha = AlphaResponse::new(spec, dom, u, eps, n)?;
    let mut items = Vec::new();
    let mut cap: f64 = 0.0;
    let mut n_paths = 0;
    for i in 0..spec.controls.n_alpha() {
        let sc = Scenario::new(spec, dom, x0, AlphaPlay::constant(i), beta.clone()).with_rule(prule.clone());
        let s = path_summaries(&sc, cfg)?;
        let taus: Vec<f64> = s.iter().map(|p| p.tau).collect();
        let est = estimate_of(&s.iter().map(|p| p.payoff).collect::<Vec<_>>(), &s);
        cap = cap.max(est.cap_fraction);
        n_paths = est.n_paths;
        items.push(CheckItem::le(format!("alpha[{i}] vs beta strategy"), est.mean, est.stderr, reference + slack_of(&taus)));
    }
    for j in 0..spec.controls.n_beta() {
        let sc = Scenario::new(spec, dom, x0, AlphaPlay::Response(alpha.clone()), Strategy::Constant(j)).with_rule(prule.clone());
        let s = path_summaries(&sc, cfg)?;
        let taus: Vec<f64> = s.iter().map(|p| p.tau).collect();
        let est = estimate_of(&s.iter().map(|p| p.payoff).collect::<Vec<_>>(), &s);
        cap = cap.max(est.cap_fraction);
        items.push(CheckItem::ge(format!("beta[{j}] vs alpha response"), est.mean, est.stderr, reference - slack_of(&taus)));
    }
    let mut report = CheckReport::new("deviation", items).with_run(cfg, n_paths, cap, true);
    if c_min <= 0.0 {
        report = report.note("c vanishes somewhere: slack eps*E[tau]/delta1 used in place of eps/(delta1*c_min)");
    }
    Ok(report)
}
