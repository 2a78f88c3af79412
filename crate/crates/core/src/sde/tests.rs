use std::sync::Arc;

use super::*;
use crate::fd::Lattice;
use crate::game::{builtin, ControlGrid, FnGame};
use crate::stats::mean_stderr;
use crate::strategy::Strategy;

const ZERO: usize = 1; // index of control 0 in bm1d

fn bm() -> (GameSpec, Domain) {
    let g = builtin::bm1d().unwrap();
    (g.spec, g.domain)
}

/// `dx = v dt` on (0, 1), cost `c`, running `f`, exit payoff `g_exit`.
fn transport(v: f64, c: f64, f: f64, g_exit: f64) -> (GameSpec, Domain) {
    let spec = FnGame::new()
        .drift(move |_, _, _, out| out[0] = v)
        .cost(move |_, _, _| c)
        .running(move |_, _, _| f)
        .terminal(move |_| g_exit)
        .into_spec("transport", 1, 1, ControlGrid::scalar(&[0.0], &[0.0]).unwrap(), 0.5, 1.0, 4.0)
        .unwrap();
    (spec, Domain::interval(0.0, 1.0).unwrap())
}

fn run(spec: &GameSpec, dom: &Domain, x0: f64, cfg: &SimConfig, rule: &ParamProcessRule, id: u64) -> PathRecord {
    simulate_path(
        spec,
        dom,
        &[x0],
        &mut AlphaPlay::constant(0),
        &mut Strategy::Constant(0),
        rule,
        &LambdaRule::Zero,
        cfg,
        7,
        id,
    )
    .unwrap()
}

fn run_bm(x0: f64, cfg: &SimConfig, rule: &ParamProcessRule, id: u64) -> PathRecord {
    let (spec, dom) = bm();
    simulate_path(
        &spec,
        &dom,
        &[x0],
        &mut AlphaPlay::constant(ZERO),
        &mut Strategy::Constant(ZERO),
        rule,
        &LambdaRule::Zero,
        cfg,
        11,
        id,
    )
    .unwrap()
}

#[test]
fn deterministic_exit_is_interpolated() {
    let (spec, dom) = transport(1.0, 0.0, 1.0, 2.0);
    let p = run(&spec, &dom, 0.25, &SimConfig::new(0.1, 10.0), &ParamProcessRule::ConstantBase, 0);
    assert!(p.exited && !p.capped);
    assert!((p.tau - 0.75).abs() < 1e-9, "tau {}", p.tau);
    assert!((p.exit_state[0] - 1.0).abs() < 1e-12);
    assert_eq!(p.times.len(), 9);
    assert_eq!(p.alpha.len(), 8);
    assert!((payoff(&spec, &p) - (0.75 + 2.0)).abs() < 1e-9);
}

#[test]
fn discounting() {
    let (spec, dom) = transport(1.0, 1.0, 0.0, 1.0);
    let p = run(&spec, &dom, 0.25, &SimConfig::new(0.05, 10.0), &ParamProcessRule::ConstantBase, 0);
    assert!((p.phi.last().unwrap() - 0.75).abs() < 1e-9);
    assert!((payoff(&spec, &p) - (-0.75f64).exp()).abs() < 1e-9);
    // Running payoff f = 1 with c = 1 integrates to 1 - e^{-τ} up to the
    // left-endpoint error.
    let (spec, dom) = transport(1.0, 1.0, 1.0, 0.0);
    let p = run(&spec, &dom, 0.25, &SimConfig::new(1e-4, 10.0), &ParamProcessRule::ConstantBase, 0);
    assert!((payoff(&spec, &p) - (1.0 - (-0.75f64).exp())).abs() < 1e-4);
}

#[test]
fn start_outside_domain() {
    let (spec, dom) = transport(1.0, 0.0, 1.0, 3.0);
    let p = run(&spec, &dom, 1.5, &SimConfig::new(0.1, 10.0), &ParamProcessRule::ConstantBase, 0);
    assert_eq!(p.times, vec![0.0]);
    assert!(p.exited && p.tau == 0.0);
    assert_eq!(payoff(&spec, &p), 3.0);
}

#[test]
fn cap_without_exit() {
    let (spec, dom) = transport(0.0, 0.0, 1.0, 5.0);
    let p = run(&spec, &dom, 0.5, &SimConfig::new(0.3, 1.0), &ParamProcessRule::ConstantBase, 0);
    assert!(p.capped && !p.exited);
    assert_eq!(p.tau, 1.0);
    assert_eq!(*p.times.last().unwrap(), 1.0);
    assert_eq!(p.n_steps(), 4);
    assert!((payoff(&spec, &p) - 1.0).abs() < 1e-12);
}

#[test]
fn reproducible_streams() {
    let cfg = SimConfig::new(1e-3, 5.0);
    let a = run_bm(0.5, &cfg, &ParamProcessRule::ConstantBase, 3);
    let b = run_bm(0.5, &cfg, &ParamProcessRule::ConstantBase, 3);
    let c = run_bm(0.5, &cfg, &ParamProcessRule::ConstantBase, 4);
    assert_eq!(a, b);
    assert_ne!(a.states, c.states);
}

#[test]
fn bridge_does_not_shift_increments() {
    let mut on = SimConfig::new(1e-3, 5.0);
    let mut off = on.clone();
    on.bridge = true;
    off.bridge = false;
    for id in 0..20 {
        let a = run_bm(0.5, &on, &ParamProcessRule::ConstantBase, id);
        let b = run_bm(0.5, &off, &ParamProcessRule::ConstantBase, id);
        let common = a.n_steps().min(b.n_steps()) - 1;
        assert_eq!(a.states[..common], b.states[..common]);
        assert!(a.tau <= b.tau + 1e-12);
    }
}

#[test]
fn bm_exit_time_mean() {
    let cfg = SimConfig::new(1e-4, 5.0);
    let taus: Vec<f64> = (0..4000).map(|id| run_bm(0.5, &cfg, &ParamProcessRule::ConstantBase, id).tau).collect();
    let (m, se) = mean_stderr(&taus);
    assert!((m - 0.125).abs() < 4.0 * se + 1e-3, "mean {m} se {se}");
}

#[test]
fn time_change_slows_the_clock_but_not_the_payoff() {
    let (spec, _) = bm();
    let cfg = SimConfig::new(1e-4, 5.0);
    let half = ParamProcessRule::TimeChangeRotation(ParamPoint::scaled(0.5));
    let paths: Vec<PathRecord> = (0..4000).map(|id| run_bm(0.5, &cfg, &half, id)).collect();
    let taus: Vec<f64> = paths.iter().map(|p| p.tau).collect();
    let pays: Vec<f64> = paths.iter().map(|p| payoff(&spec, p)).collect();
    let (mt, st) = mean_stderr(&taus);
    let (mp, sp) = mean_stderr(&pays);
    assert!((mt - 0.25).abs() < 4.0 * st + 2e-3, "tau {mt}");
    assert!((mp - 0.125).abs() < 4.0 * sp + 1e-3, "payoff {mp}");
}

#[test]
fn bridge_reduces_coarse_step_bias() {
    let dt = 0.01;
    let mut on = SimConfig::new(dt, 5.0);
    on.bridge = true;
    let mut off = on.clone();
    off.bridge = false;
    let n = 4000;
    let m_on = (0..n).map(|id| run_bm(0.5, &on, &ParamProcessRule::ConstantBase, id).tau).sum::<f64>() / n as f64;
    let m_off = (0..n).map(|id| run_bm(0.5, &off, &ParamProcessRule::ConstantBase, id).tau).sum::<f64>() / n as f64;
    assert!((m_on - 0.125).abs() < (m_off - 0.125).abs(), "on {m_on} off {m_off}");
}

#[test]
fn param_rules() {
    let (spec, _) = bm();
    let e = apply_param_rule(&spec, &ParamProcessRule::TimeChangeRotation(ParamPoint::scaled(0.5)), 2, 0, &[0.3]).unwrap();
    let s = 0.5f64.sqrt();
    assert!((e.sigma[0] - s).abs() < 1e-15 && (e.sigma[1] - s).abs() < 1e-15);
    assert_eq!((e.b[0], e.c, e.f, e.r), (1.0, 0.0, 0.5, 0.5));
    let base = apply_param_rule(&spec, &ParamProcessRule::ConstantBase, 2, 0, &[0.3]).unwrap();
    assert_eq!((base.b[0], base.f, base.r), (2.0, 1.0, 1.0));

    let fb = ParamProcessRule::state_feedback(|x| 1.0 + x[0], |_| vec![0.0, -1.0, 1.0, 0.0]);
    let e = apply_param_rule(&spec, &fb, 1, 1, &[0.5]).unwrap();
    assert!((e.r - 1.5).abs() < 1e-15);
    // σ = √r · σ̄ · Q with σ̄ = [1, 1] and a quarter turn.
    let s = 1.5f64.sqrt();
    assert!((e.sigma[0] - s).abs() < 1e-12 && (e.sigma[1] + s).abs() < 1e-12);

    let too_big = ParamProcessRule::TimeChangeRotation(ParamPoint::scaled(3.0));
    assert!(matches!(apply_param_rule(&spec, &too_big, 0, 0, &[0.5]), Err(Error::Usage(_))));
    let skew = ParamProcessRule::TimeChangeRotation(ParamPoint::rotated(1.0, vec![1.0, 0.1, 0.0, 1.0]));
    assert!(matches!(apply_param_rule(&spec, &skew, 0, 0, &[0.5]), Err(Error::Usage(_))));
}

#[test]
fn stop_rule_indices() {
    let (spec, dom) = transport(1.0, 1.0, 1.0, 0.0);
    let p = run(&spec, &dom, 0.05, &SimConfig::new(0.1, 10.0), &ParamProcessRule::ConstantBase, 0);
    let last = p.times.len() - 1;
    assert_eq!(StopRule::Zero.stop_index(&p), 0);
    assert_eq!(StopRule::Tau.stop_index(&p), last);
    assert_eq!(StopRule::FixedTime { t: 0.3 }.stop_index(&p), 3);
    assert_eq!(StopRule::FixedTime { t: 0.25 }.stop_index(&p), 3);
    assert_eq!(StopRule::FixedTime { t: 100.0 }.stop_index(&p), last);
    let sub = Domain::interval(0.0, 0.5).unwrap();
    // States 0.05, 0.15, ..., the first one ≥ 0.5 is 0.55 at index 5.
    assert_eq!(StopRule::ExitSubdomain { domain: sub }.stop_index(&p), 5);
    assert_eq!(StopRule::PhiThreshold { level: 0.2 }.stop_index(&p), 2);
}

#[test]
fn dpp_with_constant_value_is_exact() {
    let (spec, dom) = bm();
    let lat = Arc::new(Lattice::new(dom.clone(), 1.0 / 16.0).unwrap());
    let v = ValueField::from_fn(lat, |_| 2.0, Arc::new(|_| 2.0));
    // With f = 0 the identity V = V e^{-Λγ} + ∫ΛV e^{-Λt} holds pathwise.
    let (tspec, tdom) = transport(0.3, 0.0, 0.0, 0.0);
    let lam = LambdaRule::Constant(1.7);
    let p = simulate_path(
        &tspec,
        &tdom,
        &[0.2],
        &mut AlphaPlay::constant(0),
        &mut Strategy::Constant(0),
        &ParamProcessRule::ConstantBase,
        &lam,
        &SimConfig::new(1e-3, 10.0),
        1,
        0,
    )
    .unwrap();
    for stop in [StopRule::Zero, StopRule::Tau, StopRule::FixedTime { t: 0.7 }] {
        let d = dpp_payoff(&p, &stop, &lam, &v);
        // Left-endpoint quadrature error O(Λ dt).
        assert!((d - 2.0).abs() < 3e-3, "{stop:?}: {d}");
    }
    let _ = spec;
}

#[test]
fn dpp_at_tau_matches_payoff() {
    let (spec, dom) = bm();
    let lat = Arc::new(Lattice::new(dom.clone(), 1.0 / 16.0).unwrap());
    let v = ValueField::from_fn(lat, |x| 0.5 * x[0] * (1.0 - x[0]), Arc::new(|_| 0.0));
    let cfg = SimConfig::new(1e-3, 5.0);
    for id in 0..10 {
        let p = run_bm(0.3125, &cfg, &ParamProcessRule::ConstantBase, id);
        assert!((dpp_payoff(&p, &StopRule::Tau, &LambdaRule::Zero, &v) - payoff(&spec, &p)).abs() < 1e-12);
        assert!((dpp_payoff(&p, &StopRule::Zero, &LambdaRule::Zero, &v) - 0.107421875).abs() < 1e-12);
    }
}

#[test]
fn lambda_feedback_accumulates_psi() {
    let (spec, dom) = transport(1.0, 0.0, 0.0, 0.0);
    let lam = LambdaRule::feedback(|_, x| 2.0 * x[0]);
    let p = simulate_path(
        &spec,
        &dom,
        &[0.0 + 1e-9],
        &mut AlphaPlay::constant(0),
        &mut Strategy::Constant(0),
        &ParamProcessRule::ConstantBase,
        &lam,
        &SimConfig::new(1e-4, 10.0),
        1,
        0,
    )
    .unwrap();
    // ψ(τ) = ∫₀¹ 2t dt = 1.
    assert!((p.psi.last().unwrap() - 1.0).abs() < 1e-3);
}

#[test]
fn csv_layout() {
    let (spec, dom) = transport(1.0, 0.0, 1.0, 0.0);
    let p = run(&spec, &dom, 0.75, &SimConfig::new(0.1, 10.0), &ParamProcessRule::ConstantBase, 0);
    let mut buf = Vec::new();
    write_paths_csv([(4, &p)], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "path,t,x1,alpha,beta,phi,psi");
    assert_eq!(lines.len(), 1 + p.times.len());
    assert!(lines[1].starts_with("4,0.0000000000000000e0,7.5"));
    assert!(lines.last().unwrap().contains(",,"));
}

#[test]
fn rejects_bad_config() {
    let (spec, dom) = bm();
    let r = simulate_path(
        &spec,
        &dom,
        &[0.5],
        &mut AlphaPlay::constant(0),
        &mut Strategy::Constant(0),
        &ParamProcessRule::ConstantBase,
        &LambdaRule::Zero,
        &SimConfig::new(0.0, 1.0),
        1,
        0,
    );
    assert!(matches!(r, Err(Error::Usage(_))));
}

#[test]
fn non_finite_coefficients_reject_the_step() {
    let spec = FnGame::new()
        .drift(|_, _, x, out| out[0] = if x[0] > 0.6 { f64::NAN } else { 1.0 })
        .into_spec("nan", 1, 1, ControlGrid::scalar(&[0.0], &[0.0]).unwrap(), 0.5, 1.0, 4.0)
        .unwrap();
    let dom = Domain::interval(0.0, 1.0).unwrap();
    let r = simulate_path(
        &spec,
        &dom,
        &[0.5],
        &mut AlphaPlay::constant(0),
        &mut Strategy::Constant(0),
        &ParamProcessRule::ConstantBase,
        &LambdaRule::Zero,
        &SimConfig::new(0.1, 10.0),
        1,
        0,
    );
    assert!(matches!(r, Err(Error::StepRejected { .. })));
}

#[test]
fn constant_rates_accumulate_linearly() {
    let (spec, dom) = transport(1.0, 2.0, 0.0, 0.0);
    let cfg = SimConfig::new(0.01, 10.0);
    let p = simulate_path(
        &spec,
        &dom,
        &[0.0625],
        &mut AlphaPlay::constant(0),
        &mut Strategy::Constant(0),
        &ParamProcessRule::ConstantBase,
        &LambdaRule::Constant(3.0),
        &cfg,
        1,
        0,
    )
    .unwrap();
    for k in 0..p.times.len() {
        let t = p.times[k];
        assert!((p.phi[k] - 2.0 * t).abs() < 1e-12);
        assert!((p.psi[k] - 3.0 * t).abs() < 1e-12);
    }
    assert!((p.tau - 0.9375).abs() < 1e-9);
}

proptest::proptest! {
    #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]

    /// `∫λe^{-ψ}dt + e^{-ψ_τ} = 1` up to the left-endpoint rule.
    #[test]
    fn stopping_density_is_subprobability(lam in 0.0f64..20.0, x0 in 0.05f64..0.95, id in 0u64..1000) {
        let cfg = SimConfig::new(1e-3, 20.0);
        let (spec, dom) = bm();
        let p = simulate_path(
            &spec,
            &dom,
            &[x0],
            &mut AlphaPlay::constant(ZERO),
            &mut Strategy::Constant(ZERO),
            &ParamProcessRule::ConstantBase,
            &LambdaRule::Constant(lam),
            &cfg,
            3,
            id,
        )
        .unwrap();
        let mass: f64 = (0..p.n_steps()).map(|k| lam * (-p.psi[k]).exp() * (p.times[k + 1] - p.times[k])).sum();
        proptest::prop_assert!(mass <= 1.0 + 1e-12);
        let survive = (-p.psi[p.times.len() - 1]).exp();
        proptest::prop_assert!((mass + survive - 1.0).abs() <= lam * lam * 1e-3 * p.tau + 1e-12);
    }
}
