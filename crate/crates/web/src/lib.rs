//! Browser bindings: solve a one-dimensional builtin game, simulate saddle
//! paths and compare the Monte-Carlo value with the finite-difference one.
//!
//! Every export returns a JSON string. The `*_json` functions are the plain
//! Rust versions, usable (and tested) off the browser.

use std::sync::Arc;

use sdgame_core::fd::solve;
use sdgame_core::game::builtin;
use sdgame_core::sde::{payoff, simulate_path};
use sdgame_core::stats::mean_stderr;
use sdgame_core::strategy::{pointwise_residual, strategy_pair_saddle};
use sdgame_core::verify::{mc_value, Scenario};
use sdgame_core::{AlphaPlay, Domain, GameSpec, Lattice, LambdaRule, McConfig, ParamProcessRule, SimConfig, SolveOptions, ValueField};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const MAX_SIM_PATHS: usize = 200;
const MAX_MC_PATHS: usize = 50_000;
const MAX_POINTS: usize = 400;
/// Spacing of the field the strategies are built from.
const STRATEGY_H: f64 = 1.0 / 1024.0;

fn game(name: &str, drift_scale: f64) -> Result<(GameSpec, Domain), String> {
    let g = match name {
        "bm1d" => builtin::bm1d_with_drift_scale(drift_scale),
        other => builtin::load(other),
    }
    .map_err(|e| e.to_string())?;
    if g.spec.dim != 1 {
        return Err(format!("{name} is {}-dimensional; the demo draws one-dimensional games", g.spec.dim));
    }
    Ok((g.spec, g.domain))
}

fn field(spec: &GameSpec, dom: &Domain, h: f64) -> Result<(ValueField, sdgame_core::SolveReport), String> {
    if !(h > 0.0 && h <= 0.25) {
        return Err("h must lie in (0, 0.25]".into());
    }
    let lat = Arc::new(Lattice::new(dom.clone(), h).map_err(|e| e.to_string())?);
    solve(spec, lat, &SolveOptions::default()).map_err(|e| e.to_string())
}

fn to_json(v: &impl Serialize) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Profile {
    game: String,
    x: Vec<f64>,
    u: Vec<f64>,
    /// `x(1-x)/2` for bm1d, whatever the drift scale.
    exact: Option<Vec<f64>>,
    residual: f64,
    iterations: usize,
    converged: bool,
}

/// The solved value on the lattice nodes of spacing `h`.
pub fn solve_profile_json(name: &str, drift_scale: f64, h: f64) -> Result<String, String> {
    let (spec, dom) = game(name, drift_scale)?;
    let (u, rep) = field(&spec, &dom, h)?;
    let lat = u.lattice();
    let x: Vec<f64> = (0..lat.n_nodes()).filter(|&k| lat.is_valid(k)).map(|k| lat.coord(k)[0]).collect();
    let vals: Vec<f64> = x.iter().map(|&xi| u.value_at(&[xi])).collect();
    let exact = (name == "bm1d").then(|| x.iter().map(|&xi| xi * (1.0 - xi) / 2.0).collect());
    to_json(&Profile {
        game: spec.name.clone(),
        x,
        u: vals,
        exact,
        residual: rep.residual,
        iterations: rep.outer_iterations,
        converged: rep.converged,
    })
}

fn saddle(spec: &GameSpec, dom: &Domain, x0: f64) -> Result<(Scenario, f64, f64), String> {
    let (u, _) = field(spec, dom, STRATEGY_H)?;
    let eps = (2.5 * pointwise_residual(spec, &u)).max(1e-6);
    let u = Arc::new(u);
    let v0 = u.value_at(&[x0]);
    let (a, b) = strategy_pair_saddle(spec, dom, u, eps, 32).map_err(|e| e.to_string())?;
    Ok((Scenario::new(spec, dom, &[x0], AlphaPlay::Response(a), b), eps, v0))
}

fn check_dt(dt: f64) -> Result<(), String> {
    if dt >= 1e-5 && dt <= 0.01 {
        Ok(())
    } else {
        Err("dt must lie in [1e-5, 0.01]".into())
    }
}

#[derive(Serialize)]
struct Path {
    t: Vec<f64>,
    x: Vec<f64>,
    tau: f64,
    payoff: f64,
}

#[derive(Serialize)]
struct Simulation {
    eps: f64,
    paths: Vec<Path>,
    mean_tau: f64,
    mean_payoff: f64,
}

/// Saddle-play paths from `x0`, thinned to at most 400 points each.
pub fn simulate_json(name: &str, drift_scale: f64, x0: f64, n_paths: usize, dt: f64, seed: u64) -> Result<String, String> {
    let (spec, dom) = game(name, drift_scale)?;
    check_dt(dt)?;
    if n_paths == 0 || n_paths > MAX_SIM_PATHS {
        return Err(format!("n_paths must lie in 1..={MAX_SIM_PATHS}"));
    }
    let (sc, eps, _) = saddle(&spec, &dom, x0)?;
    let cfg = SimConfig::with_default_cap(&spec, &dom, dt);
    let mut paths = Vec::with_capacity(n_paths);
    for id in 0..n_paths as u64 {
        let (mut a, mut b) = (sc.alpha.clone(), sc.beta.clone());
        let p = simulate_path(&spec, &dom, &[x0], &mut a, &mut b, &ParamProcessRule::ConstantBase, &LambdaRule::Zero, &cfg, seed, id)
            .map_err(|e| e.to_string())?;
        let stride = p.times.len().div_ceil(MAX_POINTS).max(1);
        let mut keep: Vec<usize> = (0..p.times.len()).step_by(stride).collect();
        if keep.last() != Some(&(p.times.len() - 1)) {
            keep.push(p.times.len() - 1);
        }
        paths.push(Path {
            t: keep.iter().map(|&k| p.times[k]).collect(),
            x: keep.iter().map(|&k| p.state(k)[0]).collect(),
            tau: p.tau,
            payoff: payoff(&spec, &p),
        });
    }
    let (mean_tau, _) = mean_stderr(&paths.iter().map(|p| p.tau).collect::<Vec<_>>());
    let (mean_payoff, _) = mean_stderr(&paths.iter().map(|p| p.payoff).collect::<Vec<_>>());
    to_json(&Simulation {
        eps,
        paths,
        mean_tau,
        mean_payoff,
    })
}

#[derive(Serialize)]
struct Estimate {
    fd_value: f64,
    mc_mean: f64,
    stderr: f64,
    n_paths: usize,
    within_3_stderr: bool,
}

/// Monte-Carlo value under saddle play against the solved value at `x0`.
pub fn estimate_value_json(name: &str, drift_scale: f64, x0: f64, n_paths: usize, dt: f64, seed: u64) -> Result<String, String> {
    let (spec, dom) = game(name, drift_scale)?;
    check_dt(dt)?;
    if !(2..=MAX_MC_PATHS).contains(&n_paths) {
        return Err(format!("n_paths must lie in 2..={MAX_MC_PATHS}"));
    }
    let (sc, _, v0) = saddle(&spec, &dom, x0)?;
    let est = mc_value(&sc, &McConfig::new(dt, n_paths, seed)).map_err(|e| e.to_string())?;
    to_json(&Estimate {
        fd_value: v0,
        mc_mean: est.mean,
        stderr: est.stderr,
        n_paths: est.n_paths,
        within_3_stderr: (est.mean - v0).abs() <= 3.0 * est.stderr,
    })
}

#[wasm_bindgen]
pub fn solve_profile(name: &str, drift_scale: f64, h: f64) -> Result<String, JsError> {
    solve_profile_json(name, drift_scale, h).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn simulate(name: &str, drift_scale: f64, x0: f64, n_paths: usize, dt: f64, seed: u64) -> Result<String, JsError> {
    simulate_json(name, drift_scale, x0, n_paths, dt, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn estimate_value(name: &str, drift_scale: f64, x0: f64, n_paths: usize, dt: f64, seed: u64) -> Result<String, JsError> {
    estimate_value_json(name, drift_scale, x0, n_paths, dt, seed).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn parse(s: Result<String, String>) -> Value {
        serde_json::from_str(&s.unwrap()).unwrap()
    }

    #[test]
    fn profile_matches_closed_form() {
        let v = parse(solve_profile_json("bm1d", 1.0, 1.0 / 64.0));
        let u = v["u"].as_array().unwrap();
        let ex = v["exact"].as_array().unwrap();
        assert_eq!(u.len(), 65);
        for (a, b) in u.iter().zip(ex) {
            assert!((a.as_f64().unwrap() - b.as_f64().unwrap()).abs() < 1e-3);
        }
        assert_eq!(v["converged"], Value::Bool(true));
        let p = parse(solve_profile_json("pursuit1d", 1.0, 1.0 / 32.0));
        assert!(p["exact"].is_null());
        assert_eq!(p["x"][0].as_f64(), Some(-1.0));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(solve_profile_json("rot2d", 1.0, 0.1).is_err());
        assert!(solve_profile_json("chess", 1.0, 0.1).is_err());
        assert!(solve_profile_json("bm1d", 1.0, 0.0).is_err());
        assert!(simulate_json("bm1d", 1.0, 0.5, 0, 1e-3, 1).is_err());
        assert!(simulate_json("bm1d", 1.0, 0.5, 5, 1.0, 1).is_err());
        assert!(estimate_value_json("bm1d", 1.0, 0.5, 1, 1e-3, 1).is_err());
    }

    #[test]
    fn simulated_paths_are_thinned_and_end_on_the_boundary() {
        let v = parse(simulate_json("bm1d", 1.0, 0.5, 6, 1e-4, 3));
        let paths = v["paths"].as_array().unwrap();
        assert_eq!(paths.len(), 6);
        for p in paths {
            let t = p["t"].as_array().unwrap();
            let x = p["x"].as_array().unwrap();
            assert!(t.len() <= MAX_POINTS + 1 && t.len() == x.len());
            assert_eq!(t.last().unwrap().as_f64(), p["tau"].as_f64());
            let end = x.last().unwrap().as_f64().unwrap();
            assert!(end.abs() < 1e-9 || (end - 1.0).abs() < 1e-9);
            // f = 1, c = 0, g = 0: the payoff is the exit time.
            assert!((p["payoff"].as_f64().unwrap() - p["tau"].as_f64().unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn estimate_agrees_with_solve() {
        let v = parse(estimate_value_json("bm1d", 1.0, 0.5, 4000, 1e-3, 5));
        assert!((v["fd_value"].as_f64().unwrap() - 0.125).abs() < 1e-4);
        let (m, se) = (v["mc_mean"].as_f64().unwrap(), v["stderr"].as_f64().unwrap());
        // dt = 1e-3 leaves a small discretisation bias on top of the noise.
        assert!((m - 0.125).abs() < 4.0 * se + 3e-3, "{m} +- {se}");
    }

    #[test]
    fn same_seed_same_output() {
        let a = simulate_json("pursuit1d", 1.0, 0.2, 3, 1e-3, 9).unwrap();
        let b = simulate_json("pursuit1d", 1.0, 0.2, 3, 1e-3, 9).unwrap();
        assert_eq!(a, b);
    }
}
