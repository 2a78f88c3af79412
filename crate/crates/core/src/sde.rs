//! Euler–Maruyama simulation of the controlled diffusion with discounts,
//! randomized stopping and exit detection.

use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::fd::ValueField;
use crate::game::{GameSpec, ParamPoint, MAX_NOISE_DIM};
use crate::rng::{aux_rng, fill_normal, path_rng, uniform};
use crate::strategy::{AlphaPlay, Strategy};

type FactorFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type RotationFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type RateFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

/// How the parameter process `p_t` is generated along a path.
#[derive(Clone)]
pub enum ParamProcessRule {
    /// `p ≡ p̄`.
    ConstantBase,
    /// `p_t = (r(x_t), Q(x_t))`.
    StateFeedback { factor: FactorFn, rotation: RotationFn },
    /// A constant time change `p'` and rotation `p''`.
    TimeChangeRotation(ParamPoint),
}

impl fmt::Debug for ParamProcessRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamProcessRule::ConstantBase => write!(f, "ConstantBase"),
            ParamProcessRule::StateFeedback { .. } => write!(f, "StateFeedback"),
            ParamProcessRule::TimeChangeRotation(p) => write!(f, "TimeChangeRotation({p:?})"),
        }
    }
}

impl ParamProcessRule {
    pub fn state_feedback(
        factor: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        rotation: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        ParamProcessRule::StateFeedback {
            factor: Arc::new(factor),
            rotation: Arc::new(rotation),
        }
    }

    /// The parameter value at state `x`, checked against `[δ₁, 1/δ₁]` and
    /// orthogonality.
    pub fn point(&self, spec: &GameSpec, x: &[f64]) -> Result<ParamPoint> {
        let p = match self {
            ParamProcessRule::ConstantBase => return Ok(spec.base_param().clone()),
            ParamProcessRule::StateFeedback { factor, rotation } => ParamPoint::rotated(factor(x), rotation(x)),
            ParamProcessRule::TimeChangeRotation(p) => p.clone(),
        };
        check_param(spec, &p)?;
        Ok(p)
    }
}

fn check_param(spec: &GameSpec, p: &ParamPoint) -> Result<()> {
    let (lo, hi) = (spec.delta1, 1.0 / spec.delta1);
    if !(p.scale >= lo && p.scale <= hi) {
        return Err(Error::usage(format!("time change {} outside [{lo}, {hi}]", p.scale)));
    }
    if let Some(q) = &p.rotation {
        let d1 = spec.noise_dim;
        if q.len() != d1 * d1 {
            return Err(Error::usage(format!("rotation must be {d1}x{d1}")));
        }
        let defect = p.orthogonality_defect(d1);
        if defect > 1e-12 {
            return Err(Error::usage(format!("rotation is not orthogonal (defect {defect:.3e})")));
        }
    }
    Ok(())
}

/// Coefficients after the parameter rule: `σ` (row-major `d x d1`), `b`,
/// `c`, `f` and the factor `r`.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveCoefficients {
    pub sigma: Vec<f64>,
    pub b: Vec<f64>,
    pub c: f64,
    pub f: f64,
    pub r: f64,
}

pub fn apply_param_rule(
    spec: &GameSpec,
    rule: &ParamProcessRule,
    alpha: usize,
    beta: usize,
    x: &[f64],
) -> Result<EffectiveCoefficients> {
    let p = rule.point(spec, x)?;
    let mut sigma = vec![0.0; spec.dim * spec.noise_dim];
    let mut b = vec![0.0; spec.dim];
    spec.sigma(alpha, beta, &p, x, &mut sigma);
    spec.drift(alpha, beta, &p, x, &mut b);
    Ok(EffectiveCoefficients {
        sigma,
        b,
        c: spec.cost(alpha, beta, &p, x),
        f: spec.running(alpha, beta, &p, x),
        r: spec.factor(alpha, beta, &p, x),
    })
}

/// Intensity `λ(t, x) ≥ 0` of randomized stopping.
#[derive(Clone)]
pub enum LambdaRule {
    Zero,
    Constant(f64),
    Feedback(RateFn),
}

impl fmt::Debug for LambdaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LambdaRule::Zero => write!(f, "Zero"),
            LambdaRule::Constant(v) => write!(f, "Constant({v})"),
            LambdaRule::Feedback(_) => write!(f, "Feedback"),
        }
    }
}

impl LambdaRule {
    pub fn feedback(f: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        LambdaRule::Feedback(Arc::new(f))
    }

    pub fn rate(&self, t: f64, x: &[f64]) -> f64 {
        match self {
            LambdaRule::Zero => 0.0,
            LambdaRule::Constant(v) => *v,
            LambdaRule::Feedback(f) => f(t, x),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, LambdaRule::Zero) || matches!(self, LambdaRule::Constant(v) if *v == 0.0)
    }
}

/// A stopping rule `γ`, evaluated on the simulation grid and capped by `τ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StopRule {
    Zero,
    Tau,
    FixedTime { t: f64 },
    /// First grid time outside the subdomain.
    ExitSubdomain { domain: Domain },
    /// First grid time with `φ ≥ level`.
    PhiThreshold { level: f64 },
}

impl StopRule {
    /// Index into `path.times` of `γ ∧ τ`.
    pub fn stop_index(&self, path: &PathRecord) -> usize {
        let last = path.times.len() - 1;
        match self {
            StopRule::Zero => 0,
            StopRule::Tau => last,
            StopRule::FixedTime { t } => {
                let tol = 1e-9 * t.abs().max(1.0);
                path.times.partition_point(|&s| s < t - tol).min(last)
            }
            StopRule::ExitSubdomain { domain } => (0..=last).find(|&k| !domain.contains(path.state(k))).unwrap_or(last),
            StopRule::PhiThreshold { level } => path.phi.iter().position(|&p| p >= *level).unwrap_or(last),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub t_cap: f64,
    /// Brownian-bridge test for excursions between grid points.
    #[serde(default = "default_bridge")]
    pub bridge: bool,
}

fn default_bridge() -> bool {
    true
}

impl SimConfig {
    pub fn new(dt: f64, t_cap: f64) -> Self {
        SimConfig { dt, t_cap, bridge: true }
    }

    /// `t_cap = 50·diam²/(2δ)`.
    pub fn with_default_cap(spec: &GameSpec, dom: &Domain, dt: f64) -> Self {
        Self::new(dt, default_t_cap(spec, dom))
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) || !(self.t_cap > 0.0 && self.t_cap.is_finite()) {
            return Err(Error::usage("dt and t_cap must be positive and finite"));
        }
        Ok(())
    }
}

pub fn default_t_cap(spec: &GameSpec, dom: &Domain) -> f64 {
    let diam = dom.diameter();
    50.0 * diam * diam / (2.0 * spec.delta)
}

/// One simulated trajectory. Per-time arrays have one entry per grid time
/// (`times.len()`), per-step arrays one fewer.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathRecord {
    pub dim: usize,
    pub times: Vec<f64>,
    /// Flat, `dim` entries per time.
    pub states: Vec<f64>,
    pub alpha: Vec<usize>,
    pub beta: Vec<usize>,
    /// Time-change factor `p'` used on each step.
    pub param_scale: Vec<f64>,
    /// Running payoff `f` on each step.
    pub running: Vec<f64>,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub tau: f64,
    pub exit_state: Vec<f64>,
    pub exited: bool,
    pub capped: bool,
}

impl PathRecord {
    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn last_state(&self) -> &[f64] {
        self.state(self.times.len() - 1)
    }
}

/// Simulates one path. `alpha` and `beta` are reset first; the normal
/// increments come from stream `path_id` of `seed`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_path(
    spec: &GameSpec,
    dom: &Domain,
    x0: &[f64],
    alpha: &mut AlphaPlay,
    beta: &mut Strategy,
    prule: &ParamProcessRule,
    lambda: &LambdaRule,
    cfg: &SimConfig,
    seed: u64,
    path_id: u64,
) -> Result<PathRecord> {
    cfg.validate()?;
    let (d, d1) = (spec.dim, spec.noise_dim);
    if x0.len() != d || dom.dim() != d {
        return Err(Error::usage("starting point, domain and game dimensions differ"));
    }
    alpha.reset();
    beta.reset();
    let mut rec = PathRecord {
        dim: d,
        times: vec![0.0],
        states: x0.to_vec(),
        alpha: Vec::new(),
        beta: Vec::new(),
        param_scale: Vec::new(),
        running: Vec::new(),
        phi: vec![0.0],
        psi: vec![0.0],
        tau: 0.0,
        exit_state: x0.to_vec(),
        exited: false,
        capped: false,
    };
    if !dom.contains(x0) {
        rec.exited = true;
        return Ok(rec);
    }
    let mut rng = path_rng(seed, path_id);
    let mut aux = aux_rng(seed, path_id);
    let n_steps = (cfg.t_cap / cfg.dt - 1e-9).ceil().max(1.0) as usize;
    let mut sigma = [0.0; MAX_NOISE_DIM * MAX_NOISE_DIM];
    let sigma = &mut sigma[..d * d1];
    let mut b = [0.0; MAX_NOISE_DIM];
    let b = &mut b[..d];
    let mut dw = [0.0; MAX_NOISE_DIM];
    let dw = &mut dw[..d1];
    let mut x = x0.to_vec();
    let mut next = vec![0.0; d];
    let (mut phi, mut psi) = (0.0, 0.0);

    for k in 0..n_steps {
        let t = k as f64 * cfg.dt;
        let t_next = if k + 1 == n_steps { cfg.t_cap } else { (k + 1) as f64 * cfg.dt };
        let step = t_next - t;
        let a_idx = alpha.step(t, &x)?;
        let b_idx = beta.beta_step(t, &x, a_idx)?;
        let p = prule.point(spec, &x)?;
        spec.sigma(a_idx, b_idx, &p, &x, sigma);
        spec.drift(a_idx, b_idx, &p, &x, b);
        let c = spec.cost(a_idx, b_idx, &p, &x);
        let f = spec.running(a_idx, b_idx, &p, &x);
        let lam = lambda.rate(t, &x);
        if !(sigma.iter().all(|v| v.is_finite()) && b.iter().all(|v| v.is_finite()) && c.is_finite() && f.is_finite() && lam.is_finite()) {
            return Err(Error::StepRejected { t, x });
        }
        fill_normal(&mut rng, step, dw);
        for i in 0..d {
            let mut acc = x[i] + b[i] * step;
            for j in 0..d1 {
                acc += sigma[i * d1 + j] * dw[j];
            }
            next[i] = acc;
        }

        let mut exit: Option<(f64, Vec<f64>)> = None;
        if !dom.contains(&next) {
            let cr = dom.boundary_crossing(&x, &next).expect("endpoint is outside");
            exit = Some((cr.theta, cr.point));
        } else if cfg.bridge {
            exit = bridge_exit(dom, &x, &next, sigma, d, d1, step, &mut aux);
        }

        rec.alpha.push(a_idx);
        rec.beta.push(b_idx);
        rec.param_scale.push(p.scale);
        rec.running.push(f);
        match exit {
            Some((theta, point)) => {
                let dt_eff = theta * step;
                phi += c * dt_eff;
                psi += lam * dt_eff;
                rec.times.push(t + dt_eff);
                rec.states.extend_from_slice(&point);
                rec.phi.push(phi);
                rec.psi.push(psi);
                rec.tau = t + dt_eff;
                rec.exit_state = point;
                rec.exited = true;
                return Ok(rec);
            }
            None => {
                phi += c * step;
                psi += lam * step;
                rec.times.push(t_next);
                rec.states.extend_from_slice(&next);
                rec.phi.push(phi);
                rec.psi.push(psi);
                std::mem::swap(&mut x, &mut next);
            }
        }
    }
    rec.tau = cfg.t_cap;
    rec.exit_state = x;
    rec.capped = true;
    Ok(rec)
}

/// If both endpoints are inside, tests whether the Brownian bridge between
/// them touched the boundary (locally flat approximation), in which case
/// the exit is placed at the mid-step, on the boundary point nearest the
/// midpoint.
#[allow(clippy::too_many_arguments)]
fn bridge_exit(
    dom: &Domain,
    x: &[f64],
    next: &[f64],
    sigma: &[f64],
    d: usize,
    d1: usize,
    step: f64,
    aux: &mut rand_chacha::ChaCha8Rng,
) -> Option<(f64, Vec<f64>)> {
    let d0 = -dom.signed_distance(x);
    let dn = -dom.signed_distance(next);
    // |σᵀn|² ≤ ‖σ‖²_F, so this bound on the exponent settles most steps
    // without locating the boundary.
    let frob2: f64 = sigma.iter().map(|s| s * s).sum();
    if frob2 > 0.0 && 2.0 * d0 * dn / (frob2 * step) > 40.0 {
        return None;
    }
    let mid: Vec<f64> = x.iter().zip(next).map(|(a, b)| 0.5 * (a + b)).collect();
    let (point, normal) = dom.nearest_boundary(&mid);
    let mut s2 = 0.0;
    for j in 0..d1 {
        let mut acc = 0.0;
        for i in 0..d {
            acc += sigma[i * d1 + j] * normal[i];
        }
        s2 += acc * acc;
    }
    if s2 <= 0.0 {
        return None;
    }
    let arg = 2.0 * d0 * dn / (s2 * step);
    if arg > 40.0 {
        return None;
    }
    (uniform(aux) < (-arg).exp()).then_some((0.5, point))
}

/// `∫₀^τ f e^{-φ} dt + 1[exited]·g(x_τ)e^{-φ_τ}` by the left-endpoint rule.
pub fn payoff(spec: &GameSpec, path: &PathRecord) -> f64 {
    let mut acc = 0.0;
    for k in 0..path.n_steps() {
        acc += path.running[k] * (-path.phi[k]).exp() * (path.times[k + 1] - path.times[k]);
    }
    if path.exited {
        acc += spec.terminal(&path.exit_state) * (-path.phi[path.times.len() - 1]).exp();
    }
    acc
}

/// `v(x_γ)e^{-φ_γ-ψ_γ} + ∫₀^γ [f + λv] e^{-φ-ψ} dt` with `γ` the stop index
/// and `ψ` accumulated from `lambda` along the path.
pub fn dpp_payoff(path: &PathRecord, stop: &StopRule, lambda: &LambdaRule, v: &ValueField) -> f64 {
    dpp_payoff_at(path, stop.stop_index(path), lambda, v)
}

pub(crate) fn dpp_payoff_at(path: &PathRecord, gamma: usize, lambda: &LambdaRule, v: &ValueField) -> f64 {
    let zero = lambda.is_zero();
    let mut acc = 0.0;
    let mut psi = 0.0;
    for k in 0..gamma {
        let (t, x) = (path.times[k], path.state(k));
        let dt = path.times[k + 1] - t;
        let disc = (-path.phi[k] - psi).exp();
        if zero {
            acc += path.running[k] * disc * dt;
        } else {
            let lam = lambda.rate(t, x);
            acc += (path.running[k] + lam * v.value_at(x)) * disc * dt;
            psi += lam * dt;
        }
    }
    acc + v.value_at(path.state(gamma)) * (-path.phi[gamma] - psi).exp()
}

/// CSV dump with columns `path,t,x1..xd,alpha,beta,phi,psi`; the control
/// columns are empty on each path's final row.
pub fn write_paths_csv<'a>(paths: impl IntoIterator<Item = (u64, &'a PathRecord)>, mut w: impl Write) -> io::Result<()> {
    let mut header_done = false;
    for (id, p) in paths {
        if !header_done {
            let xs: Vec<String> = (1..=p.dim).map(|i| format!("x{i}")).collect();
            writeln!(w, "path,t,{},alpha,beta,phi,psi", xs.join(","))?;
            header_done = true;
        }
        for k in 0..p.times.len() {
            let mut line = format!("{id},{:.16e}", p.times[k]);
            for v in p.state(k) {
                line.push_str(&format!(",{v:.16e}"));
            }
            if k < p.n_steps() {
                line.push_str(&format!(",{},{}", p.alpha[k], p.beta[k]));
            } else {
                line.push_str(",,");
            }
            line.push_str(&format!(",{:.16e},{:.16e}", p.phi[k], p.psi[k]));
            writeln!(w, "{line}")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests;
