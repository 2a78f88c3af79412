//! Monte-Carlo estimators and the statistical checks built on them.
//!
//! Every estimator runs paths `first_path..first_path + n_paths` of one
//! master seed, in fixed chunks, and sums in path order, so results do not
//! depend on the thread count.

mod checks;
mod report;

use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::fd::ValueField;
use crate::game::GameSpec;
use crate::par::map_indexed;
use crate::sde::{default_t_cap, dpp_payoff_at, payoff, simulate_path, LambdaRule, ParamProcessRule, PathRecord, SimConfig, StopRule};
use crate::stats::mean_stderr;
use crate::strategy::{AlphaPlay, Strategy};

pub use checks::{
    deviation_check, exhaustion_check, insensitivity_check, localization_check, moment_check, occupation_check,
    p_invariance_check, submartingale_check, supermartingale_check, value_check, MartingaleKind,
};
pub use report::{CheckItem, CheckReport, Relation};

/// Paths with more than this fraction capped make a check fail unless
/// `allow_cap` is set.
pub const MAX_CAP_FRACTION: f64 = 0.01;

const CHUNK: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Defaults to `50·diam²/(2δ)`.
    #[serde(default)]
    pub t_cap: Option<f64>,
    #[serde(default)]
    pub first_path: u64,
    #[serde(default = "yes")]
    pub bridge: bool,
    #[serde(default)]
    pub allow_cap: bool,
}

fn yes() -> bool {
    true
}

impl McConfig {
    pub fn new(dt: f64, n_paths: usize, seed: u64) -> Self {
        McConfig {
            dt,
            n_paths,
            seed,
            t_cap: None,
            first_path: 0,
            bridge: true,
            allow_cap: false,
        }
    }

    pub fn sim_config(&self, spec: &GameSpec, dom: &Domain) -> SimConfig {
        SimConfig {
            dt: self.dt,
            t_cap: self.t_cap.unwrap_or_else(|| default_t_cap(spec, dom)),
            bridge: self.bridge,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_paths < 2 {
            return Err(Error::usage("at least 2 paths are needed"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_paths: usize,
    pub cap_fraction: f64,
}

impl McEstimate {
    pub fn from_samples(xs: &[f64], capped: usize) -> Self {
        let (mean, stderr) = mean_stderr(xs);
        McEstimate {
            mean,
            stderr,
            n_paths: xs.len(),
            cap_fraction: if xs.is_empty() { 0.0 } else { capped as f64 / xs.len() as f64 },
        }
    }
}

/// Everything needed to simulate one family of paths.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub spec: GameSpec,
    pub dom: Domain,
    pub x0: Vec<f64>,
    pub alpha: AlphaPlay,
    pub beta: Strategy,
    pub prule: ParamProcessRule,
    pub lambda: LambdaRule,
}

impl Scenario {
    pub fn new(spec: &GameSpec, dom: &Domain, x0: &[f64], alpha: AlphaPlay, beta: Strategy) -> Self {
        Scenario {
            spec: spec.clone(),
            dom: dom.clone(),
            x0: x0.to_vec(),
            alpha,
            beta,
            prule: ParamProcessRule::ConstantBase,
            lambda: LambdaRule::Zero,
        }
    }

    pub fn with_rule(mut self, prule: ParamProcessRule) -> Self {
        self.prule = prule;
        self
    }

    pub fn with_lambda(mut self, lambda: LambdaRule) -> Self {
        self.lambda = lambda;
        self
    }
}

/// Simulates every path of `cfg` and maps it through `f`, in path order.
pub fn run_paths<T, F>(sc: &Scenario, cfg: &McConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&PathRecord) -> T + Sync + Send,
{
    cfg.validate()?;
    let sim = cfg.sim_config(&sc.spec, &sc.dom);
    let n = cfg.n_paths;
    let chunks = n.div_ceil(CHUNK);
    let results: Vec<(Vec<T>, Option<(u64, Error)>)> = map_indexed(chunks, |c| {
        let mut alpha = sc.alpha.clone();
        let mut beta = sc.beta.clone();
        let mut out = Vec::with_capacity(CHUNK);
        for k in c * CHUNK..((c + 1) * CHUNK).min(n) {
            let id = cfg.first_path + k as u64;
            match simulate_path(&sc.spec, &sc.dom, &sc.x0, &mut alpha, &mut beta, &sc.prule, &sc.lambda, &sim, cfg.seed, id) {
                Ok(p) => out.push(f(&p)),
                Err(e) => return (out, Some((id, e))),
            }
        }
        (out, None)
    });
    let completed: usize = results.iter().map(|(v, _)| v.len()).sum();
    let mut all = Vec::with_capacity(n);
    let mut failure = None;
    for (v, err) in results {
        all.extend(v);
        if failure.is_none() {
            failure = err;
        }
    }
    match failure {
        None => Ok(all),
        Some((path_id, e)) => Err(Error::PathFailed {
            path_id,
            completed,
            source: Box::new(e),
        }),
    }
}

/// Per-path summary kept by the value estimators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PathSummary {
    pub payoff: f64,
    pub tau: f64,
    pub capped: bool,
}

pub fn path_summaries(sc: &Scenario, cfg: &McConfig) -> Result<Vec<PathSummary>> {
    let spec = &sc.spec;
    run_paths(sc, cfg, |p| PathSummary {
        payoff: payoff(spec, p),
        tau: p.tau,
        capped: p.capped,
    })
}

pub(crate) fn estimate_of(xs: &[f64], s: &[PathSummary]) -> McEstimate {
    McEstimate::from_samples(xs, s.iter().filter(|p| p.capped).count())
}

/// Mean payoff over the scenario's paths.
pub fn mc_value(sc: &Scenario, cfg: &McConfig) -> Result<McEstimate> {
    let s = path_summaries(sc, cfg)?;
    let xs: Vec<f64> = s.iter().map(|p| p.payoff).collect();
    Ok(estimate_of(&xs, &s))
}

/// `dpp_payoff - v(x0)` for each `(γ, λ)` rule, all on one set of paths.
pub fn dpp_residuals(sc: &Scenario, cfg: &McConfig, v: &ValueField, rules: &[(StopRule, LambdaRule)]) -> Result<Vec<McEstimate>> {
    let v0 = v.value_at(&sc.x0);
    let rows = run_paths(sc, cfg, |p| {
        let r: Vec<f64> = rules
            .iter()
            .map(|(stop, lam)| dpp_payoff_at(p, stop.stop_index(p), lam, v) - v0)
            .collect();
        (r, p.capped)
    })?;
    let capped = rows.iter().filter(|r| r.1).count();
    Ok((0..rules.len())
        .map(|k| {
            let xs: Vec<f64> = rows.iter().map(|r| r.0[k]).collect();
            McEstimate::from_samples(&xs, capped)
        })
        .collect())
}

pub fn dpp_residual(sc: &Scenario, cfg: &McConfig, v: &ValueField, stop: &StopRule, lambda: &LambdaRule) -> Result<McEstimate> {
    Ok(dpp_residuals(sc, cfg, v, &[(stop.clone(), lambda.clone())])?[0])
}
