use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Coefficients, ControlGrid, GameSpec, ParamPoint};
use crate::error::{Error, Result};

/// `b̄(α, β, x) = offset + A·α + B·β + K·x`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineDrift {
    pub offset: Vec<f64>,
    #[serde(default)]
    pub alpha: Vec<Vec<f64>>,
    #[serde(default)]
    pub beta: Vec<Vec<f64>>,
    #[serde(default)]
    pub state: Vec<Vec<f64>>,
}

/// `f̄(α, β, x) = offset + wα·α + wβ·β + wx·x`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineRunning {
    pub offset: f64,
    #[serde(default)]
    pub alpha: Vec<f64>,
    #[serde(default)]
    pub beta: Vec<f64>,
    #[serde(default)]
    pub state: Vec<f64>,
}

/// `g(x) = constant + l·x + xᵀQx`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineTerminal {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub linear: Vec<f64>,
    #[serde(default)]
    pub quadratic: Vec<Vec<f64>>,
}

/// A user game with constant diffusion, drift affine in controls and state,
/// constant discount and affine running payoff. This is the JSON-ingestible
/// game family.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineGame {
    pub name: Option<String>,
    pub dim: usize,
    pub noise_dim: usize,
    /// `d x d1` rows.
    pub sigma: Vec<Vec<f64>>,
    pub drift: AffineDrift,
    #[serde(default)]
    pub cost: f64,
    pub running: AffineRunning,
    #[serde(default)]
    pub terminal: AffineTerminal,
    pub alphas: Vec<Vec<f64>>,
    pub betas: Vec<Vec<f64>>,
    #[serde(default = "default_params")]
    pub params: Vec<ParamPoint>,
    #[serde(default)]
    pub base_param_index: usize,
    pub delta: f64,
    pub delta1: f64,
    pub k0: f64,
}

fn default_params() -> Vec<ParamPoint> {
    vec![ParamPoint::base()]
}

fn dot(w: &[f64], v: &[f64]) -> f64 {
    w.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn mat_vec_add(m: &[Vec<f64>], v: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(m) {
        *o += dot(row, v);
    }
}

impl Coefficients for AffineGame {
    fn sigma_base(&self, _a: &[f64], _b: &[f64], _x: &[f64], out: &mut [f64]) {
        for (r, row) in self.sigma.iter().enumerate() {
            out[r * self.noise_dim..(r + 1) * self.noise_dim].copy_from_slice(row);
        }
    }

    fn drift_base(&self, alpha: &[f64], beta: &[f64], x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.drift.offset);
        mat_vec_add(&self.drift.alpha, alpha, out);
        mat_vec_add(&self.drift.beta, beta, out);
        mat_vec_add(&self.drift.state, x, out);
    }

    fn cost_base(&self, _a: &[f64], _b: &[f64], _x: &[f64]) -> f64 {
        self.cost
    }

    fn running_base(&self, alpha: &[f64], beta: &[f64], x: &[f64]) -> f64 {
        self.running.offset + dot(&self.running.alpha, alpha) + dot(&self.running.beta, beta) + dot(&self.running.state, x)
    }

    fn terminal(&self, x: &[f64]) -> f64 {
        let t = &self.terminal;
        let mut q = 0.0;
        for (r, row) in t.quadratic.iter().enumerate() {
            q += x[r] * dot(row, x);
        }
        t.constant + dot(&t.linear, x) + q
    }
}

impl AffineGame {
    fn validate(&self) -> Result<()> {
        let (d, d1) = (self.dim, self.noise_dim);
        let bad = |what: &str| Err(Error::usage(format!("affine game: {what}")));
        if self.sigma.len() != d || self.sigma.iter().any(|r| r.len() != d1) {
            return bad("sigma must be dim x noise_dim");
        }
        if self.drift.offset.len() != d {
            return bad("drift.offset must have length dim");
        }
        let (na, nb) = (self.alphas[0].len(), self.betas[0].len());
        if self.alphas.iter().any(|a| a.len() != na) || self.betas.iter().any(|b| b.len() != nb) {
            return bad("control points must share one dimension");
        }
        let shaped = |m: &Vec<Vec<f64>>, cols: usize| m.is_empty() || (m.len() == d && m.iter().all(|r| r.len() == cols));
        if !shaped(&self.drift.alpha, na) || !shaped(&self.drift.beta, nb) || !shaped(&self.drift.state, d) {
            return bad("drift gain matrices have the wrong shape");
        }
        let vec_ok = |v: &Vec<f64>, n: usize| v.is_empty() || v.len() == n;
        if !vec_ok(&self.running.alpha, na) || !vec_ok(&self.running.beta, nb) || !vec_ok(&self.running.state, d) {
            return bad("running weights have the wrong length");
        }
        if !vec_ok(&self.terminal.linear, d) || !shaped(&self.terminal.quadratic, d) {
            return bad("terminal coefficients have the wrong shape");
        }
        if self.cost < 0.0 {
            return bad("cost must be nonnegative");
        }
        Ok(())
    }

    pub fn into_spec(self) -> Result<GameSpec> {
        if self.alphas.is_empty() || self.betas.is_empty() {
            return Err(Error::usage("affine game: control grids must be nonempty"));
        }
        self.validate()?;
        let controls = ControlGrid::new(
            self.alphas.clone(),
            self.betas.clone(),
            self.params.clone(),
            self.base_param_index,
        )?;
        let name = self.name.clone().unwrap_or_else(|| "affine".to_string());
        let (dim, noise_dim, delta, delta1, k0) = (self.dim, self.noise_dim, self.delta, self.delta1, self.k0);
        GameSpec::new(name, dim, noise_dim, delta, delta1, k0, controls, Arc::new(self))
    }
}
