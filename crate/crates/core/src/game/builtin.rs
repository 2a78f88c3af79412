//! The builtin game catalogue.
//!
//! Every builtin uses the time-change/rotation parameterization with
//! `P = {(1, I), (1, R90), (2, I), (0.5, I)}` and `δ₁ = 0.5`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_8, SQRT_2};
use std::sync::Arc;

use super::{plane_rotation, Coefficients, ControlGrid, GameSpec, ParamPoint};
use crate::domain::Domain;
use crate::error::{Error, Result};

pub const NAMES: [&str; 3] = ["bm1d", "pursuit1d", "rot2d"];

/// A game together with the domain it is played on.
#[derive(Clone, Debug)]
pub struct BuiltinGame {
    pub spec: GameSpec,
    pub domain: Domain,
}

pub fn load(name: &str) -> Result<BuiltinGame> {
    match name {
        "bm1d" => bm1d(),
        "pursuit1d" => pursuit1d(),
        "rot2d" => rot2d(),
        other => Err(Error::usage(format!(
            "unknown builtin game {other:?} (known: {})",
            NAMES.join(", ")
        ))),
    }
}

fn standard_params(noise_dim: usize) -> Vec<ParamPoint> {
    vec![
        ParamPoint::base(),
        ParamPoint::rotated(1.0, plane_rotation(noise_dim, FRAC_PI_2)),
        ParamPoint::scaled(2.0),
        ParamPoint::scaled(0.5),
    ]
}

fn unit_grid() -> Vec<Vec<f64>> {
    vec![vec![-1.0], vec![0.0], vec![1.0]]
}

/// `D = (0, 1)`, `σ̄ = [1, 1]` (so `ā = 1`), `b̄ = s·(α - β)`, `c̄ = 0`,
/// `f̄ = 1`, `g = 0`, `A = B = {-1, 0, 1}`. With `s = 1` the value is
/// `x(1 - x)/2`.
#[derive(Clone, Debug)]
pub struct Bm1d {
    pub drift_scale: f64,
}

impl Coefficients for Bm1d {
    fn sigma_base(&self, _a: &[f64], _b: &[f64], _x: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
        out[1] = 1.0;
    }
    fn drift_base(&self, a: &[f64], b: &[f64], _x: &[f64], out: &mut [f64]) {
        out[0] = self.drift_scale * (a[0] - b[0]);
    }
    fn cost_base(&self, _a: &[f64], _b: &[f64], _x: &[f64]) -> f64 {
        0.0
    }
    fn running_base(&self, _a: &[f64], _b: &[f64], _x: &[f64]) -> f64 {
        1.0
    }
    fn terminal(&self, _x: &[f64]) -> f64 {
        0.0
    }
}

pub fn bm1d() -> Result<BuiltinGame> {
    bm1d_with_drift_scale(1.0)
}

/// `bm1d` with the drift multiplied by `scale` (`|b̄| ≤ 2·scale`).
pub fn bm1d_with_drift_scale(scale: f64) -> Result<BuiltinGame> {
    let controls = ControlGrid::new(unit_grid(), unit_grid(), standard_params(2), 0)?;
    let k0 = 4.0 * scale.abs().max(0.5);
    let spec = GameSpec::new("bm1d", 1, 2, 0.5, 0.5, k0, controls, Arc::new(Bm1d { drift_scale: scale }))?;
    Ok(BuiltinGame {
        spec,
        domain: Domain::interval(0.0, 1.0)?,
    })
}

/// Corridor pursuit: `D = (-1, 1)`; the evader (α, speed 0.5) is paid for
/// survival time, the pursuer (β, speed 1) pushes toward the walls.
#[derive(Clone, Debug)]
struct Pursuit1d;

impl Coefficients for Pursuit1d {
    fn sigma_base(&self, _a: &[f64], _b: &[f64], _x: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
        out[1] = 0.0;
    }
    fn drift_base(&self, a: &[f64], b: &[f64], _x: &[f64], out: &mut [f64]) {
        out[0] = a[0] - b[0];
    }
    fn cost_base(&self, _a: &[f64], _b: &[f64], _x: &[f64]) -> f64 {
        0.2
    }
    fn running_base(&self, _a: &[f64], _b: &[f64], _x: &[f64]) -> f64 {
        1.0
    }
    fn terminal(&self, _x: &[f64]) -> f64 {
        0.0
    }
}

pub fn pursuit1d() -> Result<BuiltinGame> {
    let alphas = vec![vec![-0.5], vec![0.0], vec![0.5]];
    let controls = ControlGrid::new(alphas, unit_grid(), standard_params(2), 0)?;
    let spec = GameSpec::new("pursuit1d", 1, 2, 0.25, 0.5, 3.0, controls, Arc::new(Pursuit1d))?;
    Ok(BuiltinGame {
        spec,
        domain: Domain::interval(-1.0, 1.0)?,
    })
}

/// Anisotropic planar game on the unit disc: `ā = R diag(1, ½) Rᵀ` with `R`
/// a rotation by π/8 (diagonally dominant), `b̄ = ½(α - β, α + β)`,
/// `c̄ = ½`, `f̄ = 1 + x₁/2`, `g = x₁² - x₂²`.
#[derive(Clone, Debug)]
struct Rot2d {
    sigma: [f64; 4],
}

impl Rot2d {
    fn new() -> Self {
        let (s, c) = FRAC_PI_8.sin_cos();
        let r = (0.5f64).sqrt();
        // √2 · R · diag(1, √½)
        Rot2d {
            sigma: [SQRT_2 * c, -SQRT_2 * s * r, SQRT_2 * s, SQRT_2 * c * r],
        }
    }
}

impl Coefficients for Rot2d {
    fn sigma_base(&self, _a: &[f64], _b: &[f64], _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.sigma);
    }
    fn drift_base(&self, a: &[f64], b: &[f64], _x: &[f64], out: &mut [f64]) {
        out[0] = 0.5 * (a[0] - b[0]);
        out[1] = 0.5 * (a[0] + b[0]);
    }
    fn cost_base(&self, _a: &[f64], _b: &[f64], _x: &[f64]) -> f64 {
        0.5
    }
    fn running_base(&self, _a: &[f64], _b: &[f64], x: &[f64]) -> f64 {
        1.0 + 0.5 * x[0]
    }
    fn terminal(&self, x: &[f64]) -> f64 {
        x[0] * x[0] - x[1] * x[1]
    }
}

pub fn rot2d() -> Result<BuiltinGame> {
    let controls = ControlGrid::new(unit_grid(), unit_grid(), standard_params(2), 0)?;
    let spec = GameSpec::new("rot2d", 2, 2, 0.25, 0.5, 3.0, controls, Arc::new(Rot2d::new()))?;
    Ok(BuiltinGame {
        spec,
        domain: Domain::ball(vec![0.0, 0.0], 1.0)?,
    })
}
