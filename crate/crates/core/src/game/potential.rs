use std::sync::Arc;

use super::{Coefficients, ControlGrid, GameSpec, ParamPoint};
use crate::error::Result;

/// One player choosing `(α, β)` jointly, with running payoff `|f̄|` and zero
/// exit data; its value `Φ` satisfies `L̄Φ + |f̄| ≤ 0` for every control
/// pair.
struct Joint {
    inner: GameSpec,
    alpha_len: usize,
}

impl Joint {
    fn split<'a>(&self, ab: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        ab.split_at(self.alpha_len)
    }
}

impl Coefficients for Joint {
    fn sigma_base(&self, ab: &[f64], _: &[f64], x: &[f64], out: &mut [f64]) {
        let (a, b) = self.split(ab);
        self.inner.coefficients().sigma_base(a, b, x, out)
    }
    fn drift_base(&self, ab: &[f64], _: &[f64], x: &[f64], out: &mut [f64]) {
        let (a, b) = self.split(ab);
        self.inner.coefficients().drift_base(a, b, x, out)
    }
    fn cost_base(&self, ab: &[f64], _: &[f64], x: &[f64]) -> f64 {
        let (a, b) = self.split(ab);
        self.inner.coefficients().cost_base(a, b, x)
    }
    fn running_base(&self, ab: &[f64], _: &[f64], x: &[f64]) -> f64 {
        let (a, b) = self.split(ab);
        self.inner.coefficients().running_base(a, b, x).abs()
    }
    fn terminal(&self, _: &[f64]) -> f64 {
        0.0
    }
}

/// The game whose value dominates the tail payoffs `E∫|f|e^{-φ}`.
pub fn potential_game(spec: &GameSpec) -> Result<GameSpec> {
    let mut joint = Vec::new();
    for a in spec.controls.alphas() {
        for b in spec.controls.betas() {
            joint.push([a.as_slice(), b.as_slice()].concat());
        }
    }
    let controls = ControlGrid::new(joint, vec![vec![0.0]], vec![ParamPoint::base()], 0)?;
    let coeffs = Joint {
        inner: spec.clone(),
        alpha_len: spec.controls.alphas()[0].len(),
    };
    GameSpec::new(
        format!("{}-potential", spec.name),
        spec.dim,
        spec.noise_dim,
        spec.delta,
        spec.delta1,
        spec.k0,
        controls,
        Arc::new(coeffs),
    )
}
