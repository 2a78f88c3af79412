//! Game instances: coefficient evaluation, finite control grids and the
//! structural checks (ellipticity, factorization, bounds).

mod affine;
pub mod builtin;
mod closure;
mod potential;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use affine::{AffineDrift, AffineGame, AffineRunning, AffineTerminal};
pub use closure::FnGame;
pub use potential::potential_game;

use crate::error::{Error, Result};

/// Largest supported noise dimension; lets the hot path use stack buffers.
pub const MAX_NOISE_DIM: usize = 8;

/// A parameter value `p = (p', p'')`: a time-change factor and an optional
/// orthogonal rotation of the noise (row-major `d1 x d1`, `None` = identity).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamPoint {
    pub scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<Vec<f64>>,
}

impl ParamPoint {
    pub fn base() -> Self {
        ParamPoint {
            scale: 1.0,
            rotation: None,
        }
    }

    pub fn scaled(scale: f64) -> Self {
        ParamPoint {
            scale,
            rotation: None,
        }
    }

    pub fn rotated(scale: f64, rotation: Vec<f64>) -> Self {
        ParamPoint {
            scale,
            rotation: Some(rotation),
        }
    }

    /// Max-entry deviation of `QᵀQ` from the identity.
    pub fn orthogonality_defect(&self, noise_dim: usize) -> f64 {
        let Some(q) = &self.rotation else { return 0.0 };
        let mut worst: f64 = 0.0;
        for i in 0..noise_dim {
            for j in 0..noise_dim {
                let dot: f64 = (0..noise_dim)
                    .map(|k| q[k * noise_dim + i] * q[k * noise_dim + j])
                    .sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}

/// Rotation by `angle` in the first two noise coordinates.
pub fn plane_rotation(noise_dim: usize, angle: f64) -> Vec<f64> {
    let mut q = vec![0.0; noise_dim * noise_dim];
    for i in 0..noise_dim {
        q[i * noise_dim + i] = 1.0;
    }
    if noise_dim >= 2 {
        let (s, c) = angle.sin_cos();
        q[0] = c;
        q[1] = -s;
        q[noise_dim] = s;
        q[noise_dim + 1] = c;
    }
    q
}

/// Finite ordered control grids. Order matters: the selectors pick the
/// least admissible index.
#[derive(Clone, Debug)]
pub struct ControlGrid {
    alphas: Vec<Vec<f64>>,
    betas: Vec<Vec<f64>>,
    params: Vec<ParamPoint>,
    base_param_index: usize,
}

impl ControlGrid {
    pub fn new(
        alphas: Vec<Vec<f64>>,
        betas: Vec<Vec<f64>>,
        params: Vec<ParamPoint>,
        base_param_index: usize,
    ) -> Result<Self> {
        check_points("alphas", &alphas)?;
        check_points("betas", &betas)?;
        if params.is_empty() {
            return Err(Error::usage("params must be nonempty"));
        }
        for i in 0..params.len() {
            for j in 0..i {
                if params[i] == params[j] {
                    return Err(Error::usage(format!("duplicate param point at index {i}")));
                }
            }
        }
        if base_param_index >= params.len() {
            return Err(Error::usage(format!(
                "base_param_index {base_param_index} out of range for {} params",
                params.len()
            )));
        }
        Ok(ControlGrid {
            alphas,
            betas,
            params,
            base_param_index,
        })
    }

    /// Grids of scalar controls with only the base parameter.
    pub fn scalar(alphas: &[f64], betas: &[f64]) -> Result<Self> {
        Self::new(
            alphas.iter().map(|&a| vec![a]).collect(),
            betas.iter().map(|&b| vec![b]).collect(),
            vec![ParamPoint::base()],
            0,
        )
    }

    pub fn alphas(&self) -> &[Vec<f64>] {
        &self.alphas
    }

    pub fn betas(&self) -> &[Vec<f64>] {
        &self.betas
    }

    pub fn params(&self) -> &[ParamPoint] {
        &self.params
    }

    pub fn base_param_index(&self) -> usize {
        self.base_param_index
    }

    pub fn base_param(&self) -> &ParamPoint {
        &self.params[self.base_param_index]
    }

    pub fn n_alpha(&self) -> usize {
        self.alphas.len()
    }

    pub fn n_beta(&self) -> usize {
        self.betas.len()
    }
}

fn check_points(label: &str, pts: &[Vec<f64>]) -> Result<()> {
    if pts.is_empty() {
        return Err(Error::usage(format!("{label} must be nonempty")));
    }
    for i in 0..pts.len() {
        for j in 0..i {
            if pts[i] == pts[j] {
                return Err(Error::usage(format!("duplicate point in {label} at index {i}")));
            }
        }
    }
    Ok(())
}

/// Pointwise coefficient evaluation.
///
/// Implementors provide the base coefficients (at `p̄`). The parameter
/// dependence defaults to a time change and a noise rotation:
/// `σ(p) = √p'·σ̄·p''`, `(b, c, f)(p) = p'·(b̄, c̄, f̄)`, `r(p) = p'`.
/// Override the `p`-dependent methods for anything else.
pub trait Coefficients: Send + Sync {
    /// Row-major `d x d1` diffusion matrix at `p̄`.
    fn sigma_base(&self, alpha: &[f64], beta: &[f64], x: &[f64], out: &mut [f64]);
    fn drift_base(&self, alpha: &[f64], beta: &[f64], x: &[f64], out: &mut [f64]);
    fn cost_base(&self, alpha: &[f64], beta: &[f64], x: &[f64]) -> f64;
    fn running_base(&self, alpha: &[f64], beta: &[f64], x: &[f64]) -> f64;
    fn terminal(&self, x: &[f64]) -> f64;

    fn sigma(&self, alpha: &[f64], beta: &[f64], p: &ParamPoint, x: &[f64], out: &mut [f64]) {
        self.sigma_base(alpha, beta, x, out);
        let root = p.scale.sqrt();
        match &p.rotation {
            None => out.iter_mut().for_each(|s| *s *= root),
            Some(q) => {
                let d1 = (q.len() as f64).sqrt().round() as usize;
                let mut row = [0.0; MAX_NOISE_DIM];
                for chunk in out.chunks_mut(d1) {
                    row[..d1].copy_from_slice(chunk);
                    for (j, o) in chunk.iter_mut().enumerate() {
                        let mut acc = 0.0;
                        for k in 0..d1 {
                            acc += row[k] * q[k * d1 + j];
                        }
                        *o = root * acc;
                    }
                }
            }
        }
    }

    fn drift(&self, alpha: &[f64], beta: &[f64], p: &ParamPoint, x: &[f64], out: &mut [f64]) {
        self.drift_base(alpha, beta, x, out);
        out.iter_mut().for_each(|b| *b *= p.scale);
    }

    fn cost(&self, alpha: &[f64], beta: &[f64], p: &ParamPoint, x: &[f64]) -> f64 {
        p.scale * self.cost_base(alpha, beta, x)
    }

    fn running(&self, alpha: &[f64], beta: &[f64], p: &ParamPoint, x: &[f64]) -> f64 {
        p.scale * self.running_base(alpha, beta, x)
    }

    fn factor(&self, _alpha: &[f64], _beta: &[f64], p: &ParamPoint, _x: &[f64]) -> f64 {
        p.scale
    }
}

/// A game instance. Cheap to clone: coefficients are shared.
#[derive(Clone)]
pub struct GameSpec {
    pub name: String,
    pub dim: usize,
    pub noise_dim: usize,
    pub delta: f64,
    pub delta1: f64,
    pub k0: f64,
    pub controls: ControlGrid,
    coeffs: Arc<dyn Coefficients>,
}

impl fmt::Debug for GameSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GameSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("noise_dim", &self.noise_dim)
            .field("delta", &self.delta)
            .field("delta1", &self.delta1)
            .field("k0", &self.k0)
            .field("controls", &self.controls)
            .finish_non_exhaustive()
    }
}

impl GameSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        noise_dim: usize,
        delta: f64,
        delta1: f64,
        k0: f64,
        controls: ControlGrid,
        coeffs: Arc<dyn Coefficients>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::usage("dim must be at least 1"));
        }
        if noise_dim < dim || noise_dim > MAX_NOISE_DIM {
            return Err(Error::usage(format!(
                "noise_dim must lie in [{dim}, {MAX_NOISE_DIM}], got {noise_dim}"
            )));
        }
        if !(delta > 0.0 && delta <= 1.0) || !(delta1 > 0.0 && delta1 <= 1.0) {
            return Err(Error::usage("delta and delta1 must lie in (0, 1]"));
        }
        if !(k0 > 0.0) {
            return Err(Error::usage("k0 must be positive"));
        }
        for (i, p) in controls.params().iter().enumerate() {
            if let Some(q) = &p.rotation {
                if q.len() != noise_dim * noise_dim {
                    return Err(Error::usage(format!("param {i}: rotation must be {noise_dim}x{noise_dim}")));
                }
            }
        }
        Ok(GameSpec {
            name: name.into(),
            dim,
            noise_dim,
            delta,
            delta1,
            k0,
            controls,
            coeffs,
        })
    }

    /// The same game with the parameter grid reduced to `{p̄}`.
    pub fn base_only(&self) -> GameSpec {
        let c = &self.controls;
        let mut out = self.clone();
        out.controls = ControlGrid {
            alphas: c.alphas.clone(),
            betas: c.betas.clone(),
            params: vec![c.base_param().clone()],
            base_param_index: 0,
        };
        out
    }

    pub fn coefficients(&self) -> &Arc<dyn Coefficients> {
        &self.coeffs
    }

    pub fn alpha(&self, i: usize) -> &[f64] {
        &self.controls.alphas[i]
    }

    pub fn beta(&self, j: usize) -> &[f64] {
        &self.controls.betas[j]
    }

    pub fn base_param(&self) -> &ParamPoint {
        self.controls.base_param()
    }

    pub fn sigma(&self, i: usize, j: usize, p: &ParamPoint, x: &[f64], out: &mut [f64]) {
        self.coeffs.sigma(self.alpha(i), self.beta(j), p, x, out)
    }

    pub fn drift(&self, i: usize, j: usize, p: &ParamPoint, x: &[f64], out: &mut [f64]) {
        self.coeffs.drift(self.alpha(i), self.beta(j), p, x, out)
    }

    pub fn cost(&self, i: usize, j: usize, p: &ParamPoint, x: &[f64]) -> f64 {
        self.coeffs.cost(self.alpha(i), self.beta(j), p, x)
    }

    pub fn running(&self, i: usize, j: usize, p: &ParamPoint, x: &[f64]) -> f64 {
        self.coeffs.running(self.alpha(i), self.beta(j), p, x)
    }

    pub fn factor(&self, i: usize, j: usize, p: &ParamPoint, x: &[f64]) -> f64 {
        self.coeffs.factor(self.alpha(i), self.beta(j), p, x)
    }

    pub fn terminal(&self, x: &[f64]) -> f64 {
        self.coeffs.terminal(x)
    }

    /// `a = ½σσᵀ` (row-major `d x d`) for an explicit parameter value.
    pub fn diffusion_matrix(&self, i: usize, j: usize, p: &ParamPoint, x: &[f64], a: &mut [f64]) {
        let (d, d1) = (self.dim, self.noise_dim);
        let mut sigma = [0.0; MAX_NOISE_DIM * MAX_NOISE_DIM];
        let sigma = &mut sigma[..d * d1];
        self.sigma(i, j, p, x, sigma);
        sigma_to_a(sigma, d, d1, a);
    }

    /// Base-parameter coefficients `(ā, b̄, c̄, f̄)` at `x`.
    pub fn bar_coefficients(&self, i: usize, j: usize, x: &[f64], a: &mut [f64], b: &mut [f64]) -> (f64, f64) {
        let p = self.base_param();
        self.diffusion_matrix(i, j, p, x, a);
        self.drift(i, j, p, x, b);
        (self.cost(i, j, p, x), self.running(i, j, p, x))
    }

    fn check_indices(&self, i: usize, j: usize, k: usize) -> Result<()> {
        if i >= self.controls.n_alpha() {
            return Err(Error::usage(format!("alpha index {i} out of range")));
        }
        if j >= self.controls.n_beta() {
            return Err(Error::usage(format!("beta index {j} out of range")));
        }
        if k >= self.controls.params().len() {
            return Err(Error::usage(format!("param index {k} out of range")));
        }
        Ok(())
    }
}

pub(crate) fn sigma_to_a(sigma: &[f64], d: usize, d1: usize, a: &mut [f64]) {
    for r in 0..d {
        for s in 0..d {
            let mut acc = 0.0;
            for k in 0..d1 {
                acc += sigma[r * d1 + k] * sigma[s * d1 + k];
            }
            a[r * d + s] = 0.5 * acc;
        }
    }
}

/// Coefficients at a single point: `a = ½σσᵀ`, drift, cost and running payoff.
#[derive(Clone, Debug, PartialEq)]
pub struct Diffusion {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: f64,
    pub f: f64,
}

pub fn eval_diffusion(spec: &GameSpec, alpha: usize, beta: usize, param: usize, x: &[f64]) -> Result<Diffusion> {
    spec.check_indices(alpha, beta, param)?;
    if x.len() != spec.dim {
        return Err(Error::usage(format!("point has dimension {}, expected {}", x.len(), spec.dim)));
    }
    let p = &spec.controls.params()[param];
    let mut a = vec![0.0; spec.dim * spec.dim];
    let mut b = vec![0.0; spec.dim];
    spec.diffusion_matrix(alpha, beta, p, x, &mut a);
    spec.drift(alpha, beta, p, x, &mut b);
    Ok(Diffusion {
        a,
        b,
        c: spec.cost(alpha, beta, p, x),
        f: spec.running(alpha, beta, p, x),
    })
}

/// Every `(α, β, p)` index triple of the grids.
pub fn control_triples(spec: &GameSpec) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
    let (na, nb, np) = (spec.controls.n_alpha(), spec.controls.n_beta(), spec.controls.params().len());
    (0..na).flat_map(move |i| (0..nb).flat_map(move |j| (0..np).map(move |k| (i, j, k))))
}

#[derive(Clone, Debug, Serialize)]
pub struct EllipticityReport {
    pub min_quotient: f64,
    pub max_quotient: f64,
    pub lower: f64,
    pub upper: f64,
    /// First sample (α, β, p, point index, direction index) outside the band.
    pub violation: Option<(usize, usize, usize, usize, usize)>,
    pub pass: bool,
}

/// Rayleigh quotients `λᵀaλ/|λ|²` over every control triple, sample point
/// and direction, compared with `[δ, δ⁻¹]`.
pub fn check_ellipticity(spec: &GameSpec, samples: &[Vec<f64>], directions: &[Vec<f64>]) -> Result<EllipticityReport> {
    if samples.is_empty() || directions.is_empty() {
        return Err(Error::usage("ellipticity check needs sample points and directions"));
    }
    let d = spec.dim;
    let (lower, upper) = (spec.delta, 1.0 / spec.delta);
    let mut a = vec![0.0; d * d];
    let mut min_q = f64::INFINITY;
    let mut max_q = f64::NEG_INFINITY;
    let mut violation = None;
    for (i, j, k) in control_triples(spec) {
        let p = &spec.controls.params()[k];
        for (xi, x) in samples.iter().enumerate() {
            spec.diffusion_matrix(i, j, p, x, &mut a);
            for (li, lam) in directions.iter().enumerate() {
                let norm2: f64 = lam.iter().map(|v| v * v).sum();
                let mut quad = 0.0;
                for r in 0..d {
                    for s in 0..d {
                        quad += a[r * d + s] * lam[r] * lam[s];
                    }
                }
                let q = quad / norm2;
                min_q = min_q.min(q);
                max_q = max_q.max(q);
                let tol = 1e-12 * upper;
                if violation.is_none() && (q < lower - tol || q > upper + tol) {
                    violation = Some((i, j, k, xi, li));
                }
            }
        }
    }
    Ok(EllipticityReport {
        min_quotient: min_q,
        max_quotient: max_q,
        lower,
        upper,
        violation,
        pass: violation.is_none(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FactorizationReport {
    /// Max relative defect of `f(p) = r(p)·f(p̄)`.
    pub max_relative_defect: f64,
    pub min_factor: f64,
    pub max_factor: f64,
    /// Max `|r(p̄) - 1|`.
    pub base_factor_defect: f64,
    pub pass: bool,
}

pub fn check_factorization(spec: &GameSpec, samples: &[Vec<f64>]) -> Result<FactorizationReport> {
    if samples.is_empty() {
        return Err(Error::usage("factorization check needs sample points"));
    }
    let base = spec.base_param();
    let mut defect: f64 = 0.0;
    let mut base_defect: f64 = 0.0;
    let mut min_r = f64::INFINITY;
    let mut max_r = f64::NEG_INFINITY;
    for (i, j, k) in control_triples(spec) {
        let p = &spec.controls.params()[k];
        for x in samples {
            let r = spec.factor(i, j, p, x);
            let f = spec.running(i, j, p, x);
            let fbar = spec.running(i, j, base, x);
            let rel = (f - r * fbar).abs() / f.abs().max((r * fbar).abs()).max(f64::MIN_POSITIVE);
            if f != r * fbar {
                defect = defect.max(rel);
            }
            min_r = min_r.min(r);
            max_r = max_r.max(r);
            base_defect = base_defect.max((spec.factor(i, j, base, x) - 1.0).abs());
        }
    }
    let (lo, hi) = (spec.delta1, 1.0 / spec.delta1);
    let pass = defect <= 1e-12 && min_r >= lo && max_r <= hi && base_defect == 0.0;
    Ok(FactorizationReport {
        max_relative_defect: defect,
        min_factor: min_r,
        max_factor: max_r,
        base_factor_defect: base_defect,
        pass,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct StructureReport {
    pub max_asymmetry: f64,
    pub min_cost: f64,
    pub max_sigma_norm: f64,
    pub max_drift_norm: f64,
    pub max_orthogonality_defect: f64,
    pub pass: bool,
}

/// Sampled checks of the remaining structural invariants: `a` symmetric,
/// `c ≥ 0`, `‖σ‖, |b| ≤ K₀`, rotations orthogonal.
pub fn check_structure(spec: &GameSpec, samples: &[Vec<f64>]) -> Result<StructureReport> {
    if samples.is_empty() {
        return Err(Error::usage("structure check needs sample points"));
    }
    let (d, d1) = (spec.dim, spec.noise_dim);
    let mut sigma = vec![0.0; d * d1];
    let mut a = vec![0.0; d * d];
    let mut b = vec![0.0; d];
    let mut asym: f64 = 0.0;
    let mut min_c = f64::INFINITY;
    let mut max_s: f64 = 0.0;
    let mut max_b: f64 = 0.0;
    for (i, j, k) in control_triples(spec) {
        let p = &spec.controls.params()[k];
        for x in samples {
            spec.sigma(i, j, p, x, &mut sigma);
            sigma_to_a(&sigma, d, d1, &mut a);
            for r in 0..d {
                for s in 0..r {
                    let (ars, asr) = (a[r * d + s], a[s * d + r]);
                    asym = asym.max((ars - asr).abs() / (1.0 + ars.abs()));
                }
            }
            spec.drift(i, j, p, x, &mut b);
            max_s = max_s.max(sigma.iter().map(|v| v * v).sum::<f64>().sqrt());
            max_b = max_b.max(b.iter().map(|v| v * v).sum::<f64>().sqrt());
            min_c = min_c.min(spec.cost(i, j, p, x));
        }
    }
    let orth = spec
        .controls
        .params()
        .iter()
        .map(|p| p.orthogonality_defect(d1))
        .fold(0.0, f64::max);
    let tol = 1e-12 * spec.k0;
    let pass = asym <= 1e-14 && min_c >= 0.0 && max_s <= spec.k0 + tol && max_b <= spec.k0 + tol && orth <= 1e-12;
    Ok(StructureReport {
        max_asymmetry: asym,
        min_cost: min_c,
        max_sigma_norm: max_s,
        max_drift_norm: max_b,
        max_orthogonality_defect: orth,
        pass,
    })
}

/// Smallest sampled `c` over all controls and parameters (the `χ` of the
/// deviation bounds; 0 when the game has no discount).
pub fn min_cost(spec: &GameSpec, samples: &[Vec<f64>]) -> f64 {
    let mut m = f64::INFINITY;
    for (i, j, k) in control_triples(spec) {
        let p = &spec.controls.params()[k];
        for x in samples {
            m = m.min(spec.cost(i, j, p, x));
        }
    }
    m
}

#[cfg(test)]
mod tests;
