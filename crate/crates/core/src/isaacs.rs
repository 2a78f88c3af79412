//! Pointwise Isaacs operator and the ε-optimal selectors.

use serde::Serialize;

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::game::{GameSpec, ParamPoint, MAX_NOISE_DIM};

/// `u(x)`, `Du(x)` and `D²u(x)` (row-major) at one point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FieldDerivatives {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<f64>,
}

impl FieldDerivatives {
    pub fn new(value: f64, gradient: Vec<f64>, hessian: Vec<f64>) -> Self {
        debug_assert_eq!(hessian.len(), gradient.len() * gradient.len());
        FieldDerivatives {
            value,
            gradient,
            hessian,
        }
    }

    pub fn scalar(value: f64, gradient: f64, hessian: f64) -> Self {
        FieldDerivatives {
            value,
            gradient: vec![gradient],
            hessian: vec![hessian],
        }
    }

    pub fn constant(value: f64, dim: usize) -> Self {
        FieldDerivatives {
            value,
            gradient: vec![0.0; dim],
            hessian: vec![0.0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.gradient.len()
    }
}

/// `L^{αβ}u(p, x) = a_ij D_ij u + b_i D_i u - c u`.
pub fn apply_l(spec: &GameSpec, alpha: usize, beta: usize, p: &ParamPoint, x: &[f64], du: &FieldDerivatives) -> f64 {
    let d = spec.dim;
    let mut a = [0.0; MAX_NOISE_DIM * MAX_NOISE_DIM];
    let mut b = [0.0; MAX_NOISE_DIM];
    spec.diffusion_matrix(alpha, beta, p, x, &mut a[..d * d]);
    spec.drift(alpha, beta, p, x, &mut b[..d]);
    let c = spec.cost(alpha, beta, p, x);
    let mut acc = 0.0;
    for r in 0..d {
        for s in 0..d {
            acc += a[r * d + s] * du.hessian[r * d + s];
        }
        acc += b[r] * du.gradient[r];
    }
    acc - c * du.value
}

/// `L̄^{αβ}u(x)`, the operator at the base parameter.
pub fn bar_l_apply(spec: &GameSpec, alpha: usize, beta: usize, x: &[f64], du: &FieldDerivatives) -> f64 {
    apply_l(spec, alpha, beta, spec.base_param(), x, du)
}

/// `L̄^{αβ}u(x) + f̄^{αβ}(x)`.
pub fn bar_hamiltonian(spec: &GameSpec, alpha: usize, beta: usize, x: &[f64], du: &FieldDerivatives) -> f64 {
    bar_l_apply(spec, alpha, beta, x, du) + spec.running(alpha, beta, spec.base_param(), x)
}

/// Row-major `n_alpha x n_beta` table of `L̄u + f̄`.
pub fn hamiltonian_table(spec: &GameSpec, x: &[f64], du: &FieldDerivatives) -> Vec<f64> {
    let (na, nb) = (spec.controls.n_alpha(), spec.controls.n_beta());
    let mut t = Vec::with_capacity(na * nb);
    for i in 0..na {
        for j in 0..nb {
            t.push(bar_hamiltonian(spec, i, j, x, du));
        }
    }
    t
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IsaacsValue {
    pub value: f64,
    pub alpha: usize,
    pub beta: usize,
}

/// Least index attaining the minimum of a row.
pub(crate) fn argmin(row: &[f64]) -> (usize, f64) {
    let mut best = (0, row[0]);
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v < best.1 {
            best = (j, v);
        }
    }
    best
}

/// `sup_α inf_β` of a row-major table with least-index ties in both layers.
pub(crate) fn sup_inf(table: &[f64], nb: usize) -> IsaacsValue {
    let mut out = IsaacsValue {
        value: f64::NEG_INFINITY,
        alpha: 0,
        beta: 0,
    };
    for (i, row) in table.chunks(nb).enumerate() {
        let (j, v) = argmin(row);
        if v > out.value {
            out = IsaacsValue {
                value: v,
                alpha: i,
                beta: j,
            };
        }
    }
    out
}

/// `H[u](x) = sup_α inf_β [L̄u + f̄]` with the achieving indices.
pub fn isaacs_h(spec: &GameSpec, x: &[f64], du: &FieldDerivatives) -> IsaacsValue {
    sup_inf(&hamiltonian_table(spec, x, du), spec.controls.n_beta())
}

/// `inf_β sup_α [L̄u + f̄]`, the lower operator; reported as a diagnostic.
/// Indices are the minimizing β and the maximizing α at it.
pub fn lower_isaacs_h(spec: &GameSpec, x: &[f64], du: &FieldDerivatives) -> IsaacsValue {
    let (na, nb) = (spec.controls.n_alpha(), spec.controls.n_beta());
    let t = hamiltonian_table(spec, x, du);
    let mut out = IsaacsValue {
        value: f64::INFINITY,
        alpha: 0,
        beta: 0,
    };
    for j in 0..nb {
        let mut best = (0, t[j]);
        for i in 1..na {
            if t[i * nb + j] > best.1 {
                best = (i, t[i * nb + j]);
            }
        }
        if best.1 < out.value {
            out = IsaacsValue {
                value: best.1,
                alpha: best.0,
                beta: j,
            };
        }
    }
    out
}

/// Least `β` index with `L̄^{αβ}u(x) + f̄^{αβ}(x) ≤ ε`; index 0 outside `dom`.
pub fn select_beta(
    spec: &GameSpec,
    dom: &Domain,
    alpha: usize,
    x: &[f64],
    du: &FieldDerivatives,
    eps: f64,
) -> Result<usize> {
    if !dom.contains(x) {
        return Ok(0);
    }
    let mut best = f64::INFINITY;
    for j in 0..spec.controls.n_beta() {
        let v = bar_hamiltonian(spec, alpha, j, x, du);
        if v <= eps {
            return Ok(j);
        }
        best = best.min(v);
    }
    Err(Error::NoAdmissibleIndex {
        player: "beta",
        x: x.to_vec(),
        best,
        eps,
    })
}

/// Least `α` index with `inf_β [L̄^{αβ}u(x) + f̄^{αβ}(x)] ≥ -ε`; index 0
/// outside `dom`.
pub fn select_alpha(spec: &GameSpec, dom: &Domain, x: &[f64], du: &FieldDerivatives, eps: f64) -> Result<usize> {
    if !dom.contains(x) {
        return Ok(0);
    }
    let nb = spec.controls.n_beta();
    let table = hamiltonian_table(spec, x, du);
    let mut best = f64::NEG_INFINITY;
    for (i, row) in table.chunks(nb).enumerate() {
        let (_, v) = argmin(row);
        if v >= -eps {
            return Ok(i);
        }
        best = best.max(v);
    }
    Err(Error::NoAdmissibleIndex {
        player: "alpha",
        x: x.to_vec(),
        best,
        eps,
    })
}

#[cfg(test)]
mod tests;
