use serde::Serialize;

use super::lattice::{ArmTarget, Lattice};
use crate::error::{Error, Result};
use crate::game::{GameSpec, MAX_NOISE_DIM};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StencilEntry {
    /// Lattice offset of the full neighbour (the arm may stop short of it).
    pub offset: Vec<i64>,
    pub target: ArmTarget,
    pub theta: f64,
    pub weight: f64,
}

/// One row of the discrete operator: `L_h u = center·u₀ + Σ weight·u_k`,
/// plus the running payoff `f̄` at the node.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StencilRow {
    pub center: f64,
    pub entries: Vec<StencilEntry>,
    pub running: f64,
}

impl StencilRow {
    /// Total weight on a lattice offset; the zero offset is the center.
    pub fn weight_at(&self, offset: &[i64]) -> f64 {
        if offset.iter().all(|&o| o == 0) {
            return self.center;
        }
        self.entries.iter().filter(|e| e.offset == offset).map(|e| e.weight).sum()
    }

    /// Sum of all weights including the center (`≤ -c̄` for a monotone row).
    pub fn row_sum(&self) -> f64 {
        self.center + self.entries.iter().map(|e| e.weight).sum::<f64>()
    }
}

/// Monotone discretization of `L̄^{αβ}` at an interior node (by unknown
/// index): directional second differences with nonnegative weights and
/// upwind drift, both with cut-cell arms at the boundary.
pub fn discretize_l(spec: &GameSpec, lat: &Lattice, alpha: usize, beta: usize, unknown: usize) -> Result<StencilRow> {
    let d = lat.dim();
    if spec.dim != d {
        return Err(Error::usage(format!("game dimension {} does not match lattice dimension {d}", spec.dim)));
    }
    if unknown >= lat.n_unknowns() {
        return Err(Error::usage(format!("unknown index {unknown} out of range")));
    }
    let x = lat.coord(lat.interior()[unknown]);
    let mut a = [0.0; MAX_NOISE_DIM * MAX_NOISE_DIM];
    let mut b = [0.0; MAX_NOISE_DIM];
    let (c, f) = spec.bar_coefficients(alpha, beta, &x, &mut a[..d * d], &mut b[..d]);
    let h = lat.h();
    let arms = lat.arms(unknown);
    let dirs = lat.directions();

    let amax = a[..d * d].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut dir_weight = vec![0.0; dirs.len()];
    for i in 0..d {
        let mut w = a[i * d + i];
        for j in 0..d {
            if j != i {
                w -= a[i * d + j].abs() * h[i] / h[j];
            }
        }
        let w = w / (h[i] * h[i]);
        if w < -1e-12 * amax / (h[i] * h[i]) {
            return Err(Error::MeshTooCoarse { node: unknown, weight: w });
        }
        dir_weight[i] = w.max(0.0);
    }
    let mut k = d;
    for i in 0..d {
        for j in (i + 1)..d {
            let aij = 0.5 * (a[i * d + j] + a[j * d + i]);
            dir_weight[k] = aij.max(0.0) / (h[i] * h[j]);
            dir_weight[k + 1] = (-aij).max(0.0) / (h[i] * h[j]);
            k += 2;
        }
    }

    let mut weights = vec![0.0; arms.len()];
    let mut center = -c;
    for (k, &w) in dir_weight.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let (tp, tm) = (arms[2 * k].theta, arms[2 * k + 1].theta);
        weights[2 * k] += 2.0 * w / (tp * (tp + tm));
        weights[2 * k + 1] += 2.0 * w / (tm * (tp + tm));
        center -= 2.0 * w / (tp * tm);
    }
    for i in 0..d {
        let bi = b[i];
        if bi > 0.0 {
            let q = bi / (arms[2 * i].theta * h[i]);
            weights[2 * i] += q;
            center -= q;
        } else if bi < 0.0 {
            let q = -bi / (arms[2 * i + 1].theta * h[i]);
            weights[2 * i + 1] += q;
            center -= q;
        }
    }

    let entries = arms
        .iter()
        .enumerate()
        .map(|(m, arm)| {
            let sign = if m % 2 == 0 { 1 } else { -1 };
            StencilEntry {
                offset: dirs[m / 2].iter().map(|v| sign * v).collect(),
                target: arm.target,
                theta: arm.theta,
                weight: weights[m],
            }
        })
        .collect();
    Ok(StencilRow {
        center,
        entries,
        running: f,
    })
}
