use serde::Serialize;

use crate::domain::Domain;
use crate::error::{Error, Result};

/// Where one arm of a directional stencil lands.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum ArmTarget {
    /// An interior node, by unknown index.
    Unknown(usize),
    /// A boundary trace point, by index into [`Lattice::boundary_points`].
    Boundary(usize),
}

/// One side of a directional difference: target and the fraction `θ ∈ (0, 1]`
/// of the lattice step at which it sits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Arm {
    pub target: ArmTarget,
    pub theta: f64,
}

/// Tensor grid over the bounding box of a domain. Nodes strictly inside are
/// unknowns; the rest carry boundary data.
#[derive(Clone, Debug)]
pub struct Lattice {
    dom: Domain,
    origin: Vec<f64>,
    h: Vec<f64>,
    counts: Vec<usize>,
    strides: Vec<usize>,
    interior: Vec<usize>,
    unknown_of: Vec<Option<usize>>,
    /// Nodes inside or exactly on the boundary.
    valid: Vec<bool>,
    directions: Vec<Vec<i64>>,
    /// `arms[u][2·k]` and `arms[u][2·k + 1]`: plus and minus arm of
    /// direction `k` at unknown `u`.
    arms: Vec<Vec<Arm>>,
    boundary_points: Vec<Vec<f64>>,
    bandwidth: usize,
}

impl Lattice {
    /// Mesh width `h` is rounded per axis so the box is covered exactly.
    pub fn new(dom: Domain, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::usage(format!("mesh width must be positive, got {h}")));
        }
        let (lo, hi) = dom.bounding_box();
        let d = lo.len();
        let mut counts = Vec::with_capacity(d);
        let mut hs = Vec::with_capacity(d);
        for i in 0..d {
            let len = hi[i] - lo[i];
            let n = (len / h).round().max(2.0) as usize;
            counts.push(n + 1);
            hs.push(len / n as f64);
        }
        let total: usize = counts.iter().product();
        if total > 50_000_000 {
            return Err(Error::usage(format!("lattice with {total} nodes is too large")));
        }
        let mut strides = vec![1; d];
        for i in (0..d.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * counts[i + 1];
        }
        let mut lat = Lattice {
            dom,
            origin: lo,
            h: hs,
            counts,
            strides,
            interior: Vec::new(),
            unknown_of: vec![None; total],
            valid: vec![false; total],
            directions: directions(d),
            arms: Vec::new(),
            boundary_points: Vec::new(),
            bandwidth: 0,
        };
        let tol = 1e-12 * lat.dom.diameter();
        for k in 0..total {
            let x = lat.coord(k);
            let sd = lat.dom.signed_distance(&x);
            if sd < 0.0 {
                lat.unknown_of[k] = Some(lat.interior.len());
                lat.interior.push(k);
            }
            lat.valid[k] = sd <= tol;
        }
        lat.build_arms();
        Ok(lat)
    }

    fn build_arms(&mut self) {
        let d = self.dim();
        let mut arms = Vec::with_capacity(self.interior.len());
        let mut band = 0usize;
        for (u, &k) in self.interior.iter().enumerate() {
            let idx = self.multi_index(k);
            let x = self.coord(k);
            let mut row = Vec::with_capacity(2 * self.directions.len());
            for dir in self.directions.clone() {
                for sign in [1i64, -1] {
                    let mut nb = idx.clone();
                    let mut inside_box = true;
                    for i in 0..d {
                        let v = nb[i] as i64 + sign * dir[i];
                        if v < 0 || v >= self.counts[i] as i64 {
                            inside_box = false;
                            break;
                        }
                        nb[i] = v as usize;
                    }
                    let nb_flat = if inside_box { Some(self.flat(&nb)) } else { None };
                    let arm = match nb_flat.and_then(|f| self.unknown_of[f]) {
                        Some(v) => {
                            band = band.max(u.abs_diff(v));
                            Arm {
                                target: ArmTarget::Unknown(v),
                                theta: 1.0,
                            }
                        }
                        None => {
                            let y: Vec<f64> = (0..d).map(|i| x[i] + (sign * dir[i]) as f64 * self.h[i]).collect();
                            let c = self
                                .dom
                                .boundary_crossing(&x, &y)
                                .expect("neighbour outside the domain has a crossing");
                            self.boundary_points.push(c.point);
                            Arm {
                                target: ArmTarget::Boundary(self.boundary_points.len() - 1),
                                theta: c.theta.max(f64::MIN_POSITIVE),
                            }
                        }
                    };
                    row.push(arm);
                }
            }
            arms.push(row);
        }
        self.arms = arms;
        self.bandwidth = band;
    }

    pub fn domain(&self) -> &Domain {
        &self.dom
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    /// Nodes per axis.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn n_nodes(&self) -> usize {
        self.unknown_of.len()
    }

    pub fn n_unknowns(&self) -> usize {
        self.interior.len()
    }

    /// Flat node index of each unknown.
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn unknown_of(&self, node: usize) -> Option<usize> {
        self.unknown_of[node]
    }

    pub fn is_valid(&self, node: usize) -> bool {
        self.valid[node]
    }

    /// Stencil directions in lattice units: the axes, then `e_i ± e_j`.
    pub fn directions(&self) -> &[Vec<i64>] {
        &self.directions
    }

    pub fn arms(&self, unknown: usize) -> &[Arm] {
        &self.arms[unknown]
    }

    pub fn boundary_points(&self) -> &[Vec<f64>] {
        &self.boundary_points
    }

    /// Max `|i - j|` over coupled unknowns.
    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn multi_index(&self, mut node: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for i in 0..self.dim() {
            idx[i] = node / self.strides[i];
            node %= self.strides[i];
        }
        idx
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    pub fn coord(&self, node: usize) -> Vec<f64> {
        self.multi_index(node)
            .iter()
            .enumerate()
            .map(|(i, &k)| self.origin[i] + k as f64 * self.h[i])
            .collect()
    }

    /// Lower cell corner (clamped into the grid) as a flat index, with the
    /// fractional position per axis written to `frac`.
    pub(crate) fn locate(&self, x: &[f64], frac: &mut [f64]) -> usize {
        let mut base = 0;
        for i in 0..self.dim() {
            let s = (x[i] - self.origin[i]) / self.h[i];
            let k = (s.floor().max(0.0) as usize).min(self.counts[i] - 2);
            base += k * self.strides[i];
            frac[i] = (s - k as f64).clamp(0.0, 1.0);
        }
        base
    }
}

fn directions(d: usize) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    for i in 0..d {
        let mut e = vec![0; d];
        e[i] = 1;
        out.push(e);
    }
    for i in 0..d {
        for j in (i + 1)..d {
            let mut p = vec![0; d];
            p[i] = 1;
            p[j] = 1;
            out.push(p);
            let mut m = vec![0; d];
            m[i] = 1;
            m[j] = -1;
            out.push(m);
        }
    }
    out
}
