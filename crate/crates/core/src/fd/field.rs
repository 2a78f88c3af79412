use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use super::lattice::Lattice;
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::isaacs::FieldDerivatives;

pub type BoundaryFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A grid function on a lattice. Interior nodes hold the solution; every
/// other node holds the boundary data `g`, and `value_at` returns `g` off
/// the domain.
#[derive(Clone)]
pub struct ValueField {
    lattice: Arc<Lattice>,
    values: Vec<f64>,
    boundary: BoundaryFn,
    gradients: Vec<f64>,
    hessians: Vec<f64>,
}

impl fmt::Debug for ValueField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ValueField")
            .field("domain", self.lattice.domain())
            .field("h", &self.lattice.h())
            .field("nodes", &self.values.len())
            .finish_non_exhaustive()
    }
}

impl ValueField {
    /// Builds the field from values at the unknowns (lattice order).
    pub fn from_unknowns(lattice: Arc<Lattice>, unknowns: &[f64], boundary: BoundaryFn) -> Self {
        assert_eq!(unknowns.len(), lattice.n_unknowns());
        let mut values: Vec<f64> = (0..lattice.n_nodes()).map(|k| boundary(&lattice.coord(k))).collect();
        for (u, &k) in lattice.interior().iter().enumerate() {
            values[k] = unknowns[u];
        }
        Self::with_values(lattice, values, boundary)
    }

    /// Samples `f` at the interior nodes.
    pub fn from_fn(lattice: Arc<Lattice>, f: impl Fn(&[f64]) -> f64, boundary: BoundaryFn) -> Self {
        let unknowns: Vec<f64> = lattice.interior().iter().map(|&k| f(&lattice.coord(k))).collect();
        Self::from_unknowns(lattice, &unknowns, boundary)
    }

    fn with_values(lattice: Arc<Lattice>, values: Vec<f64>, boundary: BoundaryFn) -> Self {
        let mut field = ValueField {
            lattice,
            values,
            boundary,
            gradients: Vec::new(),
            hessians: Vec::new(),
        };
        field.compute_nodal_derivatives();
        field
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn domain(&self) -> &Domain {
        self.lattice.domain()
    }

    /// Values at every lattice node.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn unknown_values(&self) -> Vec<f64> {
        self.lattice.interior().iter().map(|&k| self.values[k]).collect()
    }

    pub fn boundary(&self) -> &BoundaryFn {
        &self.boundary
    }

    pub fn boundary_value(&self, x: &[f64]) -> f64 {
        (self.boundary)(x)
    }

    /// Nodal value, gradient and Hessian (only meaningful at valid nodes).
    pub fn node_derivatives(&self, node: usize) -> FieldDerivatives {
        let d = self.lattice.dim();
        FieldDerivatives {
            value: self.values[node],
            gradient: self.gradients[node * d..(node + 1) * d].to_vec(),
            hessian: self.hessians[node * d * d..(node + 1) * d * d].to_vec(),
        }
    }

    /// Multilinear interpolation inside the domain, `g` elsewhere.
    pub fn value_at(&self, x: &[f64]) -> f64 {
        if !self.domain().contains(x) {
            return (self.boundary)(x);
        }
        let mut acc = 0.0;
        self.for_each_corner(x, |node, w| acc += w * self.values[node]);
        acc
    }

    /// Interpolated value and nodal difference derivatives at `x`.
    pub fn field_derivatives(&self, x: &[f64]) -> Result<FieldDerivatives> {
        if x.len() != self.lattice.dim() {
            return Err(Error::usage("point dimension does not match the field"));
        }
        if !self.domain().contains(x) {
            return Err(Error::OutsideDomain(x.to_vec()));
        }
        let d = self.lattice.dim();
        let mut out = FieldDerivatives::constant(0.0, d);
        self.for_each_corner(x, |node, w| {
            out.value += w * self.values[node];
            for (g, v) in out.gradient.iter_mut().zip(&self.gradients[node * d..(node + 1) * d]) {
                *g += w * v;
            }
            for (h, v) in out.hessian.iter_mut().zip(&self.hessians[node * d * d..(node + 1) * d * d]) {
                *h += w * v;
            }
        });
        Ok(out)
    }

    /// Visits the valid corners of the cell containing `x` with
    /// renormalized multilinear weights; falls back to the nearest valid
    /// node if none of the corners is valid.
    fn for_each_corner(&self, x: &[f64], mut visit: impl FnMut(usize, f64)) {
        let lat = &*self.lattice;
        let d = lat.dim();
        assert!(d <= 6, "interpolation supports up to 6 dimensions");
        let mut frac = [0.0; 6];
        let base = lat.locate(x, &mut frac[..d]);
        let mut total = 0.0;
        let mut corners = [(0usize, 0.0f64); 1 << 6];
        let n = 1usize << d;
        let mut m = 0;
        for mask in 0..n {
            let mut node = base;
            let mut w = 1.0;
            for i in 0..d {
                if mask >> i & 1 == 1 {
                    node += lat.stride(i);
                    w *= frac[i];
                } else {
                    w *= 1.0 - frac[i];
                }
            }
            if w > 0.0 && lat.is_valid(node) {
                corners[m] = (node, w);
                m += 1;
                total += w;
            }
        }
        if total > 0.0 {
            for &(node, w) in &corners[..m] {
                visit(node, w / total);
            }
            return;
        }
        let near = (0..lat.n_nodes())
            .filter(|&k| lat.is_valid(k))
            .min_by(|&p, &q| {
                let dp: f64 = lat.coord(p).iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                let dq: f64 = lat.coord(q).iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                dp.total_cmp(&dq)
            })
            .expect("lattice has valid nodes");
        visit(near, 1.0);
    }

    fn neighbour(&self, node: usize, axis: usize, step: i64) -> Option<usize> {
        let lat = &*self.lattice;
        let idx = lat.multi_index(node)[axis] as i64 + step;
        if idx < 0 || idx >= lat.counts()[axis] as i64 {
            return None;
        }
        let k = (node as i64 + step * lat.stride(axis) as i64) as usize;
        lat.is_valid(k).then_some(k)
    }

    fn compute_nodal_derivatives(&mut self) {
        let lat = self.lattice.clone();
        let (d, n) = (lat.dim(), lat.n_nodes());
        let h = lat.h().to_vec();
        let u = &self.values;
        let mut grad = vec![0.0; n * d];
        let mut hess = vec![f64::NAN; n * d * d];
        for k in 0..n {
            if !lat.is_valid(k) {
                hess[k * d * d..(k + 1) * d * d].fill(0.0);
                continue;
            }
            for i in 0..d {
                let (p, m) = (self.neighbour(k, i, 1), self.neighbour(k, i, -1));
                let (g, hh) = match (p, m) {
                    (Some(p), Some(m)) => ((u[p] - u[m]) / (2.0 * h[i]), (u[p] - 2.0 * u[k] + u[m]) / (h[i] * h[i])),
                    (Some(p), None) => one_sided(u, k, p, self.neighbour(p, i, 1), h[i]),
                    (None, Some(m)) => {
                        let (g, hh) = one_sided(u, k, m, self.neighbour(m, i, -1), h[i]);
                        (-g, hh)
                    }
                    (None, None) => (0.0, 0.0),
                };
                grad[k * d + i] = g;
                hess[k * d * d + i * d + i] = hh;
            }
        }
        // Mixed terms (and pure terms lacking a second-order stencil) from
        // differences of the nodal gradients.
        let diff = |k: usize, axis: usize, comp: usize| -> f64 {
            let g = |node: usize| grad[node * d + comp];
            match (self.neighbour(k, axis, 1), self.neighbour(k, axis, -1)) {
                (Some(p), Some(m)) => (g(p) - g(m)) / (2.0 * h[axis]),
                (Some(p), None) => (g(p) - g(k)) / h[axis],
                (None, Some(m)) => (g(k) - g(m)) / h[axis],
                (None, None) => 0.0,
            }
        };
        for k in 0..n {
            if !lat.is_valid(k) {
                continue;
            }
            for i in 0..d {
                if hess[k * d * d + i * d + i].is_nan() {
                    hess[k * d * d + i * d + i] = diff(k, i, i);
                }
                for j in (i + 1)..d {
                    let v = 0.5 * (diff(k, i, j) + diff(k, j, i));
                    hess[k * d * d + i * d + j] = v;
                    hess[k * d * d + j * d + i] = v;
                }
            }
        }
        self.gradients = grad;
        self.hessians = hess;
    }

    /// Max over valid-node pairs inside `sub` of `|u(x) - u(y)| / |x - y|^θ`.
    /// Nodes are thinned to at most 2000 by a fixed stride.
    pub fn holder_quotient(&self, theta: f64, sub: &Domain) -> f64 {
        let lat = &*self.lattice;
        let nodes: Vec<usize> = (0..lat.n_nodes())
            .filter(|&k| lat.is_valid(k) && sub.contains(&lat.coord(k)))
            .collect();
        let stride = nodes.len().div_ceil(2000).max(1);
        let picked: Vec<(Vec<f64>, f64)> = nodes
            .iter()
            .step_by(stride)
            .map(|&k| (lat.coord(k), self.values[k]))
            .collect();
        let mut best: f64 = 0.0;
        for (a, (xa, ua)) in picked.iter().enumerate() {
            for (xb, ub) in &picked[a + 1..] {
                let dist: f64 = xa.iter().zip(xb).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
                if dist > 0.0 {
                    best = best.max((ua - ub).abs() / dist.powf(theta));
                }
            }
        }
        best
    }

    /// Max over interior nodes of `|u - f|`.
    pub fn max_error(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.lattice
            .interior()
            .iter()
            .map(|&k| (self.values[k] - f(&self.lattice.coord(k))).abs())
            .fold(0.0, f64::max)
    }

    /// CSV with columns `x1..xd,u` over every node inside or on the domain.
    pub fn write_csv(&self, mut w: impl Write) -> io::Result<()> {
        let lat = &*self.lattice;
        let d = lat.dim();
        let header: Vec<String> = (1..=d).map(|i| format!("x{i}")).chain(["u".to_string()]).collect();
        writeln!(w, "{}", header.join(","))?;
        for k in 0..lat.n_nodes() {
            if !lat.is_valid(k) {
                continue;
            }
            let mut line = String::new();
            for c in lat.coord(k) {
                line.push_str(&format!("{c:.16e},"));
            }
            line.push_str(&format!("{:.16e}", self.values[k]));
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Gradient and pure second derivative from `k` toward `p` (and `p2`
/// beyond it), oriented in the direction `k → p`.
fn one_sided(u: &[f64], k: usize, p: usize, p2: Option<usize>, h: f64) -> (f64, f64) {
    match p2 {
        Some(q) => (
            (-3.0 * u[k] + 4.0 * u[p] - u[q]) / (2.0 * h),
            (u[k] - 2.0 * u[p] + u[q]) / (h * h),
        ),
        None => ((u[p] - u[k]) / h, f64::NAN),
    }
}
