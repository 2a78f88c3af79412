use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::band::BandMatrix;
use super::field::{BoundaryFn, ValueField};
use super::lattice::{ArmTarget, Lattice};
use super::stencil::discretize_l;
use crate::error::{Error, Result};
use crate::game::GameSpec;
use crate::par;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    /// Target for `max |H_h[u]|` over interior nodes.
    pub tol: f64,
    pub max_outer: usize,
    /// Howard iterations over β per outer step.
    pub max_inner: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-8,
            max_outer: 200,
            max_inner: 200,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub converged: bool,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub residual: f64,
    /// Residual after each outer iteration.
    pub residual_history: Vec<f64>,
    /// Max over nodes of the discrete `inf sup - sup inf` gap at the
    /// solution (zero when the lower and upper operators agree).
    pub lower_gap: f64,
    pub unknowns: usize,
    pub h: Vec<f64>,
    pub tol: f64,
}

/// A row of the assembled operator in unknown-index form; boundary arms are
/// folded into `source` together with `f̄`.
#[derive(Clone, Debug)]
struct Row {
    center: f64,
    source: f64,
    nbrs: Vec<(usize, f64)>,
}

impl Row {
    fn eval(&self, u: &[f64], me: usize) -> f64 {
        let mut acc = self.center * u[me] + self.source;
        for &(c, w) in &self.nbrs {
            acc += w * u[c];
        }
        acc
    }

    fn tie(&self, umax: f64) -> f64 {
        64.0 * f64::EPSILON * (self.center.abs() * umax + self.source.abs())
    }
}

struct Assembled {
    na: usize,
    nb: usize,
    /// `rows[u·na·nb + i·nb + j]`.
    rows: Vec<Row>,
}

impl Assembled {
    fn row(&self, u: usize, i: usize, j: usize) -> &Row {
        &self.rows[(u * self.na + i) * self.nb + j]
    }

    /// `(least argmin β, min)` of row `i` at unknown `u`.
    fn inf_beta(&self, u: usize, i: usize, vals: &[f64]) -> (usize, f64) {
        let mut best = (0, self.row(u, i, 0).eval(vals, u));
        for j in 1..self.nb {
            let v = self.row(u, i, j).eval(vals, u);
            if v < best.1 {
                best = (j, v);
            }
        }
        best
    }

    fn sup_inf(&self, u: usize, vals: &[f64]) -> f64 {
        (0..self.na).map(|i| self.inf_beta(u, i, vals).1).fold(f64::NEG_INFINITY, f64::max)
    }

    fn inf_sup(&self, u: usize, vals: &[f64]) -> f64 {
        (0..self.nb)
            .map(|j| (0..self.na).map(|i| self.row(u, i, j).eval(vals, u)).fold(f64::NEG_INFINITY, f64::max))
            .fold(f64::INFINITY, f64::min)
    }
}

fn assemble(spec: &GameSpec, lat: &Lattice, gvals: &[f64]) -> Result<Assembled> {
    let (na, nb) = (spec.controls.n_alpha(), spec.controls.n_beta());
    let per_node: Vec<Result<Vec<Row>>> = par::map_indexed(lat.n_unknowns(), |u| {
        let mut rows = Vec::with_capacity(na * nb);
        for i in 0..na {
            for j in 0..nb {
                let st = discretize_l(spec, lat, i, j, u)?;
                let mut source = st.running;
                let mut nbrs = Vec::with_capacity(st.entries.len());
                for e in &st.entries {
                    if e.weight == 0.0 {
                        continue;
                    }
                    match e.target {
                        ArmTarget::Unknown(c) => nbrs.push((c, e.weight)),
                        ArmTarget::Boundary(b) => source += e.weight * gvals[b],
                    }
                }
                rows.push(Row {
                    center: st.center,
                    source,
                    nbrs,
                });
            }
        }
        Ok(rows)
    });
    let mut rows = Vec::with_capacity(lat.n_unknowns() * na * nb);
    for r in per_node {
        rows.extend(r?);
    }
    Ok(Assembled { na, nb, rows })
}

fn linear_solve(asm: &Assembled, alpha: &[usize], beta: &[usize], m: &mut BandMatrix) -> Result<Vec<f64>> {
    m.clear();
    let n = alpha.len();
    let mut rhs = vec![0.0; n];
    for u in 0..n {
        let row = asm.row(u, alpha[u], beta[u]);
        m.add(u, u, -row.center);
        for &(c, w) in &row.nbrs {
            m.add(u, c, -w);
        }
        rhs[u] = row.source;
    }
    m.solve_in_place(&mut rhs)?;
    Ok(rhs)
}

fn residual(asm: &Assembled, vals: &[f64]) -> f64 {
    par::map_indexed(vals.len(), |u| asm.sup_inf(u, vals).abs())
        .into_iter()
        .fold(0.0, f64::max)
}

/// Solves `H_h[u] = 0` with `u = g` (the game's terminal payoff) off the
/// interior.
pub fn solve(spec: &GameSpec, lat: Arc<Lattice>, opts: &SolveOptions) -> Result<(ValueField, SolveReport)> {
    let coeffs = spec.coefficients().clone();
    solve_with_boundary(spec, lat, Arc::new(move |x: &[f64]| coeffs.terminal(x)), opts)
}

/// Policy iteration: the outer loop fixes α as the pointwise argmax of
/// `min_β`, the inner loop is Howard's method over β for that α.
pub fn solve_with_boundary(
    spec: &GameSpec,
    lat: Arc<Lattice>,
    g: BoundaryFn,
    opts: &SolveOptions,
) -> Result<(ValueField, SolveReport)> {
    if !(opts.tol > 0.0) || opts.max_outer == 0 || opts.max_inner == 0 {
        return Err(Error::usage("solve options need tol > 0 and positive iteration limits"));
    }
    let n = lat.n_unknowns();
    let gvals: Vec<f64> = lat.boundary_points().iter().map(|p| g(p)).collect();
    let asm = assemble(spec, &lat, &gvals)?;
    let mut m = BandMatrix::zeros(n, lat.bandwidth());
    let mut alpha = vec![0usize; n];
    let mut beta = vec![0usize; n];
    let mut history = Vec::new();
    let mut inner_total = 0;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut vals;

    for outer in 1..=opts.max_outer {
        let mut inner = 0;
        loop {
            vals = linear_solve(&asm, &alpha, &beta, &mut m)?;
            inner += 1;
            let umax = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let mut changed = false;
            for u in 0..n {
                let cur = asm.row(u, alpha[u], beta[u]);
                let now = cur.eval(&vals, u);
                let (j, v) = asm.inf_beta(u, alpha[u], &vals);
                if v < now - cur.tie(umax) {
                    beta[u] = j;
                    changed = true;
                }
            }
            if !changed || inner >= opts.max_inner {
                break;
            }
        }
        inner_total += inner;
        let res = residual(&asm, &vals);
        history.push(res);
        if best.as_ref().map_or(true, |(r, _)| res < *r) {
            best = Some((res, vals.clone()));
        }
        let finish = |converged: bool, vals: &[f64]| -> (ValueField, SolveReport) {
            let lower_gap = par::map_indexed(n, |u| asm.inf_sup(u, vals) - asm.sup_inf(u, vals))
                .into_iter()
                .fold(0.0, f64::max);
            let report = SolveReport {
                converged,
                outer_iterations: outer,
                inner_iterations: inner_total,
                residual: res,
                residual_history: history.clone(),
                lower_gap,
                unknowns: n,
                h: lat.h().to_vec(),
                tol: opts.tol,
            };
            (ValueField::from_unknowns(lat.clone(), vals, g.clone()), report)
        };
        if res <= opts.tol {
            return Ok(finish(true, &vals));
        }
        let umax = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut changed = false;
        for u in 0..n {
            let cur_row = asm.row(u, alpha[u], beta[u]);
            let tie = cur_row.tie(umax);
            let (_, cur) = asm.inf_beta(u, alpha[u], &vals);
            let mut pick = (alpha[u], cur);
            for i in 0..asm.na {
                let (_, v) = asm.inf_beta(u, i, &vals);
                if v > pick.1 {
                    pick = (i, v);
                }
            }
            if pick.0 != alpha[u] && pick.1 > cur + tie {
                alpha[u] = pick.0;
                beta[u] = asm.inf_beta(u, pick.0, &vals).0;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let (res, vals) = best.expect("at least one outer iteration ran");
    Err(Error::NoConvergence {
        iterations: history.len(),
        residual: res,
        best: Box::new(ValueField::from_unknowns(lat, &vals, g)),
    })
}

/// `max |H_h[u]|` over the interior nodes of `u`'s lattice, recomputed from
/// the stencil rows by a plain double loop (independent of the solver's
/// assembled operator).
pub fn discrete_residual(spec: &GameSpec, u: &ValueField) -> Result<f64> {
    let lat = u.lattice();
    let node_vals = u.values();
    let mut worst: f64 = 0.0;
    for unk in 0..lat.n_unknowns() {
        let me = node_vals[lat.interior()[unk]];
        let mut sup = f64::NEG_INFINITY;
        for i in 0..spec.controls.n_alpha() {
            let mut inf = f64::INFINITY;
            for j in 0..spec.controls.n_beta() {
                let st = discretize_l(spec, lat, i, j, unk)?;
                let mut v = st.center * me + st.running;
                for e in &st.entries {
                    let nv = match e.target {
                        ArmTarget::Unknown(c) => node_vals[lat.interior()[c]],
                        ArmTarget::Boundary(b) => u.boundary_value(&lat.boundary_points()[b]),
                    };
                    v += e.weight * nv;
                }
                inf = inf.min(v);
            }
            sup = sup.max(inf);
        }
        worst = worst.max(sup.abs());
    }
    Ok(worst)
}
