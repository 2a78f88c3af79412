//! Bounded domains, shrunken subdomains and barrier functions.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{control_triples, GameSpec};
use crate::isaacs::{apply_l, FieldDerivatives};

/// A bounded convex domain. Points with `signed_distance == 0` are on the
/// boundary and count as exited.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

/// Where a segment leaves the domain.
#[derive(Clone, Debug, PartialEq)]
pub struct Crossing {
    pub point: Vec<f64>,
    /// Fraction of the segment travelled before the crossing.
    pub theta: f64,
}

const BISECTION_TOL: f64 = 1e-12;

impl Domain {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        let d = Domain::Interval { a, b };
        d.validate()?;
        Ok(d)
    }

    pub fn cube(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let d = Domain::Box { lo, hi };
        d.validate()?;
        Ok(d)
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let d = Domain::Ball { center, radius };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Domain::Interval { a, b } => a.is_finite() && b.is_finite() && a < b,
            Domain::Box { lo, hi } => {
                !lo.is_empty()
                    && lo.len() == hi.len()
                    && lo.iter().zip(hi).all(|(l, h)| l.is_finite() && h.is_finite() && l < h)
            }
            Domain::Ball { center, radius } => {
                !center.is_empty() && center.iter().all(|c| c.is_finite()) && radius.is_finite() && *radius > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::usage(format!("degenerate domain {self:?}")))
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Box { lo, .. } => lo.len(),
            Domain::Ball { center, .. } => center.len(),
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Interval { a, b } => b - a,
            Domain::Box { lo, hi } => lo.iter().zip(hi).map(|(l, h)| (h - l) * (h - l)).sum::<f64>().sqrt(),
            Domain::Ball { radius, .. } => 2.0 * radius,
        }
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Domain::Interval { a, b } => (vec![*a], vec![*b]),
            Domain::Box { lo, hi } => (lo.clone(), hi.clone()),
            Domain::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
        }
    }

    /// Negative inside, zero on the boundary, positive outside.
    pub fn signed_distance(&self, x: &[f64]) -> f64 {
        match self {
            Domain::Interval { a, b } => (a - x[0]).max(x[0] - b),
            Domain::Box { lo, hi } => {
                let mut outside = 0.0;
                let mut inside = f64::NEG_INFINITY;
                for ((l, h), xi) in lo.iter().zip(hi).zip(x) {
                    let q = (l - xi).max(xi - h);
                    inside = inside.max(q);
                    if q > 0.0 {
                        outside += q * q;
                    }
                }
                if inside > 0.0 {
                    outside.sqrt()
                } else {
                    inside
                }
            }
            Domain::Ball { center, radius } => {
                center.iter().zip(x).map(|(c, xi)| (xi - c) * (xi - c)).sum::<f64>().sqrt() - radius
            }
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.signed_distance(x) < 0.0
    }

    /// First point of the segment `x_prev → x_next` outside the domain, by
    /// bisection on the signed distance. `None` if `x_next` is inside.
    pub fn boundary_crossing(&self, x_prev: &[f64], x_next: &[f64]) -> Option<Crossing> {
        let end = self.signed_distance(x_next);
        if end < 0.0 {
            return None;
        }
        if end == 0.0 {
            return Some(Crossing {
                point: x_next.to_vec(),
                theta: 1.0,
            });
        }
        let lerp = |t: f64| -> Vec<f64> { x_prev.iter().zip(x_next).map(|(p, n)| p + t * (n - p)).collect() };
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while hi - lo > BISECTION_TOL {
            let mid = 0.5 * (lo + hi);
            if self.signed_distance(&lerp(mid)) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut point = lerp(hi);
        self.snap_to_boundary(&mut point);
        Some(Crossing { point, theta: hi })
    }

    /// Moves a point that is within rounding of the boundary onto it.
    fn snap_to_boundary(&self, x: &mut [f64]) {
        match self {
            Domain::Interval { a, b } => {
                if (x[0] - a).abs() < (x[0] - b).abs() {
                    x[0] = *a;
                } else {
                    x[0] = *b;
                }
            }
            Domain::Box { .. } => {
                let (p, _) = self.nearest_boundary(x);
                if self.signed_distance(x) <= 0.0 {
                    x.copy_from_slice(&p);
                }
            }
            Domain::Ball { center, radius } => {
                let r = center.iter().zip(x.iter()).map(|(c, xi)| (xi - c) * (xi - c)).sum::<f64>().sqrt();
                if r > 0.0 {
                    for (xi, c) in x.iter_mut().zip(center) {
                        *xi = c + (*xi - c) * radius / r;
                    }
                }
            }
        }
    }

    /// Nearest boundary point and unit outward normal there.
    pub fn nearest_boundary(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match self {
            Domain::Interval { a, b } => {
                if x[0] - a <= b - x[0] {
                    (vec![*a], vec![-1.0])
                } else {
                    (vec![*b], vec![1.0])
                }
            }
            Domain::Box { lo, hi } => {
                let mut best = (f64::INFINITY, 0usize, false);
                for (i, (l, h)) in lo.iter().zip(hi).enumerate() {
                    let (dl, dh) = ((x[i] - l).abs(), (h - x[i]).abs());
                    if dl < best.0 {
                        best = (dl, i, false);
                    }
                    if dh < best.0 {
                        best = (dh, i, true);
                    }
                }
                let (_, axis, upper) = best;
                let mut p = x.to_vec();
                let mut n = vec![0.0; x.len()];
                if upper {
                    p[axis] = hi[axis];
                    n[axis] = 1.0;
                } else {
                    p[axis] = lo[axis];
                    n[axis] = -1.0;
                }
                (p, n)
            }
            Domain::Ball { center, radius } => {
                let r = center.iter().zip(x).map(|(c, xi)| (xi - c) * (xi - c)).sum::<f64>().sqrt();
                let n: Vec<f64> = if r > 0.0 {
                    x.iter().zip(center).map(|(xi, c)| (xi - c) / r).collect()
                } else {
                    let mut e = vec![0.0; x.len()];
                    e[0] = 1.0;
                    e
                };
                let p = center.iter().zip(&n).map(|(c, ni)| c + radius * ni).collect();
                (p, n)
            }
        }
    }

    /// `{x : signed_distance(x) < -rho}`.
    pub fn shrink(&self, rho: f64) -> Result<Domain> {
        let d = match self {
            Domain::Interval { a, b } => Domain::Interval { a: a + rho, b: b - rho },
            Domain::Box { lo, hi } => Domain::Box {
                lo: lo.iter().map(|l| l + rho).collect(),
                hi: hi.iter().map(|h| h - rho).collect(),
            },
            Domain::Ball { center, radius } => Domain::Ball {
                center: center.clone(),
                radius: radius - rho,
            },
        };
        d.validate()?;
        Ok(d)
    }

    /// Roughly `n` points on the boundary (both endpoints for an interval).
    pub fn boundary_samples(&self, n: usize) -> Vec<Vec<f64>> {
        let n = n.max(1);
        match self {
            Domain::Interval { a, b } => vec![vec![*a], vec![*b]],
            Domain::Box { lo, hi } => {
                let d = lo.len();
                let per_axis = ((n as f64).powf(1.0 / d.max(2) as f64).ceil() as usize).max(2);
                let mut out = Vec::new();
                for axis in 0..d {
                    for &face in &[lo[axis], hi[axis]] {
                        for p in grid_points(lo, hi, per_axis) {
                            let mut p = p;
                            p[axis] = face;
                            out.push(p);
                        }
                    }
                }
                out
            }
            Domain::Ball { center, radius } => {
                let d = center.len();
                if d == 1 {
                    return vec![vec![center[0] - radius], vec![center[0] + radius]];
                }
                // Points on great circles in every coordinate plane.
                let mut out = Vec::new();
                for i in 0..d {
                    for j in (i + 1)..d {
                        for k in 0..n {
                            let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                            let mut p = center.clone();
                            p[i] += radius * t.cos();
                            p[j] += radius * t.sin();
                            out.push(p);
                        }
                    }
                }
                out
            }
        }
    }

    /// Tensor grid with `per_axis` points per axis strictly inside the
    /// bounding box, filtered to the domain.
    pub fn interior_samples(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let (lo, hi) = self.bounding_box();
        let n = per_axis.max(1);
        let h: Vec<f64> = lo.iter().zip(&hi).map(|(l, u)| (u - l) / (n + 1) as f64).collect();
        let lo_in: Vec<f64> = lo.iter().zip(&h).map(|(l, hh)| l + hh).collect();
        let hi_in: Vec<f64> = hi.iter().zip(&h).map(|(u, hh)| u - hh).collect();
        grid_points(&lo_in, &hi_in, n).into_iter().filter(|p| self.contains(p)).collect()
    }
}

fn grid_points(lo: &[f64], hi: &[f64], per_axis: usize) -> Vec<Vec<f64>> {
    let d = lo.len();
    let mut out = vec![Vec::with_capacity(d)];
    for axis in 0..d {
        let mut next = Vec::with_capacity(out.len() * per_axis);
        for p in &out {
            for k in 0..per_axis {
                let t = if per_axis == 1 { 0.5 } else { k as f64 / (per_axis - 1) as f64 };
                let mut q = p.clone();
                q.push(lo[axis] + t * (hi[axis] - lo[axis]));
                next.push(q);
            }
        }
        out = next;
    }
    out
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Interval { a, b } => write!(f, "({a}, {b})"),
            Domain::Box { lo, hi } => write!(f, "box {lo:?}..{hi:?}"),
            Domain::Ball { center, radius } => write!(f, "ball({center:?}, {radius})"),
        }
    }
}

/// `D_n = {x : signed_distance(x) < -ρ_n}` for a nonincreasing list of
/// radii. A zero radius gives `D_n = D`.
#[derive(Clone, Debug)]
pub struct SubdomainFamily {
    parent: Domain,
    radii: Vec<f64>,
}

impl SubdomainFamily {
    pub fn new(parent: Domain, radii: Vec<f64>) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::usage("subdomain family needs at least one radius"));
        }
        if radii.iter().any(|r| !(*r >= 0.0)) || radii.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::usage("shrink radii must be nonnegative and nonincreasing"));
        }
        for r in &radii {
            parent.shrink(*r)?;
        }
        Ok(SubdomainFamily { parent, radii })
    }

    /// `ρ_n = 2^{-n}` for the given levels.
    pub fn dyadic(parent: Domain, levels: impl IntoIterator<Item = u32>) -> Result<Self> {
        let radii = levels.into_iter().map(|n| 0.5f64.powi(n as i32)).collect();
        Self::new(parent, radii)
    }

    pub fn parent(&self) -> &Domain {
        &self.parent
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn member(&self, n: usize) -> Domain {
        self.parent.shrink(self.radii[n]).expect("radii validated at construction")
    }

    pub fn members(&self) -> Vec<Domain> {
        (0..self.len()).map(|n| self.member(n)).collect()
    }
}

type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type DerivFn = Arc<dyn Fn(&[f64]) -> FieldDerivatives + Send + Sync>;

/// A nonnegative function vanishing on the boundary with `LG ≤ -1` for
/// every control triple.
#[derive(Clone)]
pub struct Barrier {
    value: ScalarFn,
    derivatives: Option<DerivFn>,
}

impl fmt::Debug for Barrier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Barrier")
            .field("has_derivatives", &self.derivatives.is_some())
            .finish()
    }
}

impl Barrier {
    pub fn new(value: ScalarFn, derivatives: Option<DerivFn>) -> Self {
        Barrier { value, derivatives }
    }

    /// `scale·(x - a)(b - x)` on an interval and `scale·(r² - |x - c|²)` on a
    /// ball; on a box the product of the per-axis slab quadratics.
    pub fn quadratic(dom: &Domain, scale: f64) -> Barrier {
        match dom.clone() {
            Domain::Interval { a, b } => Barrier::new(
                Arc::new(move |x| scale * (x[0] - a) * (b - x[0])),
                Some(Arc::new(move |x| FieldDerivatives {
                    value: scale * (x[0] - a) * (b - x[0]),
                    gradient: vec![scale * (a + b - 2.0 * x[0])],
                    hessian: vec![-2.0 * scale],
                })),
            ),
            Domain::Ball { center, radius } => {
                let c2 = center.clone();
                Barrier::new(
                    Arc::new(move |x| {
                        scale * (radius * radius - x.iter().zip(&center).map(|(xi, c)| (xi - c) * (xi - c)).sum::<f64>())
                    }),
                    Some(Arc::new(move |x| {
                        let d = x.len();
                        let r2: f64 = x.iter().zip(&c2).map(|(xi, c)| (xi - c) * (xi - c)).sum();
                        let mut hessian = vec![0.0; d * d];
                        for i in 0..d {
                            hessian[i * d + i] = -2.0 * scale;
                        }
                        FieldDerivatives {
                            value: scale * (radius * radius - r2),
                            gradient: x.iter().zip(&c2).map(|(xi, c)| -2.0 * scale * (xi - c)).collect(),
                            hessian,
                        }
                    })),
                )
            }
            Domain::Box { lo, hi } => {
                let (lo2, hi2) = (lo.clone(), hi.clone());
                Barrier::new(
                    Arc::new(move |x| scale * x.iter().enumerate().map(|(i, xi)| (xi - lo[i]) * (hi[i] - xi)).product::<f64>()),
                    Some(Arc::new(move |x| box_product_derivatives(x, &lo2, &hi2, scale))),
                )
            }
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn derivatives(&self, x: &[f64]) -> Option<FieldDerivatives> {
        self.derivatives.as_ref().map(|d| d(x))
    }
}

fn box_product_derivatives(x: &[f64], lo: &[f64], hi: &[f64], scale: f64) -> FieldDerivatives {
    let d = x.len();
    let q: Vec<f64> = (0..d).map(|i| (x[i] - lo[i]) * (hi[i] - x[i])).collect();
    let dq: Vec<f64> = (0..d).map(|i| lo[i] + hi[i] - 2.0 * x[i]).collect();
    let prod_except = |skip: &[usize]| -> f64 { (0..d).filter(|k| !skip.contains(k)).map(|k| q[k]).product() };
    let value = scale * q.iter().product::<f64>();
    let gradient = (0..d).map(|i| scale * dq[i] * prod_except(&[i])).collect();
    let mut hessian = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            hessian[i * d + j] = if i == j {
                scale * -2.0 * prod_except(&[i])
            } else {
                scale * dq[i] * dq[j] * prod_except(&[i, j])
            };
        }
    }
    FieldDerivatives { value, gradient, hessian }
}

#[derive(Clone, Debug, Serialize)]
pub struct BarrierReport {
    /// Max of `L^{αβ}G(p, x)` over the samples and every control triple.
    pub max_lg: f64,
    /// Sample index and controls `(α, β, p)` attaining it.
    pub argmax: (usize, usize, usize, usize),
    pub min_value: f64,
    /// Max `|G|` on boundary samples.
    pub boundary_max: f64,
    pub pass: bool,
}

pub fn verify_barrier(spec: &GameSpec, bar: &Barrier, dom: &Domain, samples: &[Vec<f64>]) -> Result<BarrierReport> {
    if bar.derivatives.is_none() {
        return Err(Error::usage("barrier has no second-derivative evaluator"));
    }
    if samples.is_empty() {
        return Err(Error::usage("barrier check needs sample points"));
    }
    let mut max_lg = f64::NEG_INFINITY;
    let mut argmax = (0, 0, 0, 0);
    let mut min_value = f64::INFINITY;
    for (s, x) in samples.iter().enumerate() {
        if !dom.contains(x) {
            return Err(Error::OutsideDomain(x.clone()));
        }
        let du = bar.derivatives(x).expect("checked above");
        min_value = min_value.min(du.value);
        for (i, j, k) in control_triples(spec) {
            let lg = apply_l(spec, i, j, &spec.controls.params()[k], x, &du);
            if lg > max_lg {
                max_lg = lg;
                argmax = (s, i, j, k);
            }
        }
    }
    let boundary_max = dom
        .boundary_samples(64)
        .iter()
        .map(|x| bar.value(x).abs())
        .fold(0.0, f64::max);
    let pass = max_lg <= -1.0 + 1e-9 && min_value >= 0.0 && boundary_max <= 1e-9;
    Ok(BarrierReport {
        max_lg,
        argmax,
        min_value,
        boundary_max,
        pass,
    })
}

#[cfg(test)]
mod tests;
