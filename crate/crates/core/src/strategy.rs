//! Nonanticipating strategies and the mesh-frozen ε-optimal constructions.
//!
//! The β-player's strategy answers the live α with the selector evaluated
//! at the state frozen on the mesh `κ_n(t) = ⌊nt⌋/n`; the α-player's
//! response uses the same mesh with the α selector. Both are single-path
//! objects: call [`Strategy::reset`] (the simulator does) before reuse.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::fd::ValueField;
use crate::game::GameSpec;
use crate::isaacs::{isaacs_h, select_alpha, select_beta, FieldDerivatives};

type SignalFn = Arc<dyn Fn(f64, &[f64]) -> usize + Send + Sync>;
type ResponseFn = Arc<dyn Fn(f64, &[f64], usize) -> usize + Send + Sync>;

/// An α control path.
#[derive(Clone)]
pub enum ControlSignal {
    Constant(usize),
    /// `indices[k]` on `[breakpoints[k], breakpoints[k + 1])`.
    Piecewise { breakpoints: Vec<f64>, indices: Vec<usize> },
    Feedback(SignalFn),
}

impl fmt::Debug for ControlSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControlSignal::Constant(i) => write!(f, "Constant({i})"),
            ControlSignal::Piecewise { breakpoints, indices } => {
                write!(f, "Piecewise({breakpoints:?}, {indices:?})")
            }
            ControlSignal::Feedback(_) => write!(f, "Feedback"),
        }
    }
}

impl ControlSignal {
    pub fn piecewise(breakpoints: Vec<f64>, indices: Vec<usize>) -> Result<Self> {
        if breakpoints.is_empty() || breakpoints.len() != indices.len() {
            return Err(Error::usage("piecewise signal needs one index per breakpoint"));
        }
        if breakpoints[0] != 0.0 || breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::usage("breakpoints must start at 0 and increase"));
        }
        Ok(ControlSignal::Piecewise { breakpoints, indices })
    }

    pub fn feedback(f: impl Fn(f64, &[f64]) -> usize + Send + Sync + 'static) -> Self {
        ControlSignal::Feedback(Arc::new(f))
    }

    pub fn at(&self, t: f64, x: &[f64]) -> usize {
        match self {
            ControlSignal::Constant(i) => *i,
            ControlSignal::Piecewise { breakpoints, indices } => {
                let k = breakpoints.partition_point(|&b| b <= t);
                indices[k.saturating_sub(1)]
            }
            ControlSignal::Feedback(f) => f(t, x),
        }
    }
}

/// When the frozen state was taken and what it was.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FreezeEvent {
    /// Query time at which the state was read.
    pub t: f64,
    /// The mesh time `k/n` this freeze belongs to.
    pub mesh_time: f64,
    pub x: Vec<f64>,
}

/// Tracks the current interval of the mesh `k/n`.
#[derive(Clone, Debug)]
struct MeshClock {
    n: u32,
    index: Option<u64>,
}

impl MeshClock {
    fn new(n: u32) -> Self {
        MeshClock { n, index: None }
    }

    /// True when `t` opens a new mesh interval (always on the first call).
    fn tick(&mut self, t: f64) -> Option<u64> {
        let m = (self.n as f64 * t + 1e-9).floor().max(0.0) as u64;
        match self.index {
            Some(prev) if m <= prev => None,
            _ => {
                self.index = Some(m);
                Some(m)
            }
        }
    }
}

/// Shared ingredients of the mesh constructions.
#[derive(Clone)]
struct Frozen {
    spec: GameSpec,
    dom: Domain,
    field: Arc<ValueField>,
    eps: f64,
    clock: MeshClock,
    x: Vec<f64>,
    /// `None` when the frozen state is off the domain.
    du: Option<FieldDerivatives>,
    log: Option<Vec<FreezeEvent>>,
}

impl Frozen {
    fn new(spec: &GameSpec, dom: &Domain, field: Arc<ValueField>, eps: f64, n: u32) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::usage("ε must be positive"));
        }
        if n == 0 {
            return Err(Error::usage("mesh n must be positive"));
        }
        if field.lattice().dim() != spec.dim {
            return Err(Error::usage("field and game dimensions differ"));
        }
        Ok(Frozen {
            spec: spec.clone(),
            dom: dom.clone(),
            field,
            eps,
            clock: MeshClock::new(n),
            x: Vec::new(),
            du: None,
            log: None,
        })
    }

    /// Freezes `x` if `t` enters a new mesh interval; true if it did.
    fn update(&mut self, t: f64, x: &[f64]) -> bool {
        let Some(m) = self.clock.tick(t) else { return false };
        self.x.clear();
        self.x.extend_from_slice(x);
        self.du = if self.dom.contains(x) {
            self.field.field_derivatives(x).ok()
        } else {
            None
        };
        if let Some(log) = &mut self.log {
            log.push(FreezeEvent {
                t,
                mesh_time: m as f64 / self.clock.n as f64,
                x: x.to_vec(),
            });
        }
        true
    }

    fn reset(&mut self) {
        self.clock.index = None;
        self.du = None;
        if let Some(log) = &mut self.log {
            log.clear();
        }
    }
}

/// The β-player's ε-optimal mesh strategy.
#[derive(Clone)]
pub struct EpsOptimalBeta {
    frozen: Frozen,
    /// Selector result per α index for the current mesh interval.
    cache: Vec<Option<usize>>,
}

/// A β strategy: a nonanticipating map from the α path (and the state) to β.
#[derive(Clone)]
pub enum Strategy {
    Constant(usize),
    Feedback(ResponseFn),
    EpsOptimalBeta(Box<EpsOptimalBeta>),
}

impl fmt::Debug for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Constant(j) => write!(f, "Constant({j})"),
            Strategy::Feedback(_) => write!(f, "Feedback"),
            Strategy::EpsOptimalBeta(b) => write!(f, "EpsOptimalBeta(ε = {}, n = {})", b.frozen.eps, b.frozen.clock.n),
        }
    }
}

impl Strategy {
    pub fn feedback(f: impl Fn(f64, &[f64], usize) -> usize + Send + Sync + 'static) -> Self {
        Strategy::Feedback(Arc::new(f))
    }

    pub fn eps_optimal_beta(spec: &GameSpec, dom: &Domain, field: Arc<ValueField>, eps: f64, n: u32) -> Result<Self> {
        let frozen = Frozen::new(spec, dom, field, eps, n)?;
        Ok(Strategy::EpsOptimalBeta(Box::new(EpsOptimalBeta {
            cache: vec![None; spec.controls.n_alpha()],
            frozen,
        })))
    }

    /// β at time `t` given the live state and α. Calls along one path must
    /// have nondecreasing `t`.
    pub fn beta_step(&mut self, t: f64, x: &[f64], alpha: usize) -> Result<usize> {
        match self {
            Strategy::Constant(j) => Ok(*j),
            Strategy::Feedback(f) => Ok(f(t, x, alpha)),
            Strategy::EpsOptimalBeta(b) => {
                if b.frozen.update(t, x) {
                    b.cache.fill(None);
                }
                if let Some(j) = b.cache[alpha] {
                    return Ok(j);
                }
                let fr = &b.frozen;
                let j = match &fr.du {
                    None => 0,
                    Some(du) => select_beta(&fr.spec, &fr.dom, alpha, &fr.x, du, fr.eps)?,
                };
                b.cache[alpha] = Some(j);
                Ok(j)
            }
        }
    }

    pub fn reset(&mut self) {
        if let Strategy::EpsOptimalBeta(b) = self {
            b.frozen.reset();
            b.cache.fill(None);
        }
    }

    /// Starts recording every state freeze.
    pub fn record_freezes(&mut self) {
        if let Strategy::EpsOptimalBeta(b) = self {
            b.frozen.log = Some(Vec::new());
        }
    }

    pub fn freeze_log(&self) -> Option<&[FreezeEvent]> {
        match self {
            Strategy::EpsOptimalBeta(b) => b.frozen.log.as_deref(),
            _ => None,
        }
    }
}

/// The α-player's ε-optimal mesh response `α_t = ᾱ(x_{κ_n(t)})`.
#[derive(Clone)]
pub struct AlphaResponse {
    frozen: Frozen,
    current: Option<usize>,
}

impl fmt::Debug for AlphaResponse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AlphaResponse(ε = {}, n = {})", self.frozen.eps, self.frozen.clock.n)
    }
}

impl AlphaResponse {
    pub fn new(spec: &GameSpec, dom: &Domain, field: Arc<ValueField>, eps: f64, n: u32) -> Result<Self> {
        Ok(AlphaResponse {
            frozen: Frozen::new(spec, dom, field, eps, n)?,
            current: None,
        })
    }

    pub fn alpha_step(&mut self, t: f64, x: &[f64]) -> Result<usize> {
        if self.frozen.update(t, x) || self.current.is_none() {
            let fr = &self.frozen;
            self.current = Some(match &fr.du {
                None => 0,
                Some(du) => select_alpha(&fr.spec, &fr.dom, &fr.x, du, fr.eps)?,
            });
        }
        Ok(self.current.expect("set above"))
    }

    pub fn reset(&mut self) {
        self.frozen.reset();
        self.current = None;
    }

    pub fn record_freezes(&mut self) {
        self.frozen.log = Some(Vec::new());
    }

    pub fn freeze_log(&self) -> Option<&[FreezeEvent]> {
        self.frozen.log.as_deref()
    }
}

/// What the α-player does: an open-loop/feedback signal or the ε-optimal
/// response.
#[derive(Clone, Debug)]
pub enum AlphaPlay {
    Signal(ControlSignal),
    Response(AlphaResponse),
}

impl AlphaPlay {
    pub fn constant(i: usize) -> Self {
        AlphaPlay::Signal(ControlSignal::Constant(i))
    }

    pub fn step(&mut self, t: f64, x: &[f64]) -> Result<usize> {
        match self {
            AlphaPlay::Signal(s) => Ok(s.at(t, x)),
            AlphaPlay::Response(r) => r.alpha_step(t, x),
        }
    }

    pub fn reset(&mut self) {
        if let AlphaPlay::Response(r) = self {
            r.reset();
        }
    }
}

/// `max |H[u]|` over interior nodes whose full stencil neighbourhood is
/// inside the domain, with `u`'s nodal difference derivatives.
pub fn pointwise_residual(spec: &GameSpec, u: &ValueField) -> f64 {
    let lat = u.lattice();
    let d = lat.dim();
    let mut worst: f64 = 0.0;
    for &k in lat.interior() {
        let idx = lat.multi_index(k);
        let full = lat.directions().iter().all(|dir| {
            [1i64, -1].iter().all(|&s| {
                let mut nb = 0usize;
                for i in 0..d {
                    let v = idx[i] as i64 + s * dir[i];
                    if v < 0 || v >= lat.counts()[i] as i64 {
                        return false;
                    }
                    nb += v as usize * lat.stride(i);
                }
                lat.unknown_of(nb).is_some()
            })
        });
        if full {
            let x = lat.coord(k);
            worst = worst.max(isaacs_h(spec, &x, &u.node_derivatives(k)).value.abs());
        }
    }
    worst
}

/// Both players' mesh-`n` constructions from one field. The field must be a
/// pointwise `ε/2`-solution on its full-stencil nodes.
pub fn strategy_pair_saddle(
    spec: &GameSpec,
    dom: &Domain,
    u: Arc<ValueField>,
    eps: f64,
    n: u32,
) -> Result<(AlphaResponse, Strategy)> {
    let residual = pointwise_residual(spec, &u);
    if residual > 0.5 * eps {
        return Err(Error::ResidualTooLarge {
            residual,
            limit: 0.5 * eps,
        });
    }
    Ok((
        AlphaResponse::new(spec, dom, u.clone(), eps, n)?,
        Strategy::eps_optimal_beta(spec, dom, u, eps, n)?,
    ))
}

/// `⌈1/(10·dt)⌉`, the smallest mesh with `1/n ≤ 10·dt`.
pub fn default_mesh(dt: f64) -> u32 {
    (1.0 / (10.0 * dt)).ceil().max(1.0) as u32
}

/// Ten times the solver tolerance.
pub fn default_eps(solver_tol: f64) -> f64 {
    10.0 * solver_tol
}
