use std::sync::Arc;

use super::{Coefficients, ControlGrid, GameSpec};
use crate::error::Result;

type VecFn = Arc<dyn Fn(&[f64], &[f64], &[f64], &mut [f64]) + Send + Sync>;
type ScalarFn = Arc<dyn Fn(&[f64], &[f64], &[f64]) -> f64 + Send + Sync>;
type TerminalFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Base coefficients given as closures `(α, β, x)`. Unset coefficients are
/// zero; the parameter dependence is the default time change and rotation.
///
/// ```
/// use sdgame_core::game::{ControlGrid, FnGame};
/// let spec = FnGame::new()
///     .sigma(|_, _, _, s| s[0] = 2f64.sqrt())
///     .drift(|a, b, _, out| out[0] = a[0] - b[0])
///     .running(|_, _, _| 1.0)
///     .into_spec("bm", 1, 1, ControlGrid::scalar(&[-1.0, 0.0, 1.0], &[-1.0, 0.0, 1.0]).unwrap(), 0.5, 1.0, 4.0)
///     .unwrap();
/// assert_eq!(spec.dim, 1);
/// ```
#[derive(Clone)]
pub struct FnGame {
    sigma: VecFn,
    drift: VecFn,
    cost: ScalarFn,
    running: ScalarFn,
    terminal: TerminalFn,
}

impl Default for FnGame {
    fn default() -> Self {
        FnGame {
            sigma: Arc::new(|_, _, _, out| out.fill(0.0)),
            drift: Arc::new(|_, _, _, out| out.fill(0.0)),
            cost: Arc::new(|_, _, _| 0.0),
            running: Arc::new(|_, _, _| 0.0),
            terminal: Arc::new(|_| 0.0),
        }
    }
}

impl FnGame {
    pub fn new() -> Self {
        Self::default()
    }

    /// Row-major `d x d1` diffusion matrix; the buffer arrives zeroed.
    pub fn sigma(mut self, f: impl Fn(&[f64], &[f64], &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.sigma = Arc::new(f);
        self
    }

    /// The buffer arrives zeroed.
    pub fn drift(mut self, f: impl Fn(&[f64], &[f64], &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.drift = Arc::new(f);
        self
    }

    pub fn cost(mut self, f: impl Fn(&[f64], &[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.cost = Arc::new(f);
        self
    }

    pub fn running(mut self, f: impl Fn(&[f64], &[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.running = Arc::new(f);
        self
    }

    pub fn terminal(mut self, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.terminal = Arc::new(f);
        self
    }

    #[allow(clippy::too_many_arguments)]
    pub fn into_spec(
        self,
        name: &str,
        dim: usize,
        noise_dim: usize,
        controls: ControlGrid,
        delta: f64,
        delta1: f64,
        k0: f64,
    ) -> Result<GameSpec> {
        GameSpec::new(name, dim, noise_dim, delta, delta1, k0, controls, Arc::new(self))
    }
}

impl Coefficients for FnGame {
    fn sigma_base(&self, alpha: &[f64], beta: &[f64], x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        (self.sigma)(alpha, beta, x, out)
    }

    fn drift_base(&self, alpha: &[f64], beta: &[f64], x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        (self.drift)(alpha, beta, x, out)
    }

    fn cost_base(&self, alpha: &[f64], beta: &[f64], x: &[f64]) -> f64 {
        (self.cost)(alpha, beta, x)
    }

    fn running_base(&self, alpha: &[f64], beta: &[f64], x: &[f64]) -> f64 {
        (self.running)(alpha, beta, x)
    }

    fn terminal(&self, x: &[f64]) -> f64 {
        (self.terminal)(x)
    }
}
