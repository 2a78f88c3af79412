use thiserror::Error;

use crate::fd::ValueField;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("usage error: {0}")]
    Usage(String),

    /// No control on the grid satisfies the selector inequality: the field
    /// is not an ε-super/subsolution at this point.
    #[error("no admissible {player} index at x = {x:?} (best value {best:.3e}, tolerance {eps:.3e})")]
    NoAdmissibleIndex {
        player: &'static str,
        x: Vec<f64>,
        best: f64,
        eps: f64,
    },

    /// The cross-derivative terms cannot be split into nonnegative
    /// directional weights at this node.
    #[error("mesh too coarse for a monotone stencil at node {node} (axis weight {weight:.3e})")]
    MeshTooCoarse { node: usize, weight: f64 },

    #[error("policy iteration did not reach tolerance after {iterations} outer iterations (residual {residual:.3e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        best: Box<ValueField>,
    },

    #[error("singular frozen-policy linear system (pivot {pivot:.3e} at row {row})")]
    SingularLinearSystem { row: usize, pivot: f64 },

    #[error("point {0:?} is outside the domain")]
    OutsideDomain(Vec<f64>),

    #[error("non-finite coefficient at t = {t}, x = {x:?}")]
    StepRejected { t: f64, x: Vec<f64> },

    #[error("field residual {residual:.3e} exceeds {limit:.3e}")]
    ResidualTooLarge { residual: f64, limit: f64 },

    #[error("path {path_id} failed after {completed} completed paths: {source}")]
    PathFailed {
        path_id: u64,
        completed: usize,
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }
}
