//! Monotone finite-difference discretization of the Isaacs Dirichlet
//! problem and its policy-iteration solve.

mod band;
mod field;
mod lattice;
mod solve;
mod stencil;

pub use band::BandMatrix;
pub use field::{BoundaryFn, ValueField};
pub use lattice::{Arm, ArmTarget, Lattice};
pub use solve::{discrete_residual, solve, solve_with_boundary, SolveOptions, SolveReport};
pub use stencil::{discretize_l, StencilEntry, StencilRow};
