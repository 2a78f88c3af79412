//! Numerical engine for zero-sum stochastic differential games on bounded
//! domains.
//!
//! The pipeline is: describe a game ([`game`]) on a domain ([`domain`]),
//! solve the Isaacs Dirichlet problem with a monotone finite-difference
//! scheme ([`fd`]), build the piecewise-constant ε-optimal strategies from
//! the solved field ([`strategy`]), simulate the controlled diffusion
//! ([`sde`]) and check the dynamic programming identities and the auxiliary
//! inequalities statistically ([`verify`]).
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod domain;
pub mod error;
pub mod fd;
pub mod game;
pub mod isaacs;
mod par;
pub mod rng;
pub mod sde;
pub mod stats;
pub mod strategy;
pub mod verify;

pub use domain::{Barrier, Domain, SubdomainFamily};
pub use error::{Error, Result};
pub use fd::{Lattice, SolveOptions, SolveReport, ValueField};
pub use game::{ControlGrid, GameSpec, ParamPoint};
pub use isaacs::FieldDerivatives;
pub use sde::{LambdaRule, ParamProcessRule, PathRecord, SimConfig, StopRule};
pub use strategy::{AlphaPlay, AlphaResponse, ControlSignal, Strategy};
pub use verify::{CheckReport, McConfig, McEstimate};
