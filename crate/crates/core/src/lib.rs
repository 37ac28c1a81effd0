//! Layered functional-derivative optimizer ("MLP_f") for hierarchically
//! composed objectives.
//!
//! The crate is split into four parts:
//!
//! * [`funcgraph`] represents an objective as an ordered chain of scalar
//!   layers with analytic partial derivatives.
//! * [`mlpf`] turns a cost residual into an update through a cost kernel,
//!   per-layer sensitivities and `a·t + b` neurons, and runs the optimizer
//!   loop next to a plain chain-rule gradient-descent baseline.
//! * [`benchmarks`] builds the Cross-Leg Table, DeVilliers-Glasser 02 and
//!   Lennard-Jones 13 problems.
//! * [`harness`] parses run configs, executes experiments and comparison
//!   sweeps, writes traces and evaluates the acceptance criteria.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmarks;
pub mod error;
pub mod funcgraph;
pub mod harness;
pub mod mlpf;

pub use error::{Error, Result};
