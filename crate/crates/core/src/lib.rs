//! Displacement-consensus formation control toolkit.
//!
//! The crate covers the full path from a graph and a reference shape to
//! simulated trajectories:
//!
//! - [`graph`]: incidence matrix, weighted Laplacian, connectivity and tree tests.
//! - [`shape`]: configurations, reference-shape decomposition, relative positions
//!   and desired-shape membership.
//! - [`maneuver`]: motion parameters that make the formation translate at a
//!   designed velocity, the gain bound for tree graphs and the maneuvering law.
//! - [`spectrum`]: spectrum and stability report of a closed-loop matrix.
//! - [`robustness`]: sensing scale factors and misalignments, and the closed-form
//!   prediction of the distorted shape and residual drift they cause.
//! - [`simulator`]: fixed-step RK4 integration of the closed loops and
//!   convergence metrics.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod framework;
pub mod graph;
pub mod linalg;
pub mod maneuver;
pub mod robustness;
pub mod shape;
pub mod simulator;
pub mod spectrum;

pub use error::{FormationError, Result};
pub use framework::Framework;
pub use graph::{Graph, GraphClass};
pub use shape::{Configuration, ReferenceShape, RelPosStack};
