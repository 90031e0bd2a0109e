//! Intent inference, disambiguation and arbitration for shared-control
//! teleoperation, with a simulation harness for benchmarking predictors.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod arbitration;
pub mod config;
pub mod disambiguation;
pub mod error;
pub mod inference;
pub mod matrix;
pub mod model;
pub mod simulation;

pub use error::{Error, Result};
pub use model::{BeliefState, ControlCommand, ControlDimension, ControlMode, Goal, InterfaceSpec, Pose, Scene, Sign};
