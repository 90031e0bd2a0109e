//! Point-robot world, simulated operator, trials, benchmarks and metrics.

pub mod benchmark;
pub mod human;
pub mod kinematics;
pub mod log;
pub mod metrics;
pub mod trial;
