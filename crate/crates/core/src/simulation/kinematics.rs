//! Point-robot kinematics.

use nalgebra::UnitQuaternion;

use crate::model::{ControlCommand, Pose};

/// Integrates a Cartesian velocity over `dt`: Euler for position, the
/// rotation-vector exponential (world frame) for orientation.
pub fn step_kinematics(pose: &Pose, u: &ControlCommand, dt: f64) -> Pose {
    let position = pose.position + u.translational * dt;
    let rotation = UnitQuaternion::from_scaled_axis(u.rotational * dt);
    Pose::new(position, rotation * pose.orientation)
}
