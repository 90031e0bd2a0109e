//! Autonomy policy and blending arbitration.
//!
//! Each goal owns a potential field that attracts toward it and repels from
//! every other goal. The autonomy command for the most confident goal is
//! blended with the human command using a confidence-gated weight.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::InferenceContext;
use crate::model::{ControlCommand, Pose, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PotentialFieldParams {
    /// 1/s
    pub attractor_gain: f64,
    /// m²/s
    pub repeller_gain: f64,
    /// m
    pub repeller_radius: f64,
    /// m/s
    pub max_translational_speed: f64,
    /// rad/s
    pub max_rotational_speed: f64,
}

impl Default for PotentialFieldParams {
    fn default() -> Self {
        Self {
            attractor_gain: 1.0,
            repeller_gain: 0.05,
            repeller_radius: 0.5,
            max_translational_speed: 0.5,
            max_rotational_speed: 1.0,
        }
    }
}

impl PotentialFieldParams {
    pub fn validate(&self) -> Result<()> {
        let finite_non_negative = |v: f64| v.is_finite() && v >= 0.0;
        if !finite_non_negative(self.attractor_gain) || !finite_non_negative(self.repeller_gain) {
            return Err(Error::InvalidParameter("potential field gains must be >= 0".into()));
        }
        if !(self.repeller_radius > 0.0) {
            return Err(Error::InvalidParameter("repeller radius must be > 0".into()));
        }
        if !(self.max_translational_speed > 0.0) || !(self.max_rotational_speed > 0.0) {
            return Err(Error::InvalidParameter("speed caps must be > 0".into()));
        }
        Ok(())
    }
}

fn clamp_norm(v: Vector3<f64>, max: f64) -> Vector3<f64> {
    let n = v.norm();
    if n > max {
        v * (max / n)
    } else {
        v
    }
}

/// Attractor toward `target` plus inverse-square repellers around the other goals.
pub fn potential_field_command(
    pose: &Pose,
    target: usize,
    scene: &Scene,
    params: &PotentialFieldParams,
) -> Result<ControlCommand> {
    let goal = scene.goals.get(target).ok_or_else(|| {
        Error::InvalidParameter(format!("target goal {target} not in scene of {}", scene.goal_count()))
    })?;
    let mut translational = (goal.pose.position - pose.position) * params.attractor_gain;
    for other in scene.goals.iter().filter(|g| g.id != target) {
        let away = pose.position - other.pose.position;
        let d = away.norm();
        // Coincident with a repeller: direction undefined, skip it.
        if d == 0.0 || d >= params.repeller_radius {
            continue;
        }
        translational += away * (params.repeller_gain / (d * d * d));
    }
    let rotational = pose.rotation_error_to(&goal.pose) * params.attractor_gain;
    Ok(ControlCommand::new(
        clamp_norm(translational, params.max_translational_speed),
        clamp_norm(rotational, params.max_rotational_speed),
    ))
}

/// Autonomy command toward every goal of the scene, in goal order.
pub fn autonomy_commands(pose: &Pose, scene: &Scene, params: &PotentialFieldParams) -> Result<Vec<ControlCommand>> {
    (0..scene.goal_count())
        .map(|g| potential_field_command(pose, g, scene, params))
        .collect()
}

/// Inference features for a robot at `pose` in `scene`.
pub fn inference_context<'a>(
    pose: &Pose,
    scene: &'a Scene,
    params: &PotentialFieldParams,
) -> Result<InferenceContext<'a>> {
    InferenceContext::new(*pose, &scene.goals, autonomy_commands(pose, scene, params)?)
}

/// Breakpoints of the piecewise-linear blending weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlendingParams {
    pub rho1: f64,
    pub rho2: f64,
    pub rho3: f64,
}

impl BlendingParams {
    /// `rho1 = 1.2 / n_g`, `rho2 = 1.4 / n_g`, `rho3 = 0.7`.
    pub fn for_goals(n_g: usize) -> Self {
        let n = n_g as f64;
        Self {
            rho1: 1.2 / n,
            rho2: 1.4 / n,
            rho3: 0.7,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho2 > self.rho1) {
            return Err(Error::InvalidParameter(format!(
                "rho2 ({}) must exceed rho1 ({})",
                self.rho2, self.rho1
            )));
        }
        if !(0.0..=1.0).contains(&self.rho3) {
            return Err(Error::InvalidParameter(format!("rho3 ({}) must be in [0, 1]", self.rho3)));
        }
        Ok(())
    }
}

pub fn blending_alpha(p_star: f64, params: &BlendingParams) -> f64 {
    if p_star <= params.rho1 {
        0.0
    } else if p_star <= params.rho2 {
        params.rho3 * (p_star - params.rho1) / (params.rho2 - params.rho1)
    } else {
        params.rho3
    }
}

/// `u = alpha * u_a + (1 - alpha) * u_h`.
pub fn blend(u_h: &ControlCommand, u_a: &ControlCommand, alpha: f64) -> ControlCommand {
    // Endpoints are returned verbatim so zero assistance is bit-identical to teleoperation.
    if alpha == 0.0 {
        return *u_h;
    }
    if alpha == 1.0 {
        return *u_a;
    }
    *u_a * alpha + *u_h * (1.0 - alpha)
}
