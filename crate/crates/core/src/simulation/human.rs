//! Simulated teleoperator: noisy straight-line commands toward a hidden goal
//! that is periodically resampled, with random dropout and one silent window.

use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ControlCommand, Goal, Pose};

/// Silent stretch of a trial, as fractions of `max_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SilentWindow {
    /// Start as a fraction of the trial; `None` draws it uniformly.
    pub start_fraction: Option<f64>,
    pub length_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulatedHumanParams {
    /// Angular standard deviation of the heading perturbation, radians.
    pub direction_noise_sigma: f64,
    /// Per-step probability of a zeroed command.
    pub dropout_probability: f64,
    pub silent_window: SilentWindow,
    /// Inclusive range of steps between goal resampling events.
    pub goal_transition_interval: [usize; 2],
    /// Probability that a resampling event moves to a different goal.
    pub goal_switch_probability: f64,
    /// Commanded speed, m/s.
    pub speed: f64,
}

impl Default for SimulatedHumanParams {
    fn default() -> Self {
        Self {
            direction_noise_sigma: 0.2,
            dropout_probability: 0.1,
            silent_window: SilentWindow {
                start_fraction: None,
                length_fraction: 0.1,
            },
            goal_transition_interval: [5, 8],
            goal_switch_probability: 0.05,
            speed: 0.03,
        }
    }
}

impl SimulatedHumanParams {
    /// A perfectly obedient operator: no noise, dropout, silence or goal changes.
    pub fn noiseless(speed: f64) -> Self {
        Self {
            direction_noise_sigma: 0.0,
            dropout_probability: 0.0,
            silent_window: SilentWindow {
                start_fraction: Some(0.0),
                length_fraction: 0.0,
            },
            goal_transition_interval: [5, 8],
            goal_switch_probability: 0.0,
            speed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(self.direction_noise_sigma >= 0.0) {
            return Err(Error::InvalidParameter("direction noise sigma must be >= 0".into()));
        }
        if !unit(self.dropout_probability) || !unit(self.goal_switch_probability) {
            return Err(Error::InvalidParameter("probabilities must lie in [0, 1]".into()));
        }
        let w = &self.silent_window;
        if !unit(w.length_fraction) || w.start_fraction.is_some_and(|s| !unit(s)) {
            return Err(Error::InvalidParameter("silent window fractions must lie in [0, 1]".into()));
        }
        let [low, high] = self.goal_transition_interval;
        if low < 1 || low > high {
            return Err(Error::InvalidParameter(format!(
                "goal transition interval [{low}, {high}] must satisfy 1 <= low <= high"
            )));
        }
        if !(self.speed >= 0.0 && self.speed.is_finite()) {
            return Err(Error::InvalidParameter("speed must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Heading toward `intended`, perturbed by a random rotation of angular
/// standard deviation `sigma` about an axis perpendicular to the heading,
/// scaled to `speed` (or less, so the final step lands on the goal).
/// Zero when `silent` or when the dropout draw fires.
///
/// The generator is advanced by the same amount on every call.
pub fn simulated_human_command(
    pose: &Pose,
    intended: &Goal,
    params: &SimulatedHumanParams,
    dt: f64,
    silent: bool,
    rng: &mut ChaCha8Rng,
) -> ControlCommand {
    let gaussian: [f64; 3] = [
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
    ];
    let angle = match Normal::new(0.0, params.direction_noise_sigma) {
        Ok(normal) => normal.sample(rng),
        Err(_) => 0.0,
    };
    let dropout_draw: f64 = rng.random();

    if silent || dropout_draw < params.dropout_probability {
        return ControlCommand::zero();
    }
    let offset = intended.pose.position - pose.position;
    let distance = offset.norm();
    if distance < 1e-12 {
        return ControlCommand::zero();
    }
    let heading = offset / distance;
    let mut direction = heading;
    if angle != 0.0 {
        let g = Vector3::from(gaussian);
        let perpendicular = g - heading * heading.dot(&g);
        let pn = perpendicular.norm();
        if pn > 1e-9 {
            direction = heading * angle.cos() + (perpendicular / pn) * angle.sin();
        }
    }
    let magnitude = params.speed.min(distance / dt);
    ControlCommand::new(direction * magnitude, Vector3::zeros())
}

/// Goal-switching state of the simulated operator.
#[derive(Debug, Clone)]
pub struct SimulatedHuman {
    params: SimulatedHumanParams,
    rng: ChaCha8Rng,
    goal: usize,
    goal_count: usize,
    countdown: usize,
    silent: std::ops::Range<usize>,
}

impl SimulatedHuman {
    /// `initial_goal = None` draws the first goal uniformly.
    pub fn new(
        params: SimulatedHumanParams,
        mut rng: ChaCha8Rng,
        goal_count: usize,
        max_steps: usize,
        initial_goal: Option<usize>,
    ) -> Self {
        let drawn = rng.random_range(0..goal_count);
        let goal = initial_goal.unwrap_or(drawn);
        let window = params.silent_window;
        let length = (window.length_fraction * max_steps as f64).round() as usize;
        let start_fraction = match window.start_fraction {
            Some(s) => s,
            None => rng.random_range(0.0..=(1.0 - window.length_fraction).max(0.0)),
        };
        let start = (start_fraction * max_steps as f64).round() as usize;
        let mut human = Self {
            params,
            rng,
            goal,
            goal_count,
            countdown: 0,
            silent: start..start + length,
        };
        human.countdown = human.draw_interval();
        human
    }

    fn draw_interval(&mut self) -> usize {
        let [low, high] = self.params.goal_transition_interval;
        self.rng.random_range(low..=high)
    }

    pub fn goal(&self) -> usize {
        self.goal
    }

    pub fn silent_steps(&self) -> std::ops::Range<usize> {
        self.silent.clone()
    }

    /// Ticks the resampling countdown; returns `(from, to)` when the goal changes.
    pub fn advance_goal(&mut self) -> Option<(usize, usize)> {
        self.countdown -= 1;
        if self.countdown > 0 {
            return None;
        }
        self.countdown = self.draw_interval();
        let switch_draw: f64 = self.rng.random();
        let pick = if self.goal_count > 1 {
            self.rng.random_range(0..self.goal_count - 1)
        } else {
            0
        };
        if self.goal_count < 2 || switch_draw >= self.params.goal_switch_probability {
            return None;
        }
        let from = self.goal;
        self.goal = if pick >= from { pick + 1 } else { pick };
        Some((from, self.goal))
    }

    pub fn command(&mut self, pose: &Pose, goals: &[Goal], step: usize, dt: f64) -> ControlCommand {
        let silent = self.silent.contains(&step);
        simulated_human_command(pose, &goals[self.goal], &self.params, dt, silent, &mut self.rng)
    }
}
