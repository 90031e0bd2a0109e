//! The JSON configuration document shared by the CLI and the session service.
//!
//! Every section is optional; missing fields take their defaults. Matrix
//! parameters that depend on the goal count are resolved per scene.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arbitration::{BlendingParams, PotentialFieldParams};
use crate::disambiguation::DisambiguationParams;
use crate::error::{Error, Result};
use crate::inference::{BayesParams, FieldParams, MemoryParams, PredictorKind};
use crate::matrix;
use crate::model::{default_interface, Bounds, ControlDimension, Goal, InterfaceSpec, Pose, Scene};
use crate::simulation::benchmark::{run_benchmark, BenchmarkRun, BenchmarkSettings};
use crate::simulation::human::SimulatedHumanParams;
use crate::simulation::trial::{ReachTolerance, TrialConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalEntry {
    #[serde(flatten)]
    pub pose: Pose,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSection {
    pub goals: Vec<GoalEntry>,
    pub workspace_bounds: Bounds,
    pub start_pose: Pose,
}

impl Default for SceneSection {
    fn default() -> Self {
        let goal = |x| GoalEntry {
            pose: Pose::at(x, 0.0, 0.0),
            label: None,
        };
        Self {
            goals: vec![goal(1.0), goal(-1.0)],
            workspace_bounds: Bounds::default(),
            start_pose: Pose::at(0.0, 0.0, 0.0),
        }
    }
}

impl SceneSection {
    pub fn scene(&self) -> Result<Scene> {
        let goals = self
            .goals
            .iter()
            .enumerate()
            .map(|(i, g)| {
                let mut goal = Goal::new(i, g.pose);
                if let Some(label) = &g.label {
                    goal.label = label.clone();
                }
                goal
            })
            .collect();
        Scene::new(goals, self.workspace_bounds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterfaceSection {
    /// `joystick` or `head-array`, or any name when `modes` is given.
    pub name: String,
    /// Explicit partition; `[]` is an inert mode. Mode ids are `1..=n`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modes: Option<Vec<Vec<ControlDimension>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub switch_order: Option<Vec<usize>>,
}

impl Default for InterfaceSection {
    fn default() -> Self {
        Self {
            name: "joystick".into(),
            modes: None,
            switch_order: None,
        }
    }
}

impl InterfaceSection {
    pub fn interface(&self) -> Result<InterfaceSpec> {
        let mut spec = match &self.modes {
            Some(modes) => InterfaceSpec::from_partition(&self.name, modes.clone())?,
            None => default_interface(&self.name)?,
        };
        if let Some(order) = &self.switch_order {
            spec.switch_order = order.clone();
            spec.validate()?;
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldSection {
    pub tau: f64,
    /// Diagonal of the control matrix when `control_matrix` is absent.
    pub control_gain: f64,
    pub proximity_radius: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transition_matrix: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub control_matrix: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rest_state: Option<Vec<f64>>,
}

impl Default for FieldSection {
    fn default() -> Self {
        Self {
            tau: FieldParams::DEFAULT_TAU,
            control_gain: FieldParams::DEFAULT_GAIN,
            proximity_radius: FieldParams::DEFAULT_PROXIMITY_RADIUS,
            transition_matrix: None,
            control_matrix: None,
            rest_state: None,
        }
    }
}

impl FieldSection {
    pub fn resolve(&self, n_g: usize, dt: f64) -> Result<FieldParams> {
        let mut p = FieldParams::defaults(n_g);
        p.tau = self.tau;
        p.dt = dt;
        p.proximity_radius = self.proximity_radius;
        p.control_matrix *= self.control_gain / FieldParams::DEFAULT_GAIN;
        if let Some(rows) = &self.transition_matrix {
            p.transition_matrix = matrix::from_rows(rows)?;
        }
        if let Some(rows) = &self.control_matrix {
            p.control_matrix = matrix::from_rows(rows)?;
        }
        p.rest_state = self.rest_state.clone();
        p.validate()?;
        check_size("field transition matrix", n_g, p.goal_count())?;
        check_size("field control matrix", n_g, p.control_matrix.nrows())?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BayesSection {
    pub likelihood_sharpness: f64,
    /// Off-diagonal mass of the sticky transition matrix used when none is given.
    pub switch_probability: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transition_matrix: Option<Vec<Vec<f64>>>,
}

impl Default for BayesSection {
    fn default() -> Self {
        Self {
            likelihood_sharpness: BayesParams::DEFAULT_SHARPNESS,
            switch_probability: BayesParams::DEFAULT_SWITCH_PROBABILITY,
            transition_matrix: None,
        }
    }
}

impl BayesSection {
    pub fn resolve(&self, n_g: usize) -> Result<BayesParams> {
        if !(0.0..=1.0).contains(&self.switch_probability) {
            return Err(Error::InvalidParameter(format!(
                "switch probability {} outside [0, 1]",
                self.switch_probability
            )));
        }
        let transition_matrix = match &self.transition_matrix {
            Some(rows) => matrix::from_rows(rows)?,
            None => matrix::sticky_transition(n_g, self.switch_probability),
        };
        let p = BayesParams {
            transition_matrix,
            likelihood_sharpness: self.likelihood_sharpness,
        };
        p.validate()?;
        check_size("bayes transition matrix", n_g, p.transition_matrix.nrows())?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlendingSection {
    /// Defaults to `1.2 / n_g`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho1: Option<f64>,
    /// Defaults to `1.4 / n_g`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho2: Option<f64>,
    pub rho3: f64,
}

impl Default for BlendingSection {
    fn default() -> Self {
        Self {
            rho1: None,
            rho2: None,
            rho3: 0.7,
        }
    }
}

impl BlendingSection {
    pub fn resolve(&self, n_g: usize) -> Result<BlendingParams> {
        let d = BlendingParams::for_goals(n_g);
        let p = BlendingParams {
            rho1: self.rho1.unwrap_or(d.rho1),
            rho2: self.rho2.unwrap_or(d.rho2),
            rho3: self.rho3,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialSection {
    pub predictor: PredictorKind,
    pub seed: u64,
    pub dt: f64,
    pub max_steps: usize,
    pub assistance_enabled: bool,
    /// Defaults to the first mode of the switch order.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_mode: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_goal: Option<usize>,
    pub reach: ReachTolerance,
}

impl Default for TrialSection {
    fn default() -> Self {
        Self {
            predictor: PredictorKind::Field,
            seed: 0,
            dt: 0.1,
            max_steps: 800,
            assistance_enabled: true,
            initial_mode: None,
            initial_goal: None,
            reach: ReachTolerance::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TeleopSection {
    /// Speed of a full-scale axis on a translational dimension, m/s.
    pub translational_speed: f64,
    /// Speed of a full-scale axis on a rotational dimension, rad/s.
    pub rotational_speed: f64,
    pub tick_hz: f64,
    /// Directory receiving per-session logs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_dir: Option<PathBuf>,
    /// Directory of static assets served at `/`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub static_dir: Option<PathBuf>,
}

impl Default for TeleopSection {
    fn default() -> Self {
        Self {
            translational_speed: 0.2,
            rotational_speed: 0.5,
            tick_hz: 10.0,
            log_dir: None,
            static_dir: None,
        }
    }
}

impl TeleopSection {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("translational_speed", self.translational_speed),
            ("rotational_speed", self.rotational_speed),
            ("tick_hz", self.tick_hz),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("teleop {name} must be a positive number")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigDocument {
    pub scene: SceneSection,
    pub interface: InterfaceSection,
    pub field: FieldSection,
    pub bayes: BayesSection,
    pub memory: MemoryParams,
    pub blending: BlendingSection,
    pub potential_field: PotentialFieldParams,
    pub disambiguation: DisambiguationParams,
    pub human: SimulatedHumanParams,
    pub trial: TrialSection,
    pub benchmark: BenchmarkSettings,
    pub teleop: TeleopSection,
}

impl ConfigDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        doc.validate()?;
        Ok(doc)
    }

    /// Checks every section that does not depend on a particular scene,
    /// plus the configured scene itself.
    pub fn validate(&self) -> Result<()> {
        self.trial_config()?;
        self.benchmark.validate()?;
        self.teleop.validate()
    }

    /// Hex SHA-256 of the document serialized with sorted keys.
    pub fn digest(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let canonical = serde_json::to_string(&value).expect("value serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    /// Trial configuration for the configured scene.
    pub fn trial_config(&self) -> Result<TrialConfig> {
        self.trial_config_for(self.scene.scene()?)
    }

    /// Trial configuration for an arbitrary scene, resolving goal-count-dependent parameters.
    pub fn trial_config_for(&self, scene: Scene) -> Result<TrialConfig> {
        let n = scene.goal_count();
        let interface = self.interface.interface()?;
        let initial_mode = self.trial.initial_mode.unwrap_or_else(|| interface.first_mode());
        let config = TrialConfig {
            start_pose: self.scene.start_pose,
            interface,
            initial_mode,
            predictor: self.trial.predictor,
            seed: self.trial.seed,
            dt: self.trial.dt,
            max_steps: self.trial.max_steps,
            human: self.human,
            initial_goal: self.trial.initial_goal,
            blending: self.blending.resolve(n)?,
            field: self.field.resolve(n, self.trial.dt)?,
            bayes: self.bayes.resolve(n)?,
            memory: self.memory,
            potential_field: self.potential_field,
            disamb: self.disambiguation,
            assistance_enabled: self.trial.assistance_enabled,
            reach: self.trial.reach,
            scene,
        };
        config.validate()?;
        Ok(config)
    }

    /// Runs the configured benchmark, optionally overriding the trial count.
    pub fn run_benchmark(&self, trials: Option<usize>) -> Result<BenchmarkRun> {
        let mut doc = self.clone();
        if let Some(n) = trials {
            doc.benchmark.trials = n;
        }
        run_benchmark(
            &doc.benchmark,
            doc.trial.seed,
            doc.scene.start_pose,
            doc.scene.workspace_bounds,
            doc.digest(),
            |scene| doc.trial_config_for(scene),
        )
    }
}

fn check_size(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { what, expected, actual });
    }
    Ok(())
}
