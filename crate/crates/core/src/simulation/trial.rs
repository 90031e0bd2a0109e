//! The shared-control loop and scripted trials.
//!
//! Every step: a human command arrives, the belief is updated, the autonomy
//! command for the most confident goal is blended in with a confidence-gated
//! weight, and the robot moves.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arbitration::{
    blend, blending_alpha, inference_context, potential_field_command, BlendingParams, PotentialFieldParams,
};
use crate::disambiguation::DisambiguationParams;
use crate::error::{Error, Result};
use crate::inference::{most_confident_goal, BayesParams, FieldParams, MemoryParams, Predictor, PredictorKind};
use crate::model::{BeliefState, ControlCommand, Goal, InterfaceSpec, Pose, Scene};
use crate::simulation::human::{SimulatedHuman, SimulatedHumanParams};
use crate::simulation::kinematics::step_kinematics;
use crate::simulation::log::{Event, StepRecord, TrialLog};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReachTolerance {
    /// m
    pub position: f64,
    /// rad
    pub orientation: f64,
}

impl Default for ReachTolerance {
    fn default() -> Self {
        Self {
            position: 0.05,
            orientation: 0.2,
        }
    }
}

impl ReachTolerance {
    pub fn reached(&self, pose: &Pose, goal: &Goal) -> bool {
        (goal.pose.position - pose.position).norm() <= self.position
            && pose.orientation.angle_to(&goal.pose.orientation) <= self.orientation
    }
}

/// Everything needed to run one trial. Matrix-valued parameters are sized
/// for `scene`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub scene: Scene,
    pub start_pose: Pose,
    pub interface: InterfaceSpec,
    pub initial_mode: usize,
    pub predictor: PredictorKind,
    pub seed: u64,
    pub dt: f64,
    pub max_steps: usize,
    pub human: SimulatedHumanParams,
    /// Starting hidden goal; drawn from the seed when absent.
    pub initial_goal: Option<usize>,
    pub blending: BlendingParams,
    pub field: FieldParams,
    pub bayes: BayesParams,
    pub memory: MemoryParams,
    pub potential_field: PotentialFieldParams,
    pub disamb: DisambiguationParams,
    pub assistance_enabled: bool,
    pub reach: ReachTolerance,
}

impl TrialConfig {
    /// Defaults for `scene`, starting at `start_pose` with the joystick interface.
    pub fn with_defaults(scene: Scene, start_pose: Pose) -> Result<Self> {
        let n = scene.goal_count();
        let interface = crate::model::default_interface("joystick")?;
        let initial_mode = interface.first_mode();
        Ok(Self {
            scene,
            start_pose,
            interface,
            initial_mode,
            predictor: PredictorKind::Field,
            seed: 0,
            dt: 0.1,
            max_steps: 800,
            human: SimulatedHumanParams::default(),
            initial_goal: None,
            blending: BlendingParams::for_goals(n),
            field: FieldParams::defaults(n),
            bayes: BayesParams::defaults(n),
            memory: MemoryParams::default(),
            potential_field: PotentialFieldParams::default(),
            disamb: DisambiguationParams::default(),
            assistance_enabled: true,
            reach: ReachTolerance::default(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        self.interface.validate()?;
        if self.interface.mode(self.initial_mode).is_none() {
            return Err(Error::InvalidInterface(format!(
                "initial mode {} is not part of interface '{}'",
                self.initial_mode, self.interface.name
            )));
        }
        if self.max_steps < 1 {
            return Err(Error::InvalidParameter("max_steps must be >= 1".into()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidParameter("dt must be > 0".into()));
        }
        let n = self.scene.goal_count();
        if let Some(g) = self.initial_goal {
            if g >= n {
                return Err(Error::InvalidParameter(format!("initial goal {g} not in scene")));
            }
        }
        self.human.validate()?;
        self.blending.validate()?;
        self.field.validate()?;
        self.bayes.validate()?;
        self.potential_field.validate()?;
        self.disamb.validate()?;
        for (what, size) in [
            ("field parameters", self.field.goal_count()),
            ("bayes parameters", self.bayes.transition_matrix.nrows()),
        ] {
            if size != n {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: n,
                    actual: size,
                });
            }
        }
        Ok(())
    }

    pub fn build_predictor(&self) -> Predictor {
        match self.predictor {
            PredictorKind::Field => {
                let mut field = self.field.clone();
                field.dt = self.dt;
                Predictor::Field(field)
            }
            PredictorKind::Bayes => Predictor::Bayes(self.bayes.clone()),
            PredictorKind::Memory => Predictor::Memory(self.memory),
        }
    }
}

/// Mutable world state threaded through the loop.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub pose: Pose,
    pub belief: BeliefState,
    pub current_mode: usize,
    pub history: Vec<Vector3<f64>>,
    pub step: usize,
}

impl WorldState {
    pub fn initial(config: &TrialConfig) -> Result<Self> {
        Ok(Self {
            pose: config.start_pose,
            belief: BeliefState::uniform(config.scene.goal_count())?,
            current_mode: config.initial_mode,
            history: Vec::new(),
            step: 0,
        })
    }

    /// Simulated time after `step` completed steps.
    pub fn time(&self, dt: f64) -> f64 {
        self.step as f64 * dt
    }
}

/// Outcome of one loop iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub u_a: ControlCommand,
    pub u: ControlCommand,
    pub alpha: f64,
    pub g_star: usize,
}

/// One iteration: belief update, autonomy command for `g*`, blending, motion.
pub fn advance(
    world: &mut WorldState,
    u_h: &ControlCommand,
    config: &TrialConfig,
    predictor: &Predictor,
) -> Result<StepOutcome> {
    world.history.push(world.pose.position);
    let ctx = inference_context(&world.pose, &config.scene, &config.potential_field)?;
    let belief = predictor.update(&world.belief, u_h, &ctx, &world.history)?;
    let g_star = most_confident_goal(&belief);
    let u_a = potential_field_command(&world.pose, g_star, &config.scene, &config.potential_field)?;
    let alpha = if config.assistance_enabled {
        blending_alpha(belief.get(g_star), &config.blending)
    } else {
        0.0
    };
    let u = blend(u_h, &u_a, alpha);
    if !u.is_finite() {
        return Err(Error::Numerical(format!("blended command is not finite at step {}", world.step)));
    }
    world.pose = step_kinematics(&world.pose, &u, config.dt);
    world.belief = belief;
    world.step += 1;
    Ok(StepOutcome { u_a, u, alpha, g_star })
}

/// Runs a scripted trial with the simulated operator.
pub fn run_trial(config: &TrialConfig) -> Result<TrialLog> {
    config.validate()?;
    let predictor = config.build_predictor();
    let goals = &config.scene.goals;
    let mut human = SimulatedHuman::new(
        config.human,
        ChaCha8Rng::seed_from_u64(config.seed),
        goals.len(),
        config.max_steps,
        config.initial_goal,
    );
    let mut world = WorldState::initial(config)?;
    let mut log = TrialLog::new(goals.len());
    while world.step < config.max_steps {
        let mut events = Vec::new();
        if let Some((from, to)) = human.advance_goal() {
            events.push(Event::GoalTransition { from, to });
        }
        let truth = human.goal();
        let u_h = human.command(&world.pose, goals, world.step, config.dt);
        let outcome = advance(&mut world, &u_h, config, &predictor)?;
        log.records.push(StepRecord {
            t: world.time(config.dt),
            pose: world.pose,
            u_h,
            u_a: outcome.u_a,
            u: outcome.u,
            alpha: outcome.alpha,
            belief: world.belief.clone(),
            current_mode: world.current_mode,
            ground_truth_goal: Some(truth),
            events,
        });
        if config.reach.reached(&world.pose, &goals[truth]) {
            break;
        }
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::human::SilentWindow;
    use approx::assert_abs_diff_eq;

    fn single_goal_config() -> TrialConfig {
        let scene = Scene::from_positions(&[[1.0, 0.0, 0.0]]).unwrap();
        let mut config = TrialConfig::with_defaults(scene, Pose::at(0.0, 0.0, 0.0)).unwrap();
        config.human = SimulatedHumanParams::noiseless(0.2);
        config.assistance_enabled = false;
        config
    }

    #[test]
    fn noiseless_unassisted_reach() {
        let config = single_goal_config();
        let log = run_trial(&config).unwrap();
        let last = log.records.last().unwrap();
        let gap = (last.pose.position - Vector3::new(1.0, 0.0, 0.0)).norm();
        assert!(gap <= 2.0 * config.dt * config.human.speed, "gap {gap}");
        assert!(log.len() < config.max_steps);
    }

    #[test]
    fn timestamps_advance_by_dt() {
        let log = run_trial(&single_goal_config()).unwrap();
        for (i, r) in log.records.iter().enumerate() {
            assert_abs_diff_eq!(r.t, (i + 1) as f64 * 0.1, epsilon = 1e-12);
        }
    }

    #[test]
    fn assistance_never_slows_trivial_reach() {
        let unassisted = run_trial(&single_goal_config()).unwrap();
        let mut config = single_goal_config();
        config.assistance_enabled = true;
        let assisted = run_trial(&config).unwrap();
        assert!(assisted.len() <= unassisted.len());
    }

    #[test]
    fn same_seed_same_log() {
        let scene = Scene::from_positions(&[[0.6, 0.2, 0.0], [-0.4, 0.5, 0.1], [0.1, -0.6, 0.3]]).unwrap();
        let mut config = TrialConfig::with_defaults(scene, Pose::at(0.0, 0.0, 0.0)).unwrap();
        config.seed = 1234;
        let a = run_trial(&config).unwrap();
        let b = run_trial(&config).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        config.seed = 1235;
        assert_ne!(run_trial(&config).unwrap().to_csv(), a.to_csv());
    }

    #[test]
    fn silent_tail_relaxes_to_uniform() {
        let scene = Scene::from_positions(&[[1.2, 0.0, 0.0], [-1.2, 0.0, 0.0], [0.0, 1.2, 0.0]]).unwrap();
        let mut config = TrialConfig::with_defaults(scene, Pose::at(0.0, 0.0, 0.0)).unwrap();
        config.assistance_enabled = false;
        config.max_steps = 1000;
        config.human = SimulatedHumanParams::noiseless(0.02);
        // Last 60 s (> 5 tau) silent.
        config.human.silent_window = SilentWindow {
            start_fraction: Some(0.4),
            length_fraction: 0.6,
        };
        let log = run_trial(&config).unwrap();
        assert_eq!(log.len(), 1000);
        let last = &log.records.last().unwrap().belief;
        for p in last.as_slice() {
            assert!((p - 1.0 / 3.0).abs() < 1e-2, "{last:?}");
        }
        // The belief had moved away from uniform before the silence.
        let before = &log.records[399].belief;
        assert!(before.as_slice().iter().any(|p| (p - 1.0 / 3.0).abs() > 0.1));
    }

    #[test]
    fn validation_happens_before_stepping() {
        let mut config = single_goal_config();
        config.max_steps = 0;
        assert!(run_trial(&config).is_err());
        let mut config = single_goal_config();
        config.field = FieldParams::defaults(2);
        assert!(matches!(run_trial(&config), Err(Error::DimensionMismatch { .. })));
        let mut config = single_goal_config();
        config.initial_mode = 42;
        assert!(run_trial(&config).is_err());
    }

    #[test]
    fn below_threshold_matches_teleoperation() {
        let scene = Scene::from_positions(&[[0.6, 0.2, 0.0], [-0.4, 0.5, 0.1], [0.1, -0.6, 0.3]]).unwrap();
        let mut config = TrialConfig::with_defaults(scene, Pose::at(0.0, 0.0, 0.0)).unwrap();
        config.seed = 3;
        // Threshold above any reachable probability keeps alpha at zero.
        config.blending = BlendingParams { rho1: 1.0, rho2: 1.5, rho3: 0.7 };
        let assisted = run_trial(&config).unwrap();
        config.assistance_enabled = false;
        let manual = run_trial(&config).unwrap();
        assert_eq!(assisted.to_csv(), manual.to_csv());
    }
}
