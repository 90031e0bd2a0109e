//! Goal-intent inference.
//!
//! The primary predictor evolves the belief as a constrained dynamical
//! system: a decay toward a rest state plus an input-driven excitation,
//!
//! ```text
//! dp/dt = (1/tau) * (-P^T p + rest) + lambda * sigma(xi(u_h; ctx))
//! ```
//!
//! integrated with explicit Euler and projected back onto the simplex after
//! every step. Two baselines share the same call shape: a recursive Bayes
//! filter and a distance-only (memory-based) predictor.

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{self, row_major};
use crate::model::{BeliefState, ControlCommand, Goal, Pose};

/// Norm below which a vector is treated as zero inside the directedness cosine.
const DIRECTEDNESS_EPS: f64 = 1e-12;

/// Parameters of the field-theoretic update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldParams {
    /// Decay time scale, seconds.
    pub tau: f64,
    /// Row-stochastic goal transition matrix `P`.
    #[serde(with = "row_major")]
    pub transition_matrix: DMatrix<f64>,
    /// Gain matrix `lambda` applied to the excitation, 1/s.
    #[serde(with = "row_major")]
    pub control_matrix: DMatrix<f64>,
    /// Radius beyond which the proximity feature is zero, meters.
    pub proximity_radius: f64,
    /// Integration step, seconds.
    pub dt: f64,
    /// Optional rest state replacing the uniform `1/n_g` term.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rest_state: Option<Vec<f64>>,
}

impl FieldParams {
    pub const DEFAULT_TAU: f64 = 10.0;
    pub const DEFAULT_GAIN: f64 = 0.5;
    pub const DEFAULT_PROXIMITY_RADIUS: f64 = 0.25;
    pub const DEFAULT_DT: f64 = 0.1;

    /// `P = I`, `lambda = 0.5 I`, `tau = 10 s`, `dt = 0.1 s`.
    pub fn defaults(n_g: usize) -> Self {
        Self {
            tau: Self::DEFAULT_TAU,
            transition_matrix: DMatrix::identity(n_g, n_g),
            control_matrix: DMatrix::identity(n_g, n_g) * Self::DEFAULT_GAIN,
            proximity_radius: Self::DEFAULT_PROXIMITY_RADIUS,
            dt: Self::DEFAULT_DT,
            rest_state: None,
        }
    }

    pub fn goal_count(&self) -> usize {
        self.transition_matrix.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::InvalidParameter(format!("tau must be > 0, got {}", self.tau)));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.proximity_radius > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "proximity radius must be > 0, got {}",
                self.proximity_radius
            )));
        }
        matrix::check_row_stochastic(&self.transition_matrix, "transition matrix")?;
        let n = self.goal_count();
        if self.control_matrix.shape() != (n, n) {
            return Err(Error::DimensionMismatch {
                what: "control matrix size",
                expected: n,
                actual: self.control_matrix.nrows(),
            });
        }
        if let Some(rest) = &self.rest_state {
            if rest.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "rest state length",
                    expected: n,
                    actual: rest.len(),
                });
            }
        }
        Ok(())
    }
}

/// Task features the excitation depends on: robot pose, goals, and the
/// autonomy command toward each goal.
#[derive(Debug, Clone)]
pub struct InferenceContext<'a> {
    pub robot_pose: Pose,
    pub goals: &'a [Goal],
    pub autonomy_commands: Vec<ControlCommand>,
}

impl<'a> InferenceContext<'a> {
    pub fn new(robot_pose: Pose, goals: &'a [Goal], autonomy_commands: Vec<ControlCommand>) -> Result<Self> {
        let ctx = Self {
            robot_pose,
            goals,
            autonomy_commands,
        };
        ctx.check()?;
        Ok(ctx)
    }

    fn check(&self) -> Result<()> {
        if self.autonomy_commands.len() != self.goals.len() {
            return Err(Error::DimensionMismatch {
                what: "autonomy commands per goal",
                expected: self.goals.len(),
                actual: self.autonomy_commands.len(),
            });
        }
        Ok(())
    }

    pub fn goal_count(&self) -> usize {
        self.goals.len()
    }
}

/// Cosine between the translational command and the offset to `goal`,
/// or `None` when either vector is degenerate.
fn directedness_cosine(u_h: &ControlCommand, robot: &Vector3<f64>, goal: &Vector3<f64>) -> Option<f64> {
    let offset = goal - robot;
    let un = u_h.translational.norm();
    let on = offset.norm();
    if un < DIRECTEDNESS_EPS || on < DIRECTEDNESS_EPS {
        return None;
    }
    Some((u_h.translational.dot(&offset) / (un * on)).clamp(-1.0, 1.0))
}

/// Per-goal excitation input: directedness + agreement + proximity.
pub fn compute_xi(u_h: &ControlCommand, ctx: &InferenceContext<'_>, radius: f64) -> Result<Vec<f64>> {
    ctx.check()?;
    let robot = ctx.robot_pose.position;
    Ok(ctx
        .goals
        .iter()
        .zip(&ctx.autonomy_commands)
        .map(|(goal, u_a)| {
            let target = goal.pose.position;
            let directedness = match directedness_cosine(u_h, &robot, &target) {
                Some(eta) => (1.0 + eta) / 2.0,
                None => 0.5,
            };
            let agreement = u_h.rotational.dot(&u_a.rotational);
            let proximity = (1.0 - (target - robot).norm() / radius).max(0.0);
            directedness + agreement + proximity
        })
        .collect())
}

/// Logistic shifted to pass through the origin; range `(-0.5, 0.5)`.
pub fn biased_sigmoid(xi: &[f64]) -> Vec<f64> {
    xi.iter().map(|&x| 1.0 / (1.0 + (-x).exp()) - 0.5).collect()
}

/// Clamps to `[0, 1]` and rescales to unit sum; all-zero input maps to uniform.
pub fn enforce_simplex(raw: &[f64]) -> Result<BeliefState> {
    BeliefState::normalize(raw)
}

/// Index of the largest probability, ties broken toward the lowest index.
pub fn most_confident_goal(p: &BeliefState) -> usize {
    let mut best = 0;
    for (i, &v) in p.as_slice().iter().enumerate() {
        if v > p.get(best) {
            best = i;
        }
    }
    best
}

/// One explicit-Euler step of the field dynamics followed by simplex projection.
pub fn step_belief_field(
    p: &BeliefState,
    u_h: &ControlCommand,
    ctx: &InferenceContext<'_>,
    params: &FieldParams,
) -> Result<BeliefState> {
    let n = p.len();
    if params.goal_count() != n || ctx.goal_count() != n {
        return Err(Error::DimensionMismatch {
            what: "goal count in field step",
            expected: n,
            actual: if params.goal_count() != n {
                params.goal_count()
            } else {
                ctx.goal_count()
            },
        });
    }
    let belief = DVector::from_column_slice(p.as_slice());
    let rest = match &params.rest_state {
        Some(r) => DVector::from_column_slice(r),
        None => DVector::from_element(n, 1.0 / n as f64),
    };
    let mut rate = (-(params.transition_matrix.transpose() * &belief) + rest) / params.tau;
    if !u_h.is_zero() {
        let xi = compute_xi(u_h, ctx, params.proximity_radius)?;
        let excitation = DVector::from_vec(biased_sigmoid(&xi));
        rate += &params.control_matrix * excitation;
    }
    let raw = belief + rate * params.dt;
    if let Some(i) = raw.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!(
            "field step produced a non-finite value for goal {i} (u_h = {:?})",
            u_h.as_array()
        )));
    }
    enforce_simplex(raw.as_slice())
}

/// Parameters of the recursive Bayesian baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesParams {
    /// Row-stochastic `P[g' -> g]`.
    #[serde(with = "row_major")]
    pub transition_matrix: DMatrix<f64>,
    /// Sharpness `beta` of the likelihood `exp(beta * cos)`.
    pub likelihood_sharpness: f64,
}

impl BayesParams {
    pub const DEFAULT_SHARPNESS: f64 = 0.05;
    pub const DEFAULT_SWITCH_PROBABILITY: f64 = 0.02;

    pub fn defaults(n_g: usize) -> Self {
        Self {
            transition_matrix: matrix::sticky_transition(n_g, Self::DEFAULT_SWITCH_PROBABILITY),
            likelihood_sharpness: Self::DEFAULT_SHARPNESS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        matrix::check_row_stochastic(&self.transition_matrix, "bayes transition matrix")?;
        if !(self.likelihood_sharpness > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "likelihood sharpness must be > 0, got {}",
                self.likelihood_sharpness
            )));
        }
        Ok(())
    }
}

/// Predict with the transition model, then weight by the command likelihood.
pub fn step_belief_bayes(
    p: &BeliefState,
    u_h: &ControlCommand,
    ctx: &InferenceContext<'_>,
    params: &BayesParams,
) -> Result<BeliefState> {
    let n = p.len();
    if params.transition_matrix.nrows() != n || ctx.goal_count() != n {
        return Err(Error::DimensionMismatch {
            what: "goal count in bayes step",
            expected: n,
            actual: params.transition_matrix.nrows(),
        });
    }
    let belief = DVector::from_column_slice(p.as_slice());
    let predicted = params.transition_matrix.transpose() * belief;
    let robot = ctx.robot_pose.position;
    let log_likelihood: Vec<f64> = ctx
        .goals
        .iter()
        .map(|g| {
            if u_h.is_zero() {
                0.0
            } else {
                params.likelihood_sharpness
                    * directedness_cosine(u_h, &robot, &g.pose.position).unwrap_or(0.0)
            }
        })
        .collect();
    // Shift by the max exponent; it cancels in the normalizer.
    let shift = log_likelihood.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let posterior: Vec<f64> = predicted
        .iter()
        .zip(&log_likelihood)
        .map(|(prior, ll)| prior * (ll - shift).exp())
        .collect();
    let sum: f64 = posterior.iter().sum();
    if !sum.is_finite() {
        return Err(Error::Numerical("bayes normalizer is not finite".into()));
    }
    enforce_simplex(&posterior)
}

/// Parameters of the distance-only baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MemoryParams {
    /// Length scale `d0`, meters.
    pub length_scale: f64,
}

impl Default for MemoryParams {
    fn default() -> Self {
        Self { length_scale: 1.0 }
    }
}

/// `p_i ∝ exp(-|x_g_i - x_r| / d0)` evaluated at the latest position in `history`.
pub fn memory_based_belief(
    history: &[Vector3<f64>],
    ctx: &InferenceContext<'_>,
    params: &MemoryParams,
) -> Result<BeliefState> {
    let current = history
        .last()
        .ok_or_else(|| Error::InvalidParameter("memory-based prediction needs a non-empty history".into()))?;
    if !(params.length_scale > 0.0) {
        return Err(Error::InvalidParameter("length scale must be > 0".into()));
    }
    let distances: Vec<f64> = ctx
        .goals
        .iter()
        .map(|g| (g.pose.position - current).norm())
        .collect();
    let nearest = distances.iter().cloned().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = distances
        .iter()
        .map(|d| (-(d - nearest) / params.length_scale).exp())
        .collect();
    let sum: f64 = weights.iter().sum();
    enforce_simplex(&weights.iter().map(|w| w / sum).collect::<Vec<_>>())
}

/// Which inference algorithm drives the belief.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictorKind {
    Field,
    Bayes,
    Memory,
}

impl PredictorKind {
    pub const ALL: [PredictorKind; 3] = [PredictorKind::Field, PredictorKind::Bayes, PredictorKind::Memory];

    pub fn name(self) -> &'static str {
        match self {
            PredictorKind::Field => "field",
            PredictorKind::Bayes => "bayes",
            PredictorKind::Memory => "memory",
        }
    }
}

impl std::str::FromStr for PredictorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "field" => Ok(PredictorKind::Field),
            "bayes" => Ok(PredictorKind::Bayes),
            "memory" => Ok(PredictorKind::Memory),
            other => Err(Error::InvalidParameter(format!("unknown predictor '{other}'"))),
        }
    }
}

/// A configured predictor. All variants are pure functions of their inputs.
#[derive(Debug, Clone, PartialEq)]
pub enum Predictor {
    Field(FieldParams),
    Bayes(BayesParams),
    Memory(MemoryParams),
}

impl Predictor {
    pub fn kind(&self) -> PredictorKind {
        match self {
            Predictor::Field(_) => PredictorKind::Field,
            Predictor::Bayes(_) => PredictorKind::Bayes,
            Predictor::Memory(_) => PredictorKind::Memory,
        }
    }

    /// Advances the belief by one step. `history` holds robot positions up to and
    /// including the current one.
    pub fn update(
        &self,
        p: &BeliefState,
        u_h: &ControlCommand,
        ctx: &InferenceContext<'_>,
        history: &[Vector3<f64>],
    ) -> Result<BeliefState> {
        match self {
            Predictor::Field(params) => step_belief_field(p, u_h, ctx, params),
            Predictor::Bayes(params) => step_belief_bayes(p, u_h, ctx, params),
            Predictor::Memory(params) => memory_based_belief(history, ctx, params),
        }
    }
}
