//! Control-mode selection for intent disambiguation.
//!
//! For every control dimension and both signs, the live belief is projected
//! forward under a constant unit command. Four shape features of the
//! projection (certainty, pairwise separation, gap between the top two
//! goals, and the spread of spatial gradients) are combined into a score per
//! dimension, summed per mode, and the best-scoring mode is proposed.

use serde::{Deserialize, Serialize};

use crate::arbitration::{inference_context, PotentialFieldParams};
use crate::error::{Error, Result};
use crate::inference::{step_belief_field, FieldParams};
use crate::model::{BeliefState, ControlCommand, ControlDimension, InterfaceSpec, Pose, Scene, Sign};
use crate::simulation::kinematics::step_kinematics;

/// Scores within this distance of the maximum count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DisambiguationParams {
    /// Short-term horizon `t_b - t_a`, seconds.
    pub t_b_offset: f64,
    /// Long-term horizon `t_c - t_a`, seconds.
    pub t_c_offset: f64,
    /// Projection step, seconds.
    pub dt: f64,
    /// Weight of the short-term component.
    pub w: f64,
}

impl Default for DisambiguationParams {
    fn default() -> Self {
        Self {
            t_b_offset: 0.5,
            t_c_offset: 2.0,
            dt: 0.1,
            w: 0.5,
        }
    }
}

impl DisambiguationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::InvalidParameter("projection dt must be > 0".into()));
        }
        if !(self.t_b_offset > 0.0 && self.t_b_offset < self.t_c_offset) {
            return Err(Error::InvalidParameter(format!(
                "horizons must satisfy 0 < t_b ({}) < t_c ({})",
                self.t_b_offset, self.t_c_offset
            )));
        }
        if !(0.0..=1.0).contains(&self.w) {
            return Err(Error::InvalidParameter(format!("weight w ({}) must be in [0, 1]", self.w)));
        }
        if self.short_steps() == 0 || self.short_steps() >= self.long_steps() {
            return Err(Error::InvalidParameter(
                "horizons collapse onto the same projection step".into(),
            ));
        }
        Ok(())
    }

    /// Euler steps from `t_a` to `t_b`.
    pub fn short_steps(&self) -> usize {
        (self.t_b_offset / self.dt).round() as usize
    }

    /// Euler steps from `t_a` to `t_c`.
    pub fn long_steps(&self) -> usize {
        (self.t_c_offset / self.dt).round() as usize
    }
}

/// Belief and displacement snapshots of one forward projection.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub p_at_tb: BeliefState,
    pub p_at_tc: BeliefState,
    /// Displacement along the projected dimension (m or rad) at `t_b`.
    pub x_at_tb: f64,
    pub x_at_tc: f64,
}

/// Projects the belief forward under the constant command `sign * e^k`.
///
/// The autonomy commands feeding the excitation are recomputed at each
/// projected pose. Inputs are not modified.
pub fn forward_project(
    p: &BeliefState,
    pose: &Pose,
    k: ControlDimension,
    sign: Sign,
    params: &DisambiguationParams,
    field: &FieldParams,
    scene: &Scene,
    potential_field: &PotentialFieldParams,
) -> Result<Projection> {
    let u_h = ControlCommand::unit(k, sign);
    let mut field = field.clone();
    field.dt = params.dt;
    let (n_b, n_c) = (params.short_steps(), params.long_steps());

    let mut belief = p.clone();
    let mut current = *pose;
    let mut displacement = 0.0;
    let mut snapshot_tb = None;
    for step in 1..=n_c {
        let ctx = inference_context(&current, scene, potential_field)?;
        belief = step_belief_field(&belief, &u_h, &ctx, &field).map_err(|e| {
            Error::Numerical(format!("projection along {}{k} step {step}: {e}", sign_symbol(sign)))
        })?;
        current = step_kinematics(&current, &u_h, params.dt);
        displacement += sign.value() * params.dt;
        if step == n_b {
            snapshot_tb = Some((belief.clone(), displacement));
        }
    }
    let (p_at_tb, x_at_tb) = snapshot_tb.ok_or_else(|| {
        Error::InvalidParameter("short-term horizon is not reached by the projection".into())
    })?;
    Ok(Projection {
        p_at_tb,
        p_at_tc: belief,
        x_at_tb,
        x_at_tc: displacement,
    })
}

fn sign_symbol(sign: Sign) -> &'static str {
    match sign {
        Sign::Positive => "+",
        Sign::Negative => "-",
    }
}

/// Maximum probability.
pub fn feature_gamma(p: &BeliefState) -> f64 {
    p.as_slice().iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// Sum of pairwise absolute differences `Σ_i Σ_{j≥i} |a_i - a_j|`.
fn pairwise_spread(values: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..values.len() {
        for j in i..values.len() {
            total += (values[i] - values[j]).abs();
        }
    }
    total
}

pub fn feature_lambda(p: &BeliefState) -> f64 {
    pairwise_spread(p.as_slice())
}

/// Gap between the largest and second-largest probability; 0 for a single goal.
pub fn feature_omega(p: &BeliefState) -> f64 {
    if p.len() < 2 {
        return 0.0;
    }
    let mut sorted = p.as_slice().to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted[0] - sorted[1]
}

/// Spread of the per-goal spatial gradients between the two horizons.
pub fn feature_upsilon(p_tb: &BeliefState, p_tc: &BeliefState, x_tb: f64, x_tc: f64) -> Result<f64> {
    let dx = x_tc - x_tb;
    if dx.abs() <= 1e-9 {
        return Err(Error::DegenerateProjection(dx));
    }
    if p_tb.len() != p_tc.len() {
        return Err(Error::DimensionMismatch {
            what: "belief length between horizons",
            expected: p_tb.len(),
            actual: p_tc.len(),
        });
    }
    let gradients: Vec<f64> = p_tc
        .as_slice()
        .iter()
        .zip(p_tb.as_slice())
        .map(|(c, b)| (c - b) / dx)
        .collect();
    Ok(pairwise_spread(&gradients))
}

/// The four shape features of one signed projection.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Features {
    pub gamma: f64,
    pub lambda: f64,
    pub omega: f64,
    pub upsilon: f64,
}

impl Features {
    pub fn from_projection(proj: &Projection) -> Result<Self> {
        Ok(Self {
            gamma: feature_gamma(&proj.p_at_tb),
            lambda: feature_lambda(&proj.p_at_tb),
            omega: feature_omega(&proj.p_at_tb),
            upsilon: feature_upsilon(&proj.p_at_tb, &proj.p_at_tc, proj.x_at_tb, proj.x_at_tc)?,
        })
    }

    /// `w * (Γ·Λ·Ω) + (1 - w) * Υ`.
    pub fn score(&self, w: f64) -> f64 {
        w * (self.gamma * self.lambda * self.omega) + (1.0 - w) * self.upsilon
    }
}

/// Combines both signed feature sets into `(D⁺, D⁻, D)`.
pub fn dimension_metric(plus: &Features, minus: &Features, w: f64) -> (f64, f64, f64) {
    let d_plus = plus.score(w);
    let d_minus = minus.score(w);
    (d_plus, d_minus, d_plus + d_minus)
}

/// Per-mode score, mode-ordered as in `interface.modes`. Inert modes score 0.
pub fn mode_metric(d_k: &[f64; 6], interface: &InterfaceSpec) -> Vec<ModeScore> {
    interface
        .modes
        .iter()
        .map(|m| ModeScore {
            id: m.id,
            value: m.dimensions.iter().map(|k| d_k[k.index()]).sum(),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeScore {
    pub id: usize,
    pub value: f64,
}

/// Feature record for one (dimension, sign) projection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub dimension: ControlDimension,
    pub sign: Sign,
    #[serde(flatten)]
    pub features: Features,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DisambiguationResult {
    pub d_plus: [f64; 6],
    pub d_minus: [f64; 6],
    pub d_k: [f64; 6],
    pub d_m: Vec<ModeScore>,
    pub m_star: usize,
    pub k_star: ControlDimension,
    pub features: Vec<FeatureRecord>,
}

impl DisambiguationResult {
    pub fn mode_score(&self, id: usize) -> Option<f64> {
        self.d_m.iter().find(|m| m.id == id).map(|m| m.value)
    }
}

/// Picks the best mode: the current mode wins any tie, then the lowest id.
fn select_mode(scores: &[ModeScore], current_mode: usize) -> usize {
    let best = scores.iter().map(|m| m.value).fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<usize> = scores
        .iter()
        .filter(|m| best - m.value <= TIE_TOLERANCE)
        .map(|m| m.id)
        .collect();
    if tied.contains(&current_mode) {
        current_mode
    } else {
        tied.into_iter().min().unwrap_or(current_mode)
    }
}

/// Runs the full disambiguation sweep and proposes a mode.
#[allow(clippy::too_many_arguments)]
pub fn select_disambiguation_mode(
    p: &BeliefState,
    pose: &Pose,
    interface: &InterfaceSpec,
    current_mode: usize,
    params: &DisambiguationParams,
    field: &FieldParams,
    scene: &Scene,
    potential_field: &PotentialFieldParams,
) -> Result<DisambiguationResult> {
    params.validate()?;
    if p.len() != scene.goal_count() {
        return Err(Error::DimensionMismatch {
            what: "belief length vs scene goals",
            expected: scene.goal_count(),
            actual: p.len(),
        });
    }
    let mut d_plus = [0.0; 6];
    let mut d_minus = [0.0; 6];
    let mut d_k = [0.0; 6];
    let mut features = Vec::with_capacity(12);
    for k in ControlDimension::ALL {
        let mut signed = [Features::default(); 2];
        for (slot, sign) in Sign::BOTH.into_iter().enumerate() {
            let proj = forward_project(p, pose, k, sign, params, field, scene, potential_field)?;
            signed[slot] = Features::from_projection(&proj)?;
            features.push(FeatureRecord {
                dimension: k,
                sign,
                features: signed[slot],
            });
        }
        let (plus, minus, total) = dimension_metric(&signed[0], &signed[1], params.w);
        d_plus[k.index()] = plus;
        d_minus[k.index()] = minus;
        d_k[k.index()] = total;
    }
    let d_m = mode_metric(&d_k, interface);
    let m_star = select_mode(&d_m, current_mode);
    let mut k_star = ControlDimension::X;
    for k in ControlDimension::ALL {
        if d_k[k.index()] > d_k[k_star.index()] {
            k_star = k;
        }
    }
    Ok(DisambiguationResult {
        d_plus,
        d_minus,
        d_k,
        d_m,
        m_star,
        k_star,
        features,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::default_interface;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn belief(v: &[f64]) -> BeliefState {
        BeliefState::new(v.to_vec()).unwrap()
    }

    #[test]
    fn gamma_cases() {
        assert_eq!(feature_gamma(&BeliefState::uniform(4).unwrap()), 0.25);
        assert_eq!(feature_gamma(&belief(&[0.7, 0.2, 0.1])), 0.7);
        assert_eq!(feature_gamma(&belief(&[1.0])), 1.0);
    }

    #[test]
    fn lambda_cases() {
        assert_eq!(feature_lambda(&BeliefState::uniform(4).unwrap()), 0.0);
        assert_abs_diff_eq!(feature_lambda(&belief(&[0.5, 0.3, 0.2])), 0.6, epsilon = 1e-9);
        assert_eq!(feature_lambda(&belief(&[1.0, 0.0])), 1.0);
        assert_eq!(feature_lambda(&belief(&[1.0])), 0.0);
    }

    #[test]
    fn omega_cases() {
        assert_abs_diff_eq!(feature_omega(&belief(&[0.5, 0.3, 0.2])), 0.2, epsilon = 1e-9);
        assert_eq!(feature_omega(&belief(&[0.4, 0.4, 0.2])), 0.0);
        assert_eq!(feature_omega(&BeliefState::uniform(3).unwrap()), 0.0);
        assert_eq!(feature_omega(&belief(&[1.0])), 0.0);
    }

    #[test]
    fn upsilon_cases() {
        let v = feature_upsilon(&belief(&[0.6, 0.4]), &belief(&[0.8, 0.2]), 0.5, 2.0).unwrap();
        assert_abs_diff_eq!(v, 0.4 / 1.5, epsilon = 1e-9);
        let same = belief(&[0.3, 0.7]);
        assert_eq!(feature_upsilon(&same, &same, 0.5, 2.0).unwrap(), 0.0);
        let u = BeliefState::uniform(3).unwrap();
        assert_eq!(feature_upsilon(&u, &u, -0.5, -2.0).unwrap(), 0.0);
        assert!(matches!(
            feature_upsilon(&same, &same, 1.0, 1.0),
            Err(Error::DegenerateProjection(_))
        ));
    }

    #[test]
    fn composite_metric() {
        let f = Features {
            gamma: 0.6,
            lambda: 0.2,
            omega: 0.2,
            upsilon: 0.2667,
        };
        assert_abs_diff_eq!(f.score(0.5), 0.5 * 0.024 + 0.5 * 0.2667, epsilon = 1e-12);
        assert_abs_diff_eq!(f.score(0.5), 0.14535, epsilon = 1e-9);
        let zero = Features::default();
        assert_eq!(dimension_metric(&zero, &zero, 0.5), (0.0, 0.0, 0.0));
        let other = Features { upsilon: 9.0, ..f };
        assert_eq!(f.score(1.0), other.score(1.0));
        let (p, m, d) = dimension_metric(&f, &other, 0.3);
        assert_eq!(d, p + m);
    }

    #[test]
    fn mode_metric_sums_members() {
        let joy = default_interface("joystick").unwrap();
        let d_k = [0.3, 0.1, 0.2, 0.05, 0.0, 0.4];
        let scores = mode_metric(&d_k, &joy);
        assert_abs_diff_eq!(scores[0].value, 0.4, epsilon = 1e-15);
        assert_eq!(scores[4].value, 0.0);
        let head = default_interface("head-array").unwrap();
        let scores = mode_metric(&d_k, &head);
        for (i, v) in d_k.iter().enumerate() {
            assert_eq!(scores[i].value, *v);
        }
        assert_eq!(scores[6].value, 0.0);
    }

    #[test]
    fn tie_break_prefers_current_then_lowest() {
        let scores = vec![
            ModeScore { id: 1, value: 0.2 },
            ModeScore { id: 2, value: 0.5 },
            ModeScore { id: 3, value: 0.5 },
        ];
        assert_eq!(select_mode(&scores, 3), 3);
        assert_eq!(select_mode(&scores, 1), 2);
    }

    fn two_goal_scene() -> Scene {
        Scene::from_positions(&[[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]).unwrap()
    }

    #[test]
    fn canonical_two_goal_scene_prefers_x() {
        let scene = two_goal_scene();
        let joy = default_interface("joystick").unwrap();
        let result = select_disambiguation_mode(
            &BeliefState::uniform(2).unwrap(),
            &Pose::at(0.0, 0.0, 0.0),
            &joy,
            2,
            &DisambiguationParams::default(),
            &FieldParams::defaults(2),
            &scene,
            &PotentialFieldParams::default(),
        )
        .unwrap();
        assert!(result.d_k[0] > result.d_k[1]);
        assert!(result.d_k[0] > result.d_k[2]);
        assert_eq!(result.k_star, ControlDimension::X);
        assert!(joy.mode(result.m_star).unwrap().contains(ControlDimension::X));
        for (i, d) in result.d_k.iter().enumerate() {
            assert!(d.is_finite() && *d >= 0.0);
            assert_eq!(*d, result.d_plus[i] + result.d_minus[i]);
        }
        assert_eq!(result.features.len(), 12);
    }

    #[test]
    fn mirror_projection_stays_uniform() {
        let scene = Scene::from_positions(&[[1.0, 0.5, 0.0], [1.0, -0.5, 0.0]]).unwrap();
        let proj = forward_project(
            &BeliefState::uniform(2).unwrap(),
            &Pose::at(0.0, 0.0, 0.0),
            ControlDimension::X,
            Sign::Positive,
            &DisambiguationParams::default(),
            &FieldParams::defaults(2),
            &scene,
            &PotentialFieldParams::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(proj.p_at_tb.get(0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(proj.p_at_tc.get(0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(proj.x_at_tb, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(proj.x_at_tc, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn projection_horizons_are_consistent_with_stepping() {
        // With t_b one step before t_c, the two snapshots differ by exactly one step.
        let scene = two_goal_scene();
        let params = DisambiguationParams {
            t_b_offset: 1.9,
            t_c_offset: 2.0,
            ..Default::default()
        };
        let field = FieldParams::defaults(2);
        let pf = PotentialFieldParams::default();
        let pose = Pose::at(0.0, 0.2, 0.0);
        let p0 = BeliefState::new(vec![0.3, 0.7]).unwrap();
        let proj = forward_project(&p0, &pose, ControlDimension::X, Sign::Negative, &params, &field, &scene, &pf).unwrap();
        let u = ControlCommand::unit(ControlDimension::X, Sign::Negative);
        let mut at_tb = pose;
        for _ in 0..params.short_steps() {
            at_tb = step_kinematics(&at_tb, &u, params.dt);
        }
        let ctx = inference_context(&at_tb, &scene, &pf).unwrap();
        let next = step_belief_field(&proj.p_at_tb, &u, &ctx, &field).unwrap();
        assert_eq!(next, proj.p_at_tc);
        assert_abs_diff_eq!(proj.x_at_tc - proj.x_at_tb, -0.1, epsilon = 1e-12);
    }

    #[test]
    fn single_goal_scores_nothing() {
        let scene = Scene::from_positions(&[[0.5, 0.5, 0.0]]).unwrap();
        let head = default_interface("head-array").unwrap();
        let result = select_disambiguation_mode(
            &BeliefState::uniform(1).unwrap(),
            &Pose::at(0.0, 0.0, 0.0),
            &head,
            4,
            &DisambiguationParams::default(),
            &FieldParams::defaults(1),
            &scene,
            &PotentialFieldParams::default(),
        )
        .unwrap();
        assert!(result.d_k.iter().all(|d| *d == 0.0));
        assert_eq!(result.m_star, 4);
    }

    #[test]
    fn symmetric_ring_keeps_current_mode() {
        // Goals at ±x, ±y, ±z: every signed projection is a relabelling of the others.
        let scene = Scene::from_positions(&[
            [1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0],
        ])
        .unwrap();
        let head = default_interface("head-array").unwrap();
        let result = select_disambiguation_mode(
            &BeliefState::uniform(6).unwrap(),
            &Pose::at(0.0, 0.0, 0.0),
            &head,
            3,
            &DisambiguationParams::default(),
            &FieldParams::defaults(6),
            &scene,
            &PotentialFieldParams::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(result.d_k[0], result.d_k[1], epsilon = 1e-12);
        assert_abs_diff_eq!(result.d_k[1], result.d_k[2], epsilon = 1e-12);
        assert_eq!(result.m_star, 3);
    }

    #[test]
    fn reflection_symmetry_equalizes_dimensions() {
        // Scene symmetric under swapping x and y.
        let scene = Scene::from_positions(&[[0.8, 0.2, 0.1], [0.2, 0.8, 0.1], [-0.5, -0.5, 0.3]]).unwrap();
        let result = select_disambiguation_mode(
            &BeliefState::new(vec![0.3, 0.3, 0.4]).unwrap(),
            &Pose::at(0.0, 0.0, 0.0),
            &default_interface("head-array").unwrap(),
            1,
            &DisambiguationParams::default(),
            &FieldParams::defaults(3),
            &scene,
            &PotentialFieldParams::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(result.d_k[0], result.d_k[1], epsilon = 1e-6);
    }

    #[test]
    fn result_serializes_with_wire_names() {
        let scene = two_goal_scene();
        let result = select_disambiguation_mode(
            &BeliefState::uniform(2).unwrap(),
            &Pose::at(0.0, 0.0, 0.0),
            &default_interface("joystick").unwrap(),
            1,
            &DisambiguationParams::default(),
            &FieldParams::defaults(2),
            &scene,
            &PotentialFieldParams::default(),
        )
        .unwrap();
        let json = serde_json::to_value(&result).unwrap();
        for key in ["dPlus", "dMinus", "dK", "dM", "mStar", "kStar", "features"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        let back: DisambiguationResult = serde_json::from_value(json).unwrap();
        assert_eq!(back, result);
    }

    #[test]
    fn rejects_bad_params_and_beliefs() {
        let scene = two_goal_scene();
        let joy = default_interface("joystick").unwrap();
        let bad = DisambiguationParams {
            t_b_offset: 2.0,
            t_c_offset: 1.0,
            ..Default::default()
        };
        let run = |p: &BeliefState, params: &DisambiguationParams| {
            select_disambiguation_mode(
                p,
                &Pose::at(0.0, 0.0, 0.0),
                &joy,
                1,
                params,
                &FieldParams::defaults(2),
                &scene,
                &PotentialFieldParams::default(),
            )
        };
        assert!(run(&BeliefState::uniform(2).unwrap(), &bad).is_err());
        assert!(matches!(
            run(&BeliefState::uniform(3).unwrap(), &DisambiguationParams::default()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    fn features() -> impl Strategy<Value = Features> {
        (0.0f64..1.0, 0.0f64..3.0, 0.0f64..1.0, 0.0f64..5.0).prop_map(|(gamma, lambda, omega, upsilon)| Features {
            gamma,
            lambda,
            omega,
            upsilon,
        })
    }

    proptest! {
        #[test]
        fn score_is_monotone_in_each_feature(f in features(), bump in 0.0f64..1.0, w in 0.0f64..=1.0) {
            let base = f.score(w);
            prop_assert!(base >= 0.0);
            for g in [
                Features { gamma: f.gamma + bump, ..f },
                Features { lambda: f.lambda + bump, ..f },
                Features { omega: f.omega + bump, ..f },
                Features { upsilon: f.upsilon + bump, ..f },
            ] {
                prop_assert!(g.score(w) >= base - 1e-15);
            }
            let zeroed = Features { gamma: f.gamma * 0.0, lambda: f.lambda * 0.0, omega: f.omega * 0.0, upsilon: f.upsilon * 0.0 };
            prop_assert_eq!(zeroed.score(w), 0.0);
        }
    }
}
