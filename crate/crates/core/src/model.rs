//! Domain vocabulary: poses, goals, commands, control dimensions and modes,
//! interface descriptions, scenes and the belief simplex.

use std::fmt;
use std::ops::{Add, Mul};

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used for quaternion norms and simplex sums.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// End-effector (or goal) configuration: position in meters plus a unit quaternion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseRepr", into = "PoseRepr")]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

/// JSON shape of a pose: `{"position":[x,y,z],"orientation":[qx,qy,qz,qw]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoseRepr {
    pub position: [f64; 3],
    #[serde(default = "identity_xyzw")]
    pub orientation: [f64; 4],
}

fn identity_xyzw() -> [f64; 4] {
    [0.0, 0.0, 0.0, 1.0]
}

impl TryFrom<PoseRepr> for Pose {
    type Error = Error;

    fn try_from(repr: PoseRepr) -> Result<Self> {
        let [qx, qy, qz, qw] = repr.orientation;
        Pose::from_parts(Vector3::from(repr.position), Quaternion::new(qw, qx, qy, qz))
    }
}

impl From<Pose> for PoseRepr {
    fn from(pose: Pose) -> Self {
        let q = pose.orientation.quaternion();
        PoseRepr {
            position: pose.position.into(),
            orientation: [q.i, q.j, q.k, q.w],
        }
    }
}

impl Pose {
    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        // Re-normalize so accumulated drift never leaks through.
        let orientation = UnitQuaternion::new_normalize(orientation.into_inner());
        Self {
            position,
            orientation,
        }
    }

    /// Builds a pose from a raw (possibly unnormalized) quaternion.
    pub fn from_parts(position: Vector3<f64>, orientation: Quaternion<f64>) -> Result<Self> {
        let norm = orientation.norm();
        if !norm.is_finite() || norm < 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "orientation quaternion has degenerate norm {norm}"
            )));
        }
        if !position.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite position".into()));
        }
        Ok(Self {
            position,
            orientation: UnitQuaternion::new_normalize(orientation),
        })
    }

    pub fn at(x: f64, y: f64, z: f64) -> Self {
        Self {
            position: Vector3::new(x, y, z),
            orientation: UnitQuaternion::identity(),
        }
    }

    /// Orientation as `[qx, qy, qz, qw]`.
    pub fn quaternion_xyzw(&self) -> [f64; 4] {
        let q = self.orientation.quaternion();
        [q.i, q.j, q.k, q.w]
    }

    /// Rotation vector taking `self.orientation` to `other.orientation` (shorter arc).
    pub fn rotation_error_to(&self, other: &Pose) -> Vector3<f64> {
        let mut delta = (other.orientation * self.orientation.inverse()).into_inner();
        if delta.w < 0.0 {
            delta = -delta;
        }
        UnitQuaternion::new_normalize(delta).scaled_axis()
    }
}

/// A candidate goal in the scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    pub id: usize,
    #[serde(flatten)]
    pub pose: Pose,
    #[serde(default)]
    pub label: String,
}

impl Goal {
    pub fn new(id: usize, pose: Pose) -> Self {
        Self {
            id,
            pose,
            label: format!("goal {id}"),
        }
    }
}

/// Six-dimensional Cartesian velocity command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CommandRepr", into = "CommandRepr")]
pub struct ControlCommand {
    /// m/s
    pub translational: Vector3<f64>,
    /// rad/s
    pub rotational: Vector3<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CommandRepr {
    pub translational: [f64; 3],
    pub rotational: [f64; 3],
}

impl TryFrom<CommandRepr> for ControlCommand {
    type Error = Error;

    fn try_from(repr: CommandRepr) -> Result<Self> {
        let cmd = ControlCommand::from_array([
            repr.translational[0],
            repr.translational[1],
            repr.translational[2],
            repr.rotational[0],
            repr.rotational[1],
            repr.rotational[2],
        ]);
        if cmd.is_finite() {
            Ok(cmd)
        } else {
            Err(Error::InvalidParameter("non-finite command".into()))
        }
    }
}

impl From<ControlCommand> for CommandRepr {
    fn from(cmd: ControlCommand) -> Self {
        CommandRepr {
            translational: cmd.translational.into(),
            rotational: cmd.rotational.into(),
        }
    }
}

impl ControlCommand {
    pub fn zero() -> Self {
        Self {
            translational: Vector3::zeros(),
            rotational: Vector3::zeros(),
        }
    }

    pub fn new(translational: Vector3<f64>, rotational: Vector3<f64>) -> Self {
        Self {
            translational,
            rotational,
        }
    }

    pub fn translation(x: f64, y: f64, z: f64) -> Self {
        Self::new(Vector3::new(x, y, z), Vector3::zeros())
    }

    /// Unit velocity along a single control dimension.
    pub fn unit(k: ControlDimension, sign: Sign) -> Self {
        let mut values = [0.0; 6];
        values[k.index()] = sign.value();
        Self::from_array(values)
    }

    /// Components ordered `[x, y, z, roll, pitch, yaw]`.
    pub fn as_array(&self) -> [f64; 6] {
        [
            self.translational.x,
            self.translational.y,
            self.translational.z,
            self.rotational.x,
            self.rotational.y,
            self.rotational.z,
        ]
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Self {
            translational: Vector3::new(v[0], v[1], v[2]),
            rotational: Vector3::new(v[3], v[4], v[5]),
        }
    }

    pub fn component(&self, k: ControlDimension) -> f64 {
        self.as_array()[k.index()]
    }

    pub fn norm(&self) -> f64 {
        (self.translational.norm_squared() + self.rotational.norm_squared()).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.as_array().iter().all(|v| *v == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }
}

impl Add for ControlCommand {
    type Output = ControlCommand;

    fn add(self, rhs: ControlCommand) -> ControlCommand {
        ControlCommand::new(
            self.translational + rhs.translational,
            self.rotational + rhs.rotational,
        )
    }
}

impl Mul<f64> for ControlCommand {
    type Output = ControlCommand;

    fn mul(self, rhs: f64) -> ControlCommand {
        ControlCommand::new(self.translational * rhs, self.rotational * rhs)
    }
}

/// Direction of a unit command along a dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Positive, Sign::Negative];

    pub fn value(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => -1.0,
        }
    }
}

/// One of the six Cartesian control dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "DimensionRepr", into = "DimensionRepr")]
pub struct ControlDimension(u8);

/// Dimensions are accepted either by index (`0..6`) or by name (`"x"`, `"yaw"`, ...).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DimensionRepr {
    Index(usize),
    Name(String),
}

impl TryFrom<DimensionRepr> for ControlDimension {
    type Error = Error;

    fn try_from(repr: DimensionRepr) -> Result<Self> {
        match repr {
            DimensionRepr::Index(i) => ControlDimension::new(i),
            DimensionRepr::Name(name) => name.parse(),
        }
    }
}

impl From<ControlDimension> for DimensionRepr {
    fn from(k: ControlDimension) -> Self {
        DimensionRepr::Name(k.name().to_string())
    }
}

const DIMENSION_NAMES: [&str; 6] = ["x", "y", "z", "roll", "pitch", "yaw"];

impl ControlDimension {
    pub const X: ControlDimension = ControlDimension(0);
    pub const Y: ControlDimension = ControlDimension(1);
    pub const Z: ControlDimension = ControlDimension(2);
    pub const ROLL: ControlDimension = ControlDimension(3);
    pub const PITCH: ControlDimension = ControlDimension(4);
    pub const YAW: ControlDimension = ControlDimension(5);

    pub const COUNT: usize = 6;

    pub const ALL: [ControlDimension; 6] = [
        Self::X,
        Self::Y,
        Self::Z,
        Self::ROLL,
        Self::PITCH,
        Self::YAW,
    ];

    pub fn new(index: usize) -> Result<Self> {
        if index < Self::COUNT {
            Ok(ControlDimension(index as u8))
        } else {
            Err(Error::InvalidParameter(format!(
                "control dimension index {index} out of range [0, 6)"
            )))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn name(self) -> &'static str {
        DIMENSION_NAMES[self.index()]
    }

    pub fn is_translational(self) -> bool {
        self.0 < 3
    }
}

impl std::str::FromStr for ControlDimension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DIMENSION_NAMES
            .iter()
            .position(|n| n.eq_ignore_ascii_case(s.trim()))
            .map(|i| ControlDimension(i as u8))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown control dimension '{s}'")))
    }
}

impl fmt::Display for ControlDimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A subset of control dimensions operable at the same time.
///
/// A mode with no dimensions is *inert*: it stands in for an actuator
/// outside the Cartesian model (such as a gripper) and never contributes to
/// disambiguation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlMode {
    pub id: usize,
    pub dimensions: Vec<ControlDimension>,
}

impl ControlMode {
    pub fn new(id: usize, dimensions: Vec<ControlDimension>) -> Result<Self> {
        for (i, k) in dimensions.iter().enumerate() {
            if dimensions[..i].contains(k) {
                return Err(Error::InvalidInterface(format!(
                    "dimension {k} repeated in mode {id}"
                )));
            }
        }
        Ok(Self { id, dimensions })
    }

    pub fn inert(id: usize) -> Self {
        Self {
            id,
            dimensions: Vec::new(),
        }
    }

    pub fn is_inert(&self) -> bool {
        self.dimensions.is_empty()
    }

    pub fn contains(&self, k: ControlDimension) -> bool {
        self.dimensions.contains(&k)
    }
}

/// Description of a control interface: its modes and their cyclic switch order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterfaceSpec {
    pub name: String,
    pub modes: Vec<ControlMode>,
    pub switch_order: Vec<usize>,
}

impl InterfaceSpec {
    /// Builds an interface whose mode ids are `1..=modes.len()` in the order given.
    pub fn from_partition(name: &str, partition: Vec<Vec<ControlDimension>>) -> Result<Self> {
        let modes = partition
            .into_iter()
            .enumerate()
            .map(|(i, dims)| ControlMode::new(i + 1, dims))
            .collect::<Result<Vec<_>>>()?;
        let switch_order = modes.iter().map(|m| m.id).collect();
        let spec = Self {
            name: name.to_string(),
            modes,
            switch_order,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() {
            return Err(Error::InvalidInterface("interface has no modes".into()));
        }
        for (i, m) in self.modes.iter().enumerate() {
            if self.modes[..i].iter().any(|o| o.id == m.id) {
                return Err(Error::InvalidInterface(format!("duplicate mode id {}", m.id)));
            }
        }
        for k in ControlDimension::ALL {
            if !self.modes.iter().any(|m| m.contains(k)) {
                return Err(Error::InvalidInterface(format!(
                    "dimension {k} is not covered by any mode"
                )));
            }
        }
        let mut order = self.switch_order.clone();
        order.sort_unstable();
        let mut ids: Vec<usize> = self.modes.iter().map(|m| m.id).collect();
        ids.sort_unstable();
        if order != ids {
            return Err(Error::InvalidInterface(
                "switch order is not a permutation of the mode ids".into(),
            ));
        }
        Ok(())
    }

    pub fn mode(&self, id: usize) -> Option<&ControlMode> {
        self.modes.iter().find(|m| m.id == id)
    }

    pub fn first_mode(&self) -> usize {
        self.switch_order[0]
    }

    /// Mode that follows `current` in the cyclic switch order.
    pub fn next_mode(&self, current: usize) -> usize {
        match self.switch_order.iter().position(|&id| id == current) {
            Some(pos) => self.switch_order[(pos + 1) % self.switch_order.len()],
            None => self.first_mode(),
        }
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }
}

/// Built-in interface layouts.
///
/// The joystick groups its two axes as `{x,y}`, `{z}`, `{roll,pitch}`,
/// `{yaw}` plus one inert mode. The head array drives a single dimension
/// at a time, followed by one inert mode.
pub fn default_interface(name: &str) -> Result<InterfaceSpec> {
    use ControlDimension as K;
    match name {
        "joystick" => InterfaceSpec::from_partition(
            "joystick",
            vec![vec![K::X, K::Y], vec![K::Z], vec![K::ROLL, K::PITCH], vec![K::YAW], vec![]],
        ),
        "head-array" => InterfaceSpec::from_partition(
            "head-array",
            vec![
                vec![K::X],
                vec![K::Y],
                vec![K::Z],
                vec![K::ROLL],
                vec![K::PITCH],
                vec![K::YAW],
                vec![],
            ],
        ),
        other => Err(Error::InvalidInterface(format!("unknown interface '{other}'"))),
    }
}

/// Probability vector over goals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct BeliefState(Vec<f64>);

impl BeliefState {
    /// Validates that `probabilities` lies on the simplex.
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::InvalidBelief("empty belief".into()));
        }
        if let Some(bad) = probabilities
            .iter()
            .find(|p| !p.is_finite() || **p < 0.0 || **p > 1.0)
        {
            return Err(Error::InvalidBelief(format!("entry {bad} outside [0, 1]")));
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::InvalidBelief(format!("entries sum to {sum}")));
        }
        Ok(Self(probabilities))
    }

    pub fn uniform(n_g: usize) -> Result<Self> {
        uniform_belief(n_g)
    }

    /// Projects `raw` onto the simplex by clamping to `[0, 1]` and rescaling.
    /// A vector whose clamped entries sum to zero maps to the uniform belief.
    pub fn normalize(raw: &[f64]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::InvalidBelief("empty belief".into()));
        }
        if raw.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numerical("non-finite belief entry".into()));
        }
        let clamped: Vec<f64> = raw.iter().map(|p| p.clamp(0.0, 1.0)).collect();
        let sum: f64 = clamped.iter().sum();
        if sum <= 0.0 {
            return uniform_belief(raw.len());
        }
        Ok(Self(clamped.into_iter().map(|p| p / sum).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for BeliefState {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        BeliefState::new(v)
    }
}

impl From<BeliefState> for Vec<f64> {
    fn from(b: BeliefState) -> Self {
        b.0
    }
}

pub fn uniform_belief(n_g: usize) -> Result<BeliefState> {
    if n_g == 0 {
        return Err(Error::InvalidScene("scene has no goals".into()));
    }
    let p = 1.0 / n_g as f64;
    let v = vec![p; n_g];
    let sum: f64 = v.iter().sum();
    Ok(BeliefState(v.into_iter().map(|x| x / sum).collect()))
}

pub fn unit_command(k: ControlDimension, sign: Sign) -> ControlCommand {
    ControlCommand::unit(k, sign)
}

/// Axis-aligned box in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Bounds {
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            min: [-1.5, -1.5, -1.5],
            max: [1.5, 1.5, 1.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub goals: Vec<Goal>,
    #[serde(default)]
    pub workspace_bounds: Bounds,
}

impl Scene {
    pub fn new(goals: Vec<Goal>, workspace_bounds: Bounds) -> Result<Self> {
        let scene = Self {
            goals,
            workspace_bounds,
        };
        scene.validate()?;
        Ok(scene)
    }

    /// Scene with default bounds and goals at the given positions (identity orientation).
    pub fn from_positions(positions: &[[f64; 3]]) -> Result<Self> {
        let goals = positions
            .iter()
            .enumerate()
            .map(|(i, p)| Goal::new(i, Pose::at(p[0], p[1], p[2])))
            .collect();
        Scene::new(goals, Bounds::default())
    }

    pub fn validate(&self) -> Result<()> {
        if self.goals.is_empty() {
            return Err(Error::InvalidScene("scene has no goals".into()));
        }
        for (i, g) in self.goals.iter().enumerate() {
            if g.id != i {
                return Err(Error::InvalidScene(format!(
                    "goal ids must be dense 0..n_g in order; found {} at position {i}",
                    g.id
                )));
            }
            if !self.workspace_bounds.contains(&g.pose.position) {
                return Err(Error::InvalidScene(format!(
                    "goal {} lies outside the workspace bounds",
                    g.id
                )));
            }
        }
        Ok(())
    }

    pub fn goal_count(&self) -> usize {
        self.goals.len()
    }
}
