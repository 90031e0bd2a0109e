//! Wire schema: JSON text frames over a WebSocket.

use ids_core::disambiguation::DisambiguationResult;
use ids_core::model::{Goal, Pose};
use serde::{Deserialize, Serialize};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    /// Axis values in `[-1, 1]`, mapped onto the current mode's dimensions in order.
    Command { axes: Vec<f64> },
    ModeSwitch,
    Disambiguate,
    Reset { seed: u64 },
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ProtocolError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("axis {index} is {value}; axes must be finite and within [-1, 1]")]
    AxisOutOfRange { index: usize, value: f64 },
}

impl ClientMessage {
    pub fn parse(text: &str) -> Result<Self, ProtocolError> {
        let msg: Self = serde_json::from_str(text).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
        msg.validate()?;
        Ok(msg)
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if let ClientMessage::Command { axes } = self {
            for (index, &value) in axes.iter().enumerate() {
                if !value.is_finite() || !(-1.0..=1.0).contains(&value) {
                    return Err(ProtocolError::AxisOutOfRange { index, value });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalInfo {
    pub id: usize,
    #[serde(flatten)]
    pub pose: Pose,
    pub label: String,
}

impl From<&Goal> for GoalInfo {
    fn from(g: &Goal) -> Self {
        Self {
            id: g.id,
            pose: g.pose,
            label: g.label.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StateFrame {
    /// Session time, seconds.
    pub t: f64,
    pub pose: Pose,
    pub belief: Vec<f64>,
    pub alpha: f64,
    pub mode: usize,
    /// Dimension names of the current mode.
    pub mode_dimensions: Vec<String>,
    pub goals: Vec<GoalInfo>,
    pub disamb: Option<DisambiguationResult>,
    pub goal_reached: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerFrame {
    Hello { version: u32 },
    State(Box<StateFrame>),
    Error { detail: String },
}

impl ServerFrame {
    pub fn hello() -> Self {
        ServerFrame::Hello {
            version: PROTOCOL_VERSION,
        }
    }

    pub fn error(detail: impl Into<String>) -> Self {
        ServerFrame::Error { detail: detail.into() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("frames serialize")
    }
}
