//! Per-step trial records and their CSV export.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::disambiguation::DisambiguationResult;
use crate::model::{BeliefState, ControlCommand, Pose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    ManualModeSwitch { from: usize, to: usize },
    DisambiguationRequest { result: Box<DisambiguationResult> },
    GoalTransition { from: usize, to: usize },
    Reset { seed: u64 },
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self {
            Event::ManualModeSwitch { .. } => "manual_mode_switch",
            Event::DisambiguationRequest { .. } => "disambiguation_request",
            Event::GoalTransition { .. } => "goal_transition",
            Event::Reset { .. } => "reset",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub pose: Pose,
    pub u_h: ControlCommand,
    pub u_a: ControlCommand,
    pub u: ControlCommand,
    pub alpha: f64,
    pub belief: BeliefState,
    pub current_mode: usize,
    /// Hidden goal of the simulated operator; unknown in live sessions.
    pub ground_truth_goal: Option<usize>,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrialLog {
    pub goal_count: usize,
    pub records: Vec<StepRecord>,
}

impl TrialLog {
    pub fn new(goal_count: usize) -> Self {
        Self {
            goal_count,
            records: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn csv_header(goal_count: usize) -> String {
        let mut cols: Vec<String> = ["t", "x", "y", "z", "qx", "qy", "qz", "qw"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for prefix in ["uh", "ua", "u"] {
            for axis in ["x", "y", "z", "rx", "ry", "rz"] {
                cols.push(format!("{prefix}{axis}"));
            }
        }
        cols.push("alpha".into());
        cols.extend((0..goal_count).map(|i| format!("p{i}")));
        cols.extend(["mode", "truth", "event"].iter().map(|s| s.to_string()));
        cols.join(",")
    }

    /// One row per step; floats use the shortest round-trip representation.
    /// Several events in one step are joined with `;`, an empty step is `none`.
    pub fn to_csv(&self) -> String {
        let mut out = Self::csv_header(self.goal_count);
        out.push('\n');
        for r in &self.records {
            let mut fields: Vec<String> = Vec::with_capacity(32 + self.goal_count);
            fields.push(r.t.to_string());
            fields.extend(r.pose.position.iter().map(|v| v.to_string()));
            fields.extend(r.pose.quaternion_xyzw().iter().map(|v| v.to_string()));
            for cmd in [&r.u_h, &r.u_a, &r.u] {
                fields.extend(cmd.as_array().iter().map(|v| v.to_string()));
            }
            fields.push(r.alpha.to_string());
            fields.extend(r.belief.as_slice().iter().map(|v| v.to_string()));
            fields.push(r.current_mode.to_string());
            fields.push(r.ground_truth_goal.map(|g| g.to_string()).unwrap_or_default());
            let events = if r.events.is_empty() {
                "none".to_string()
            } else {
                r.events.iter().map(Event::name).collect::<Vec<_>>().join(";")
            };
            fields.push(events);
            let _ = writeln!(out, "{}", fields.join(","));
        }
        out
    }
}
