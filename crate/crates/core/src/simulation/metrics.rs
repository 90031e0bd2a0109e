//! Trial metrics: inference accuracy, button-press tallies and the temporal
//! skewness of disambiguation requests.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::most_confident_goal;
use crate::simulation::log::{Event, TrialLog};

/// Fraction of nonzero-input steps whose belief argmax equals the ground truth.
pub fn inference_accuracy(log: &TrialLog) -> Result<f64> {
    let mut active = 0usize;
    let mut correct = 0usize;
    for r in log.records.iter().filter(|r| !r.u_h.is_zero()) {
        active += 1;
        if Some(most_confident_goal(&r.belief)) == r.ground_truth_goal {
            correct += 1;
        }
    }
    if active == 0 {
        return Err(Error::UndefinedAccuracy);
    }
    Ok(correct as f64 / active as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EventCounts {
    pub mode_switches: usize,
    pub disambiguation_requests: usize,
    pub button_presses: usize,
}

pub fn count_events(log: &TrialLog) -> EventCounts {
    let mut counts = EventCounts::default();
    for event in log.records.iter().flat_map(|r| &r.events) {
        match event {
            Event::ManualModeSwitch { .. } => counts.mode_switches += 1,
            Event::DisambiguationRequest { .. } => counts.disambiguation_requests += 1,
            _ => {}
        }
    }
    counts.button_presses = counts.mode_switches + counts.disambiguation_requests;
    counts
}

/// Times of every disambiguation request in the log, seconds.
pub fn request_times(log: &TrialLog) -> Vec<f64> {
    log.records
        .iter()
        .flat_map(|r| {
            r.events
                .iter()
                .filter(|e| matches!(e, Event::DisambiguationRequest { .. }))
                .map(move |_| r.t)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "value", rename_all = "snake_case")]
pub enum Skewness {
    /// No requests were issued.
    NoRequests,
    /// Fewer than three requests; the estimator is undefined and reported as 0.
    TooFewSamples(f64),
    Value(f64),
}

impl Skewness {
    pub fn value(&self) -> Option<f64> {
        match self {
            Skewness::NoRequests => None,
            Skewness::TooFewSamples(v) | Skewness::Value(v) => Some(*v),
        }
    }
}

/// Bias-corrected sample skewness `G1` of request times normalized by the trial duration.
pub fn request_skewness(request_times: &[f64], trial_duration: f64) -> Result<Skewness> {
    if !(trial_duration > 0.0) {
        return Err(Error::InvalidParameter("trial duration must be > 0".into()));
    }
    let n = request_times.len();
    if n == 0 {
        return Ok(Skewness::NoRequests);
    }
    if n < 3 {
        return Ok(Skewness::TooFewSamples(0.0));
    }
    let xs: Vec<f64> = request_times.iter().map(|t| t / trial_duration).collect();
    let nf = n as f64;
    let mean = xs.iter().sum::<f64>() / nf;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / nf;
    let m3 = xs.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / nf;
    if m2 <= 0.0 {
        return Ok(Skewness::Value(0.0));
    }
    let g1 = m3 / m2.powf(1.5);
    Ok(Skewness::Value(g1 * (nf * (nf - 1.0)).sqrt() / (nf - 2.0)))
}
