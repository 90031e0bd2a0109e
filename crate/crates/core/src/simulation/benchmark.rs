//! Monte Carlo comparison of the three predictors on randomly generated scenes.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::PredictorKind;
use crate::model::{Bounds, Goal, Pose, Scene};
use crate::simulation::metrics::inference_accuracy;
use crate::simulation::trial::{run_trial, TrialConfig};

/// How benchmark scenes are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneGeneration {
    /// Goals are drawn uniformly from the cube `[-extent, extent]^3`, meters.
    pub extent: f64,
    /// Minimum distance between any two goals, meters.
    pub min_separation: f64,
    /// Minimum distance between a goal and the start pose, meters.
    pub min_start_distance: f64,
}

impl Default for SceneGeneration {
    fn default() -> Self {
        Self {
            extent: 0.8,
            min_separation: 0.3,
            min_start_distance: 0.5,
        }
    }
}

const MAX_REJECTIONS: usize = 10_000;

impl SceneGeneration {
    pub fn validate(&self) -> Result<()> {
        if !(self.extent > 0.0) || !(self.min_separation >= 0.0) || !(self.min_start_distance >= 0.0) {
            return Err(Error::InvalidParameter(format!("bad scene generation settings {self:?}")));
        }
        Ok(())
    }

    /// Rejection-samples `n_g` goals with identity orientation around `start`.
    pub fn sample(&self, n_g: usize, start: &Pose, bounds: Bounds, rng: &mut ChaCha8Rng) -> Result<Scene> {
        let mut goals: Vec<Goal> = Vec::with_capacity(n_g);
        let mut attempts = 0;
        while goals.len() < n_g {
            attempts += 1;
            if attempts > MAX_REJECTIONS {
                return Err(Error::InvalidParameter(format!(
                    "could not place {n_g} goals with separation {} in extent {}",
                    self.min_separation, self.extent
                )));
            }
            let e = self.extent;
            let p = Pose::at(
                rng.random_range(-e..=e),
                rng.random_range(-e..=e),
                rng.random_range(-e..=e),
            );
            let far_from_start = (p.position - start.position).norm() >= self.min_start_distance;
            let separated = goals
                .iter()
                .all(|g| (g.pose.position - p.position).norm() >= self.min_separation);
            if far_from_start && separated && bounds.contains(&p.position) {
                goals.push(Goal::new(goals.len(), p));
            }
        }
        Scene::new(goals, bounds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkSettings {
    pub trials: usize,
    /// Inclusive range of goal counts.
    pub goal_range: [usize; 2],
    pub predictors: Vec<PredictorKind>,
    pub generation: SceneGeneration,
}

impl Default for BenchmarkSettings {
    fn default() -> Self {
        Self {
            trials: 500,
            goal_range: [3, 5],
            predictors: PredictorKind::ALL.to_vec(),
            generation: SceneGeneration::default(),
        }
    }
}

impl BenchmarkSettings {
    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::InvalidParameter("benchmark needs at least one trial".into()));
        }
        let [lo, hi] = self.goal_range;
        if lo < 1 || lo > hi {
            return Err(Error::InvalidParameter(format!("bad goal range [{lo}, {hi}]")));
        }
        if self.predictors.is_empty() {
            return Err(Error::InvalidParameter("no predictors selected".into()));
        }
        self.generation.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracySummary {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl AccuracySummary {
    /// Mean and population standard deviation.
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self { mean: 0.0, std: 0.0, n };
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n as f64;
        Self {
            mean,
            std: var.sqrt(),
            n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchmarkReport {
    #[serde(flatten)]
    pub accuracy: BTreeMap<PredictorKind, AccuracySummary>,
    pub trials: usize,
    pub mean_trial_steps: f64,
    pub config_digest: String,
}

/// Outcome of one benchmark trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub index: usize,
    pub goal_count: usize,
    pub seed: u64,
    pub steps: usize,
    /// Accuracy per predictor; `None` when the operator never moved.
    pub accuracy: BTreeMap<PredictorKind, Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRun {
    pub report: BenchmarkReport,
    pub trials: Vec<TrialSummary>,
}

impl BenchmarkRun {
    /// One row per trial: `trial,goals,seed,steps,<predictor>...`.
    pub fn accuracy_csv(&self) -> String {
        let kinds: Vec<PredictorKind> = self.report.accuracy.keys().copied().collect();
        let mut out = String::from("trial,goals,seed,steps");
        for k in &kinds {
            out.push(',');
            out.push_str(k.name());
        }
        out.push('\n');
        for t in &self.trials {
            out.push_str(&format!("{},{},{},{}", t.index, t.goal_count, t.seed, t.steps));
            for k in &kinds {
                out.push(',');
                if let Some(Some(a)) = t.accuracy.get(k) {
                    out.push_str(&a.to_string());
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Per-trial generator: the base seed with the trial index as stream.
pub fn trial_rng(base_seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(index as u64);
    rng
}

/// Runs every selected predictor on the same generated scenes and operator seeds.
///
/// `make_config` builds the trial configuration for a generated scene; its
/// predictor, seed and start pose are overwritten per trial. Assistance is
/// switched off so every predictor observes the same trajectory.
pub fn run_benchmark<F>(
    settings: &BenchmarkSettings,
    base_seed: u64,
    start_pose: Pose,
    bounds: Bounds,
    config_digest: String,
    make_config: F,
) -> Result<BenchmarkRun>
where
    F: Fn(Scene) -> Result<TrialConfig> + Sync,
{
    settings.validate()?;
    let mut kinds = settings.predictors.clone();
    kinds.sort();
    kinds.dedup();

    let trials: Vec<TrialSummary> = (0..settings.trials)
        .into_par_iter()
        .map(|index| {
            let mut rng = trial_rng(base_seed, index);
            let [lo, hi] = settings.goal_range;
            let n_g = rng.random_range(lo..=hi);
            let scene = settings.generation.sample(n_g, &start_pose, bounds, &mut rng)?;
            let seed: u64 = rng.random();
            let mut config = make_config(scene)?;
            config.seed = seed;
            config.start_pose = start_pose;
            config.assistance_enabled = false;
            let mut accuracy = BTreeMap::new();
            let mut steps = 0;
            for &kind in &kinds {
                config.predictor = kind;
                let log = run_trial(&config)?;
                steps = log.len();
                let a = match inference_accuracy(&log) {
                    Ok(a) => Some(a),
                    Err(Error::UndefinedAccuracy) => None,
                    Err(e) => return Err(e),
                };
                accuracy.insert(kind, a);
            }
            Ok(TrialSummary {
                index,
                goal_count: n_g,
                seed,
                steps,
                accuracy,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let accuracy = kinds
        .iter()
        .map(|k| {
            let samples: Vec<f64> = trials.iter().filter_map(|t| t.accuracy[k]).collect();
            (*k, AccuracySummary::from_samples(&samples))
        })
        .collect();
    let mean_trial_steps = trials.iter().map(|t| t.steps as f64).sum::<f64>() / trials.len() as f64;
    Ok(BenchmarkRun {
        report: BenchmarkReport {
            accuracy,
            trials: settings.trials,
            mean_trial_steps,
            config_digest,
        },
        trials,
    })
}
