//! Configuration-driven Monte Carlo experiments: sweep grids, step-size
//! tuning, CSV traces and a JSON manifest.

mod config;
mod experiment;
mod presets;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algorithms::{run_replicate, AlgorithmError, ReplicateStatus, ReplicateTrace, RunConfig};
use crate::graph::Topology;
use crate::metrics::{aggregate, AggregatedRecord, IterationRecord};
use crate::problems::{ProblemError, ProblemInstance};

pub use config::{AlgorithmSpec, ExperimentConfig, GridPoint, OutputSpec, ProblemSpec, SweepSpec, TuningObjective, TuningSpec};
pub use experiment::{run_experiment, GridResult, Manifest, ReplicateSummary, MANIFEST_FILE, SUMMARY_FILE};
pub use presets::{variant_comparison, tau_sweep, preset, TAU_SWEEP_THRESHOLD};

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Algorithm(#[from] AlgorithmError),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("every replicate of every grid point diverged")]
    AllDiverged,
}

impl RunnerError {
    pub(crate) fn io(path: &Path, err: std::io::Error) -> Self {
        RunnerError::Io { path: path.to_path_buf(), message: err.to_string() }
    }

    /// Process exit code: 2 for configuration and input problems, 3 when
    /// everything diverged, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunnerError::Config(_) | RunnerError::Io { .. } | RunnerError::Problem(_) => 2,
            RunnerError::AllDiverged => 3,
            RunnerError::Algorithm(AlgorithmError::InvalidConfig(_) | AlgorithmError::SizeMismatch { .. }) => 2,
            _ => 1,
        }
    }
}

/// First iteration whose mean gradient norm is below `threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingInfo {
    pub k: usize,
    pub model_time: f64,
}

/// Model time of the first record strictly below `threshold`, scanning in
/// order without smoothing. `None` if the trace never gets there.
pub fn stopping_time(trace: &[AggregatedRecord], threshold: f64) -> Option<StoppingInfo> {
    trace
        .iter()
        .find(|r| r.grad_norm_sq_mean < threshold)
        .map(|r| StoppingInfo { k: r.k, model_time: r.model_time })
}

/// Datasets used by the replicates of an experiment.
#[derive(Debug, Clone)]
pub enum Datasets {
    Shared(ProblemInstance),
    PerReplicate(Vec<ProblemInstance>),
}

impl Datasets {
    pub fn build(spec: &ProblemSpec, n_agents: usize, replicates: usize) -> Result<Self, RunnerError> {
        if spec.regenerate_per_replicate {
            (0..replicates).map(|r| spec.build(n_agents, r)).collect::<Result<_, _>>().map(Datasets::PerReplicate)
        } else {
            spec.build(n_agents, 0).map(Datasets::Shared)
        }
    }

    pub fn get(&self, replicate: usize) -> &ProblemInstance {
        match self {
            Datasets::Shared(p) => p,
            Datasets::PerReplicate(v) => &v[replicate],
        }
    }

    /// Largest per-agent sample count over all datasets.
    pub fn max_points(&self) -> usize {
        match self {
            Datasets::Shared(p) => p.max_points(),
            Datasets::PerReplicate(v) => v.iter().map(|p| p.max_points()).max().unwrap_or(0),
        }
    }
}

/// Replicate traces plus the mean over the completed ones.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarlo {
    pub replicates: Vec<ReplicateTrace>,
    pub mean: Vec<AggregatedRecord>,
}

impl MonteCarlo {
    pub fn completed(&self) -> usize {
        self.replicates.iter().filter(|r| r.status == ReplicateStatus::Completed).count()
    }
}

/// Runs `config.monte_carlo_runs` replicates in parallel, each on its own
/// dataset when the datasets are per-replicate.
pub fn monte_carlo(datasets: &Datasets, topology: &Topology, config: &RunConfig) -> Result<MonteCarlo, RunnerError> {
    config.validate()?;
    let replicates: Vec<ReplicateTrace> = (0..config.monte_carlo_runs)
        .into_par_iter()
        .map(|r| run_replicate(datasets.get(r), topology, config, r))
        .collect::<Result<_, _>>()?;
    let completed: Vec<&[IterationRecord]> = replicates
        .iter()
        .filter(|r| r.status == ReplicateStatus::Completed)
        .map(|r| r.records.as_slice())
        .collect();
    let mean = aggregate(&completed);
    Ok(MonteCarlo { replicates, mean })
}

/// Score of one tuning candidate; lower is better.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub gamma: f64,
    pub diverged: bool,
    pub final_grad_norm_sq: Option<f64>,
    pub time_to_threshold: Option<f64>,
}

impl CandidateScore {
    fn key(&self, objective: TuningObjective) -> (f64, f64) {
        if self.diverged {
            return (f64::INFINITY, f64::INFINITY);
        }
        let fin = self.final_grad_norm_sq.unwrap_or(f64::INFINITY);
        let fin = if fin.is_nan() { f64::INFINITY } else { fin };
        match objective {
            TuningObjective::FinalGradient => (fin, 0.0),
            TuningObjective::TimeToThreshold { .. } => (self.time_to_threshold.unwrap_or(f64::INFINITY), fin),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningOutcome {
    pub best_gamma: f64,
    pub candidates: Vec<CandidateScore>,
}

/// Geometric grid search over the step-size at a fixed iteration budget.
/// A candidate with any diverged replicate is discarded. Returns `None` if
/// every candidate diverged.
pub fn tune_gamma(datasets: &Datasets, topology: &Topology, base: &RunConfig, spec: &TuningSpec) -> Result<Option<TuningOutcome>, RunnerError> {
    let candidates: Vec<CandidateScore> = spec
        .candidates()
        .into_par_iter()
        .map(|gamma| {
            let config = RunConfig {
                gamma,
                outer_iterations: spec.budget,
                monte_carlo_runs: spec.replicates,
                record_dk: false,
                ..base.clone()
            };
            let mc = monte_carlo(datasets, topology, &config)?;
            let diverged = mc.completed() < mc.replicates.len();
            let time_to_threshold = match spec.objective {
                TuningObjective::TimeToThreshold { threshold } => stopping_time(&mc.mean, threshold).map(|s| s.model_time),
                TuningObjective::FinalGradient => None,
            };
            Ok(CandidateScore { gamma, diverged, final_grad_norm_sq: mc.mean.last().map(|r| r.grad_norm_sq_mean), time_to_threshold })
        })
        .collect::<Result<_, RunnerError>>()?;
    let best = candidates
        .iter()
        .filter(|c| !c.diverged)
        .min_by(|a, b| a.key(spec.objective).partial_cmp(&b.key(spec.objective)).expect("scores are not NaN"));
    Ok(best.map(|b| TuningOutcome { best_gamma: b.gamma, candidates: candidates.clone() }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(k: usize, g: f64) -> AggregatedRecord {
        AggregatedRecord {
            k,
            model_time: 10.0 * k as f64,
            grad_norm_sq_mean: g,
            grad_norm_sq_std: 0.0,
            d_k_mean: None,
            consensus_err_mean: 0.0,
            component_evals: 0.0,
            comms: 0.0,
        }
    }

    #[test]
    fn stopping_time_cases() {
        let never: Vec<_> = (1..=5).map(|k| rec(k, 1.0)).collect();
        assert_eq!(stopping_time(&never, 0.5), None);

        let monotone: Vec<_> = (1..=10).map(|k| rec(k, 10f64.powi(-(k as i32)))).collect();
        assert_eq!(stopping_time(&monotone, 2e-7), Some(StoppingInfo { k: 7, model_time: 70.0 }));

        let noisy: Vec<_> = [1.0, 0.3, 0.05, 0.4, 0.01].iter().enumerate().map(|(i, &g)| rec(i + 1, g)).collect();
        let first = stopping_time(&noisy, 0.1).unwrap();
        let rescan = noisy.iter().position(|r| r.grad_norm_sq_mean < 0.1).unwrap();
        assert_eq!(first.k, noisy[rescan].k);
        assert_eq!(first.k, 3);
        assert_eq!(stopping_time(&[], 1.0), None);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(RunnerError::Config("x".into()).exit_code(), 2);
        assert_eq!(RunnerError::AllDiverged.exit_code(), 3);
        assert_eq!(RunnerError::Algorithm(AlgorithmError::Diverged { agent: 0, iteration: 1 }).exit_code(), 1);
    }
}
