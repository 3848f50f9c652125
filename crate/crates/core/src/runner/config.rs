//! Experiment configuration files.
//!
//! A configuration is a TOML document with the sections `topology`,
//! `problem`, `algorithm`, `sweep`, `tuning` (optional) and `output`:
//!
//! ```toml
//! [topology]
//! ring = 10
//!
//! [problem]
//! kind = "logistic_nonconvex"
//! epsilon = 0.01
//! seed = 1
//! dimension = 5
//! points_per_agent = 100
//!
//! [algorithm]
//! variant = "lt_admm_vr"
//! gamma = 0.1
//! rho = 1.0
//! tau = 5
//! outer_iterations = 500
//! monte_carlo_runs = 20
//! master_seed = 7
//!
//! [sweep]
//! taus = [2, 4, 8]
//!
//! [output]
//! dir = "results"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::algorithms::{RunConfig, Variant};
use crate::graph::{Topology, TopologySpec};
use crate::metrics::CostModel;
use crate::oracles::Sampling;
use crate::problems::{ClusterParams, LossKind, ProblemInstance};
use crate::rng::{derive_seed, Purpose};

use super::RunnerError;

fn default_one() -> f64 {
    1.0
}

fn default_batch() -> usize {
    1
}

fn default_init_std() -> f64 {
    10.0
}

/// Problem section. `kind` selects the loss; data is either generated from
/// `seed` or read from `data_file` (CSV written by
/// [`ProblemInstance::write_csv`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    #[serde(flatten)]
    pub loss: LossKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub dimension: usize,
    /// Same sample count on every agent. Ignored when `sizes` is given.
    #[serde(default)]
    pub points_per_agent: usize,
    /// Per-agent sample counts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<usize>>,
    #[serde(default = "default_one")]
    pub separation: f64,
    #[serde(default = "default_one")]
    pub noise_std: f64,
    /// Largest over smallest per-coordinate feature scale.
    #[serde(default = "default_one")]
    pub scale_ratio: f64,
    /// Draw a fresh dataset for every Monte Carlo replicate.
    #[serde(default)]
    pub regenerate_per_replicate: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_file: Option<PathBuf>,
}

impl ProblemSpec {
    fn sizes(&self, n_agents: usize) -> Vec<usize> {
        self.sizes.clone().unwrap_or_else(|| vec![self.points_per_agent; n_agents])
    }

    /// Seed of the dataset used by `replicate`.
    pub fn data_seed(&self, replicate: usize) -> u64 {
        if self.regenerate_per_replicate {
            derive_seed(self.seed, Purpose::Data, &[replicate as u64])
        } else {
            self.seed
        }
    }

    pub fn build(&self, n_agents: usize, replicate: usize) -> Result<ProblemInstance, RunnerError> {
        if let Some(path) = &self.data_file {
            let file = std::fs::File::open(path).map_err(|e| RunnerError::io(path, e))?;
            return Ok(ProblemInstance::read_csv(file, self.loss)?);
        }
        let params = ClusterParams { separation: self.separation, noise_std: self.noise_std, scale_ratio: self.scale_ratio };
        Ok(ProblemInstance::generate_with_sizes(self.data_seed(replicate), &self.sizes(n_agents), self.dimension, self.loss, params)?)
    }

    fn validate(&self, n_agents: usize) -> Result<(), RunnerError> {
        if self.data_file.is_some() {
            if self.regenerate_per_replicate {
                return Err(RunnerError::Config("regenerate_per_replicate needs generated data".into()));
            }
            return Ok(());
        }
        if self.dimension == 0 {
            return Err(RunnerError::Config("problem.dimension must be positive".into()));
        }
        let sizes = self.sizes(n_agents);
        if sizes.len() != n_agents || sizes.contains(&0) {
            return Err(RunnerError::Config(format!("problem needs {n_agents} positive sample counts")));
        }
        if let LossKind::LogisticNonconvex { epsilon } = self.loss {
            if !(epsilon >= 0.0 && epsilon.is_finite()) {
                return Err(RunnerError::Config("problem.epsilon must be non-negative".into()));
            }
        }
        if !(self.separation.is_finite() && self.noise_std >= 0.0 && self.noise_std.is_finite() && self.scale_ratio > 0.0 && self.scale_ratio.is_finite()) {
            return Err(RunnerError::Config("invalid generator parameters".into()));
        }
        Ok(())
    }
}

/// Base algorithm settings shared by every grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSpec {
    pub variant: Variant,
    pub gamma: f64,
    #[serde(default = "default_one")]
    pub rho: f64,
    pub tau: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub sampling: Sampling,
    pub outer_iterations: usize,
    pub monte_carlo_runs: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_one")]
    pub t_g: f64,
    #[serde(default = "default_one")]
    pub t_c: f64,
    #[serde(default = "default_init_std")]
    pub init_std: f64,
}

/// Sweep axes. An omitted axis takes its single value from `[algorithm]`;
/// an axis given as an empty list is an error.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variants: Option<Vec<Variant>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gammas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taus: Option<Vec<usize>>,
    /// `t_G / t_C` ratios; each grid point uses `t_C = 1`, `t_G = ratio`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tg_tc_ratios: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TuningObjective {
    /// Smallest mean gradient norm after the budget.
    FinalGradient,
    /// Smallest model time to bring the mean gradient norm below `threshold`
    /// within the budget; ties and misses fall back to the final gradient.
    TimeToThreshold { threshold: f64 },
}

/// Per-grid-point step-size search over a geometric grid. When present it
/// replaces the `gammas` axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningSpec {
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub points: usize,
    /// Outer iterations per candidate.
    pub budget: usize,
    pub replicates: usize,
    pub objective: TuningObjective,
}

impl TuningSpec {
    pub fn candidates(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.gamma_min];
        }
        let ratio = (self.gamma_max / self.gamma_min).ln();
        (0..self.points)
            .map(|i| self.gamma_min * (ratio * i as f64 / (self.points - 1) as f64).exp())
            .collect()
    }

    fn validate(&self) -> Result<(), RunnerError> {
        if !(self.gamma_min > 0.0 && self.gamma_max >= self.gamma_min && self.gamma_max.is_finite()) {
            return Err(RunnerError::Config("tuning needs 0 < gamma_min <= gamma_max".into()));
        }
        if self.points == 0 || self.budget == 0 || self.replicates == 0 {
            return Err(RunnerError::Config("tuning points, budget and replicates must be positive".into()));
        }
        if let TuningObjective::TimeToThreshold { threshold } = self.objective {
            if !(threshold > 0.0) {
                return Err(RunnerError::Config("tuning threshold must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// Also record the inner-iterate convergence metric.
    #[serde(default)]
    pub record_dk: bool,
    /// Gradient-norm threshold for the reported stopping time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub topology: TopologySpec,
    pub problem: ProblemSpec,
    pub algorithm: AlgorithmSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tuning: Option<TuningSpec>,
    pub output: OutputSpec,
}

/// One point of the sweep grid before step-size tuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub variant: Variant,
    pub gamma: f64,
    pub tau: usize,
    pub t_g: f64,
    pub t_c: f64,
}

impl GridPoint {
    /// File stem unique within a grid.
    pub fn label(&self, index: usize) -> String {
        format!("{index:03}_{}_gamma{}_tau{}_tg{}_tc{}", self.variant, self.gamma, self.tau, self.t_g, self.t_c)
    }
}

fn axis<T: Clone>(name: &str, values: &Option<Vec<T>>, default: T) -> Result<Vec<T>, RunnerError> {
    match values {
        None => Ok(vec![default]),
        Some(v) if v.is_empty() => Err(RunnerError::Config(format!("sweep axis {name} is empty"))),
        Some(v) => Ok(v.clone()),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, RunnerError> {
        let config: Self = toml::from_str(text).map_err(|e| RunnerError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, RunnerError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunnerError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn topology(&self) -> Result<Topology, RunnerError> {
        self.topology.build().map_err(|e| RunnerError::Config(e.to_string()))
    }

    /// Checks everything that can be checked without computing.
    pub fn validate(&self) -> Result<(), RunnerError> {
        let topology = self.topology()?;
        self.problem.validate(topology.num_agents())?;
        if let Some(t) = &self.tuning {
            t.validate()?;
        }
        if let Some(th) = self.output.threshold {
            if !(th > 0.0) {
                return Err(RunnerError::Config("output.threshold must be positive".into()));
            }
        }
        let grid = self.grid()?;
        for point in &grid {
            self.run_config(point).validate().map_err(|e| RunnerError::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Cartesian product of the sweep axes, in the order variant, tau,
    /// ratio, gamma.
    pub fn grid(&self) -> Result<Vec<GridPoint>, RunnerError> {
        let a = &self.algorithm;
        let variants = axis("variants", &self.sweep.variants, a.variant)?;
        let gammas = axis("gammas", &self.sweep.gammas, a.gamma)?;
        let taus = axis("taus", &self.sweep.taus, a.tau)?;
        let costs: Vec<(f64, f64)> = match &self.sweep.tg_tc_ratios {
            None => vec![(a.t_g, a.t_c)],
            Some(r) if r.is_empty() => return Err(RunnerError::Config("sweep axis tg_tc_ratios is empty".into())),
            Some(r) => r.iter().map(|&ratio| (ratio, 1.0)).collect(),
        };
        let gammas = if self.tuning.is_some() { vec![a.gamma] } else { gammas };
        let mut grid = Vec::new();
        for &variant in &variants {
            for &tau in &taus {
                for &(t_g, t_c) in &costs {
                    for &gamma in &gammas {
                        grid.push(GridPoint { variant, gamma, tau, t_g, t_c });
                    }
                }
            }
        }
        Ok(grid)
    }

    pub fn run_config(&self, point: &GridPoint) -> RunConfig {
        let a = &self.algorithm;
        RunConfig {
            variant: point.variant,
            gamma: point.gamma,
            rho: a.rho,
            tau: point.tau,
            batch_size: a.batch_size,
            sampling: a.sampling,
            outer_iterations: a.outer_iterations,
            master_seed: a.master_seed,
            cost: CostModel { t_g: point.t_g, t_c: point.t_c },
            monte_carlo_runs: a.monte_carlo_runs,
            record_dk: self.output.record_dk,
            init_std: a.init_std,
        }
    }
}
