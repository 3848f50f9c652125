//! Ready-made experiments on the nonconvex logistic benchmark: ring of 10
//! agents, dimension 5, 100 samples per agent, regularization 0.01,
//! single-sample batches, penalty 1, 100 Monte Carlo replicates.
//!
//! The generated features have per-coordinate scales spread by a factor of
//! 16, which makes the local problems ill-conditioned enough for the number
//! of local steps to matter.

use std::path::Path;

use crate::algorithms::Variant;
use crate::graph::TopologySpec;
use crate::oracles::Sampling;
use crate::problems::LossKind;

use super::{AlgorithmSpec, ExperimentConfig, OutputSpec, ProblemSpec, RunnerError, SweepSpec, TuningObjective, TuningSpec};

/// Gradient-norm threshold of the local-step sweep.
pub const TAU_SWEEP_THRESHOLD: f64 = 1e-9;

fn benchmark_problem() -> ProblemSpec {
    ProblemSpec {
        loss: LossKind::LogisticNonconvex { epsilon: 0.01 },
        seed: 1,
        dimension: 5,
        points_per_agent: 100,
        sizes: None,
        separation: 1.0,
        noise_std: 1.0,
        scale_ratio: 16.0,
        regenerate_per_replicate: false,
        data_file: None,
    }
}

fn benchmark_algorithm(variant: Variant, gamma: f64, tau: usize, outer_iterations: usize) -> AlgorithmSpec {
    AlgorithmSpec {
        variant,
        gamma,
        rho: 1.0,
        tau,
        batch_size: 1,
        sampling: Sampling::WithReplacement,
        outer_iterations,
        monte_carlo_runs: 100,
        master_seed: 2024,
        t_g: 1.0,
        t_c: 1.0,
        init_std: 10.0,
    }
}

/// Gradient-norm traces of the three stochastic variants against model time
/// for `t_G / t_C` in {0.1, 1, 10}.
pub fn variant_comparison(out: &Path) -> ExperimentConfig {
    ExperimentConfig {
        topology: TopologySpec::Ring { ring: 10 },
        problem: benchmark_problem(),
        algorithm: benchmark_algorithm(Variant::LtAdmmVr, 0.1, 5, 2000),
        sweep: SweepSpec {
            variants: Some(vec![Variant::LtAdmm, Variant::LtAdmmVr, Variant::LtAdmmVrV2]),
            gammas: None,
            taus: None,
            tg_tc_ratios: Some(vec![0.1, 1.0, 10.0]),
        },
        tuning: Some(TuningSpec {
            gamma_min: 0.005,
            gamma_max: 0.5,
            points: 11,
            budget: 500,
            replicates: 4,
            objective: TuningObjective::FinalGradient,
        }),
        output: OutputSpec { dir: out.to_path_buf(), record_dk: false, threshold: Some(TAU_SWEEP_THRESHOLD) },
    }
}

/// Time for LT-ADMM-VR to reach the gradient threshold for
/// `tau` in {2, 4, 5, 8, 10, 16}, with the step-size tuned per `tau`.
pub fn tau_sweep(out: &Path) -> ExperimentConfig {
    ExperimentConfig {
        topology: TopologySpec::Ring { ring: 10 },
        problem: benchmark_problem(),
        algorithm: benchmark_algorithm(Variant::LtAdmmVr, 0.2, 5, 2500),
        sweep: SweepSpec { variants: None, gammas: None, taus: Some(vec![2, 4, 5, 8, 10, 16]), tg_tc_ratios: None },
        tuning: Some(TuningSpec {
            gamma_min: 0.05,
            gamma_max: 0.4,
            points: 10,
            budget: 2500,
            replicates: 4,
            objective: TuningObjective::TimeToThreshold { threshold: TAU_SWEEP_THRESHOLD },
        }),
        output: OutputSpec { dir: out.to_path_buf(), record_dk: false, threshold: Some(TAU_SWEEP_THRESHOLD) },
    }
}

/// Looks a preset up by its CLI name (`comparison` or `tau_sweep`).
pub fn preset(name: &str, out: &Path) -> Result<ExperimentConfig, RunnerError> {
    match name {
        "comparison" | "variant_comparison" => Ok(variant_comparison(out)),
        "tau_sweep" => Ok(tau_sweep(out)),
        other => Err(RunnerError::Config(format!("unknown preset {other:?}; expected comparison or tau_sweep"))),
    }
}
