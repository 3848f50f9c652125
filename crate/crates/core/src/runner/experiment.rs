use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::ReplicateStatus;
use crate::metrics::{AggregatedRecord, Baseline};

use super::{monte_carlo, stopping_time, tune_gamma, Datasets, ExperimentConfig, GridPoint, RunnerError, StoppingInfo, TuningOutcome};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARY_FILE: &str = "summary.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateSummary {
    pub replicate: usize,
    pub seed: u64,
    pub data_seed: u64,
    #[serde(flatten)]
    pub status: ReplicateStatus,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub label: String,
    pub file: String,
    /// Grid point with the step-size actually used.
    pub point: GridPoint,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tuning: Option<TuningOutcome>,
    pub completed: usize,
    pub diverged: usize,
    pub replicates: Vec<ReplicateSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stopping: Option<StoppingInfo>,
    pub final_grad_norm_sq: Option<f64>,
    /// Time per `tau` iterations of the reference algorithms under this
    /// grid point's cost model.
    pub baseline_time_per_tau: Vec<(Baseline, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub library_version: String,
    pub config: ExperimentConfig,
    pub grid: Vec<GridResult>,
}

fn ensure_writable(dir: &Path) -> Result<(), RunnerError> {
    fs::create_dir_all(dir).map_err(|e| RunnerError::io(dir, e))?;
    let probe = dir.join(".write_probe");
    fs::write(&probe, b"").map_err(|e| RunnerError::io(dir, e))?;
    fs::remove_file(&probe).map_err(|e| RunnerError::io(&probe, e))
}

fn write_trace(path: &Path, trace: &[AggregatedRecord], record_dk: bool) -> Result<(), RunnerError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["k", "model_time", "grad_norm_sq_mean", "grad_norm_sq_std"];
    if record_dk {
        header.push("d_k_mean");
    }
    header.extend(["consensus_err_mean", "component_evals", "comms"]);
    w.write_record(&header)?;
    for r in trace {
        let mut row = vec![r.k.to_string(), r.model_time.to_string(), r.grad_norm_sq_mean.to_string(), r.grad_norm_sq_std.to_string()];
        if record_dk {
            row.push(r.d_k_mean.map(|v| v.to_string()).unwrap_or_default());
        }
        row.extend([r.consensus_err_mean.to_string(), r.component_evals.to_string(), r.comms.to_string()]);
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| RunnerError::io(path, e))
}

fn write_summary(path: &Path, grid: &[GridResult]) -> Result<(), RunnerError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["label", "variant", "gamma", "tau", "t_g", "t_c", "completed", "diverged", "stopping_k", "stopping_time", "final_grad_norm_sq"])?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for g in grid {
        w.write_record([
            g.label.clone(),
            g.point.variant.to_string(),
            g.point.gamma.to_string(),
            g.point.tau.to_string(),
            g.point.t_g.to_string(),
            g.point.t_c.to_string(),
            g.completed.to_string(),
            g.diverged.to_string(),
            opt(g.stopping.map(|s| s.k.to_string())),
            opt(g.stopping.map(|s| s.model_time.to_string())),
            opt(g.final_grad_norm_sq.map(|v| v.to_string())),
        ])?;
    }
    w.flush().map_err(|e| RunnerError::io(path, e))
}

fn run_point(
    config: &ExperimentConfig,
    datasets: &Datasets,
    topology: &crate::graph::Topology,
    index: usize,
    point: &GridPoint,
) -> Result<(GridResult, Vec<AggregatedRecord>), RunnerError> {
    let mut point = point.clone();
    let mut run_config = config.run_config(&point);
    let tuning = match &config.tuning {
        Some(spec) => {
            let outcome = tune_gamma(datasets, topology, &run_config, spec)?;
            if let Some(o) = &outcome {
                point.gamma = o.best_gamma;
                run_config.gamma = o.best_gamma;
            }
            outcome
        }
        None => None,
    };
    let mc = monte_carlo(datasets, topology, &run_config)?;
    let label = point.label(index);
    let replicates = mc
        .replicates
        .iter()
        .map(|r| ReplicateSummary {
            replicate: r.replicate,
            seed: r.seed,
            data_seed: config.problem.data_seed(r.replicate),
            status: r.status.clone(),
            iterations: r.records.len(),
        })
        .collect();
    let completed = mc.completed();
    let result = GridResult {
        file: format!("{label}.csv"),
        label,
        tuning,
        completed,
        diverged: mc.replicates.len() - completed,
        replicates,
        stopping: config.output.threshold.and_then(|th| stopping_time(&mc.mean, th)),
        final_grad_norm_sq: mc.mean.last().map(|r| r.grad_norm_sq_mean),
        baseline_time_per_tau: Baseline::ALL
            .iter()
            .map(|&b| (b, b.time_per_tau(&run_config.cost, point.tau, datasets.max_points())))
            .collect(),
        point,
    };
    Ok((result, mc.mean))
}

/// Runs every grid point, writes one CSV trace per point, `summary.csv` and
/// `manifest.json` into `config.output.dir`, and returns the manifest.
///
/// Grid points and replicates run concurrently on a pool of `workers`
/// threads (all cores when `None`); outputs do not depend on the pool size.
pub fn run_experiment(config: &ExperimentConfig, workers: Option<usize>) -> Result<Manifest, RunnerError> {
    config.validate()?;
    let grid = config.grid()?;
    let topology = config.topology()?;
    let dir: PathBuf = config.output.dir.clone();
    ensure_writable(&dir)?;
    let datasets = Datasets::build(&config.problem, topology.num_agents(), config.algorithm.monte_carlo_runs)?;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            return Err(RunnerError::Config("workers must be positive".into()));
        }
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| RunnerError::Config(e.to_string()))?;

    let results: Vec<GridResult> = pool.install(|| {
        grid.par_iter()
            .enumerate()
            .map(|(index, point)| {
                let (result, trace) = run_point(config, &datasets, &topology, index, point)?;
                write_trace(&dir.join(&result.file), &trace, config.output.record_dk)?;
                Ok(result)
            })
            .collect::<Result<_, RunnerError>>()
    })?;

    let manifest = Manifest { library_version: env!("CARGO_PKG_VERSION").to_string(), config: config.clone(), grid: results };
    write_summary(&dir.join(SUMMARY_FILE), &manifest.grid)?;
    let path = dir.join(MANIFEST_FILE);
    let mut file = fs::File::create(&path).map_err(|e| RunnerError::io(&path, e))?;
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    writeln!(file, "{json}").map_err(|e| RunnerError::io(&path, e))?;

    if manifest.grid.iter().all(|g| g.completed == 0) {
        return Err(RunnerError::AllDiverged);
    }
    Ok(manifest)
}
