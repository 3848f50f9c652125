use std::fs;
use std::path::Path;

use ltadmm::runner::{variant_comparison, tau_sweep, preset, run_experiment, ExperimentConfig, RunnerError, MANIFEST_FILE, SUMMARY_FILE};

fn small_config(dir: &Path) -> String {
    format!(
        r#"
[topology]
ring = 4

[problem]
kind = "logistic_nonconvex"
epsilon = 0.01
seed = 3
dimension = 3
points_per_agent = 8

[algorithm]
variant = "lt_admm_vr"
gamma = 0.1
tau = 3
outer_iterations = 30
monte_carlo_runs = 3
master_seed = 11

[sweep]
variants = ["lt_admm", "lt_admm_vr"]
tg_tc_ratios = [0.1, 10.0]

[output]
dir = "{}"
record_dk = true
threshold = 1e-3
"#,
        dir.display()
    )
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn writes_one_trace_per_grid_point_and_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = ExperimentConfig::from_toml(&small_config(dir.path())).unwrap();
    let manifest = run_experiment(&config, Some(1)).unwrap();
    assert_eq!(manifest.grid.len(), 4);
    assert_eq!(manifest.library_version, env!("CARGO_PKG_VERSION"));
    for g in &manifest.grid {
        let text = fs::read_to_string(dir.path().join(&g.file)).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "k,model_time,grad_norm_sq_mean,grad_norm_sq_std,d_k_mean,consensus_err_mean,component_evals,comms");
        let ks: Vec<usize> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
        assert_eq!(ks, (1..=30).collect::<Vec<_>>());
        assert_eq!(g.replicates.len(), 3);
        assert!(g.replicates.iter().all(|r| r.data_seed == 3));
    }
    assert!(dir.path().join(MANIFEST_FILE).exists());
    let summary = fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap();
    assert_eq!(summary.lines().count(), 5);
}

#[test]
fn reruns_are_byte_identical_for_any_worker_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let config_a = ExperimentConfig::from_toml(&small_config(a.path())).unwrap();
    let config_b = ExperimentConfig::from_toml(&small_config(b.path())).unwrap();
    run_experiment(&config_a, Some(1)).unwrap();
    let manifest_first = fs::read(a.path().join(MANIFEST_FILE)).unwrap();
    run_experiment(&config_b, Some(3)).unwrap();
    assert_eq!(csv_files(a.path()), csv_files(b.path()));

    run_experiment(&config_a, None).unwrap();
    assert_eq!(fs::read(a.path().join(MANIFEST_FILE)).unwrap(), manifest_first);
}

#[test]
fn configuration_errors_are_reported_before_computing() {
    let dir = tempfile::tempdir().unwrap();
    let base = small_config(dir.path());

    let empty = base.replace("tg_tc_ratios = [0.1, 10.0]", "tg_tc_ratios = []");
    let err = ExperimentConfig::from_toml(&empty).unwrap_err();
    assert!(matches!(err, RunnerError::Config(_)));
    assert_eq!(err.exit_code(), 2);

    let bad_gamma = base.replace("gamma = 0.1", "gamma = -1.0");
    assert!(matches!(ExperimentConfig::from_toml(&bad_gamma), Err(RunnerError::Config(_))));

    let unknown = base.replace("[sweep]", "[sweep]\nalphas = [1]");
    assert!(matches!(ExperimentConfig::from_toml(&unknown), Err(RunnerError::Config(_))));

    // an output path below a regular file cannot be created
    let blocker = dir.path().join("file");
    fs::write(&blocker, b"x").unwrap();
    let config = ExperimentConfig::from_toml(&small_config(&blocker.join("out"))).unwrap();
    let err = run_experiment(&config, Some(1)).unwrap_err();
    assert!(matches!(err, RunnerError::Io { .. }));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn divergence_everywhere_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let text = small_config(dir.path()).replace("gamma = 0.1", "gamma = 50.0");
    let config = ExperimentConfig::from_toml(&text).unwrap();
    let err = run_experiment(&config, Some(1)).unwrap_err();
    assert!(matches!(err, RunnerError::AllDiverged));
    assert_eq!(err.exit_code(), 3);
    let manifest = fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
    assert!(manifest.contains("\"diverged\""));
}

#[test]
fn per_replicate_data_regeneration() {
    let dir = tempfile::tempdir().unwrap();
    let text = small_config(dir.path())
        .replace("points_per_agent = 8", "points_per_agent = 8\nregenerate_per_replicate = true")
        .replace("variants = [\"lt_admm\", \"lt_admm_vr\"]", "variants = [\"lt_admm\"]");
    let config = ExperimentConfig::from_toml(&text).unwrap();
    let manifest = run_experiment(&config, Some(1)).unwrap();
    let seeds: Vec<u64> = manifest.grid[0].replicates.iter().map(|r| r.data_seed).collect();
    assert_eq!(seeds.len(), 3);
    assert!(seeds[0] != seeds[1] && seeds[1] != seeds[2]);
}

#[test]
fn tuning_picks_a_candidate_per_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let text = small_config(dir.path()).replace(
        "[output]",
        "[tuning]\ngamma_min = 0.01\ngamma_max = 0.5\npoints = 4\nbudget = 20\nreplicates = 2\nobjective = { kind = \"final_gradient\" }\n\n[output]",
    );
    let config = ExperimentConfig::from_toml(&text).unwrap();
    let manifest = run_experiment(&config, Some(1)).unwrap();
    for g in &manifest.grid {
        let tuning = g.tuning.as_ref().unwrap();
        assert_eq!(tuning.candidates.len(), 4);
        assert_eq!(g.point.gamma, tuning.best_gamma);
        let best = tuning
            .candidates
            .iter()
            .filter(|c| !c.diverged)
            .map(|c| c.final_grad_norm_sq.unwrap())
            .fold(f64::INFINITY, f64::min);
        let chosen = tuning.candidates.iter().find(|c| c.gamma == tuning.best_gamma).unwrap();
        assert_eq!(chosen.final_grad_norm_sq.unwrap(), best);
    }
}

#[test]
fn presets_are_valid_and_round_trip() {
    let out = Path::new("unused");
    let comparison = variant_comparison(out);
    assert_eq!(comparison.grid().unwrap().len(), 9);
    let sweep = tau_sweep(out);
    let taus: Vec<usize> = sweep.grid().unwrap().iter().map(|p| p.tau).collect();
    assert_eq!(taus, vec![2, 4, 5, 8, 10, 16]);
    for config in [comparison, sweep] {
        config.validate().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&config.to_toml()).unwrap(), config);
    }
    assert!(preset("unknown", out).is_err());
}
