use ltadmm::algorithms::{RunConfig, Simulation, Variant};
use ltadmm::graph::{laplacian_eigenvalues, Topology};
use ltadmm::metrics::{aggregate, CostModel, IterationRecord};
use ltadmm::oracles::{full_gradient, sgd_estimate, EvalCounter, SagaTable, Sampling};
use ltadmm::problems::{LossKind, ProblemInstance};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn variant() -> impl Strategy<Value = Variant> {
    prop::sample::select(Variant::ALL.to_vec())
}

fn loss() -> impl Strategy<Value = LossKind> {
    prop_oneof![Just(LossKind::LeastSquares), (0.0..0.1f64).prop_map(|epsilon| LossKind::LogisticNonconvex { epsilon })]
}

fn config(variant: Variant, gamma: f64, rho: f64, tau: usize, batch_size: usize, seed: u64) -> RunConfig {
    RunConfig {
        variant,
        gamma,
        rho,
        tau,
        batch_size,
        sampling: Sampling::WithReplacement,
        outer_iterations: 10,
        master_seed: seed,
        cost: CostModel::default(),
        monte_carlo_runs: 1,
        record_dk: false,
        init_std: 1.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn conservation_holds_after_every_step(
        n in 2usize..8,
        graph_seed in any::<u64>(),
        v in variant(),
        loss in loss(),
        gamma in 0.005..0.1f64,
        rho in 0.1..3.0f64,
        tau in 1usize..5,
        batch in 1usize..4,
        seed in any::<u64>(),
    ) {
        let topology = Topology::random_connected(n, 0.3, &mut ChaCha8Rng::seed_from_u64(graph_seed)).unwrap();
        let problem = ProblemInstance::generate_classification(seed, n, 3, 6, loss).unwrap();
        let cfg = config(v, gamma, rho, tau, batch, seed);
        let mut sim = Simulation::new(&problem, &topology, &cfg, seed).unwrap();
        for _ in 0..8 {
            sim.step().unwrap();
            let scale = sim.states().iter().map(|s| rho * s.z.len() as f64 * s.x.norm() + s.z.iter().map(|z| z.norm()).sum::<f64>()).sum::<f64>().max(1.0);
            prop_assert!(sim.conservation_residual() <= 1e-12 * scale);
        }
    }

    #[test]
    fn minibatch_and_saga_are_unbiased(
        m in 1usize..6,
        loss in loss(),
        seed in any::<u64>(),
        stale_steps in 0usize..6,
    ) {
        let problem = ProblemInstance::generate_classification(seed, 1, 3, m, loss).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut point = || (0..3).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<f64>>();
        let x = point();
        let mut counter = EvalCounter::default();
        let full = full_gradient(&problem, 0, &x, &mut counter);

        let mut table = SagaTable::new(m, 3);
        table.refresh(&problem, 0, &point(), &mut counter);
        for s in 0..stale_steps {
            let y = point();
            table.update_memory(&problem, 0, &y, &[s % m], &mut counter).unwrap();
        }

        let mut sgd_mean = [0.0; 3];
        let mut saga_mean = [0.0; 3];
        for h in 0..m {
            let g = sgd_estimate(&problem, 0, &x, &[h], &mut counter).unwrap();
            let s = table.estimate(&problem, 0, &x, &[h], &mut counter).unwrap();
            for l in 0..3 {
                sgd_mean[l] += g[l] / m as f64;
                saga_mean[l] += s[l] / m as f64;
            }
        }
        let scale = full.norm().max(1.0);
        for l in 0..3 {
            prop_assert!((sgd_mean[l] - full[l]).abs() <= 1e-13 * scale);
            prop_assert!((saga_mean[l] - full[l]).abs() <= 1e-13 * scale);
        }
    }

    #[test]
    fn edge_index_round_trip(n in 2usize..12, p in 0.0..1.0f64, seed in any::<u64>()) {
        let t = Topology::random_connected(n, p, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        for idx in 0..t.num_directed_edges() {
            let (i, j) = t.edge(idx);
            prop_assert_eq!(t.edge_index(i, j), Some(idx));
            prop_assert!(t.edge_index(j, i).is_some());
        }
        let lap = t.laplacian();
        for i in 0..n {
            prop_assert!(lap.row(i).sum().abs() < 1e-12);
            prop_assert_eq!(t.edge_index(i, i), None);
        }
    }

    #[test]
    fn cycle_spectrum_matches_closed_form(n in 3usize..40) {
        let mut expected: Vec<f64> = (0..n).map(|k| 2.0 - 2.0 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos()).collect();
        expected.sort_by(f64::total_cmp);
        let got = laplacian_eigenvalues(&Topology::ring(n).unwrap());
        for (a, b) in got.iter().zip(&expected) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn components_are_lipschitz(seed in any::<u64>(), loss in loss()) {
        let problem = ProblemInstance::generate_classification(seed, 2, 4, 5, loss).unwrap();
        let lip = problem.smoothness_constant().lipschitz;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        for _ in 0..10 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
            let y: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
            let (i, h) = (rng.random_range(0..2), rng.random_range(0..5));
            let gx = problem.component_gradient(i, h, &x).unwrap();
            let gy = problem.component_gradient(i, h, &y).unwrap();
            let dist: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            if loss == LossKind::LeastSquares {
                // the bound is on the local average, not on single components
                let lx = problem.local_full_gradient(i, &x);
                let ly = problem.local_full_gradient(i, &y);
                prop_assert!((lx - ly).norm() <= lip * dist * (1.0 + 1e-6));
            } else {
                prop_assert!((gx - gy).norm() <= lip * dist * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn aggregate_mean_lies_between_extremes(values in prop::collection::vec(0.0..10.0f64, 1..12)) {
        let traces: Vec<Vec<IterationRecord>> = values
            .iter()
            .map(|&g| vec![IterationRecord {
                k: 1,
                grad_norm_sq: g,
                d_k: None,
                consensus_err: 0.0,
                conservation_residual: 0.0,
                component_evals: 0,
                comms: 0,
                charged_evals: 0,
                rounds: 1,
                model_time: 1.0,
            }])
            .collect();
        let refs: Vec<&[IterationRecord]> = traces.iter().map(|t| t.as_slice()).collect();
        let agg = aggregate(&refs);
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(agg[0].grad_norm_sq_mean >= lo - 1e-12 && agg[0].grad_norm_sq_mean <= hi + 1e-12);
        prop_assert!(agg[0].grad_norm_sq_std >= 0.0);
    }
}
