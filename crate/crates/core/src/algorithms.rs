//! Local-training ADMM: the per-agent state machine and the synchronous
//! communication round.
//!
//! Each outer iteration `k` every agent runs `tau` local steps
//!
//! ```text
//! phi^0     = x_{i,k}
//! phi^{t+1} = phi^t - gamma * (g_i(phi^t) + rho |N_i| phi^t - sum_j z_ij)
//! x_{i,k+1} = phi^tau
//! ```
//!
//! then sends `z_ij - 2 rho x_{i,k+1}` to every neighbor `j`, and finally
//! replaces each of its edge variables with `z_ij <- (z_ij - p_ji) / 2` using
//! the payload `p_ji` received from `j`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Topology;
use crate::metrics::{aggregate, iteration_charge, AggregatedRecord, Charge, CostModel, IterationRecord};
use crate::oracles::{full_gradient, sample_batch, sgd_estimate, EvalCounter, OracleError, SagaTable, Sampling};
use crate::problems::ProblemInstance;
use crate::rng::{derive_seed, stream, Purpose};

/// Iterates with a norm above this are treated as divergent.
pub const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Debug, Error, PartialEq)]
pub enum AlgorithmError {
    #[error("agent {agent} diverged at outer iteration {iteration}")]
    Diverged { agent: usize, iteration: usize },
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error("topology has {topology} agents but the problem has {problem}")]
    SizeMismatch { topology: usize, problem: usize },
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Full local gradients in every local step.
    Exact,
    /// Mini-batch SGD local steps.
    LtAdmm,
    /// SAGA local steps with the table refreshed at the start of every epoch.
    LtAdmmVr,
    /// SAGA local steps with the table carried over between epochs.
    LtAdmmVrV2,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Exact, Variant::LtAdmm, Variant::LtAdmmVr, Variant::LtAdmmVrV2];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Exact => "exact",
            Variant::LtAdmm => "lt_admm",
            Variant::LtAdmmVr => "lt_admm_vr",
            Variant::LtAdmmVrV2 => "lt_admm_vr_v2",
        }
    }

    pub fn uses_saga(self) -> bool {
        matches!(self, Variant::LtAdmmVr | Variant::LtAdmmVrV2)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = AlgorithmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| AlgorithmError::InvalidConfig(format!("unknown variant {s:?}")))
    }
}

fn default_init_std() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub variant: Variant,
    /// Local step-size.
    pub gamma: f64,
    /// ADMM penalty.
    pub rho: f64,
    /// Local steps per communication round.
    pub tau: usize,
    pub batch_size: usize,
    #[serde(default)]
    pub sampling: Sampling,
    pub outer_iterations: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub cost: CostModel,
    pub monte_carlo_runs: usize,
    /// Also record the inner-iterate convergence metric (costs extra
    /// measurement evaluations, not charged to the cost model).
    #[serde(default)]
    pub record_dk: bool,
    /// Standard deviation of the Gaussian initial iterates.
    #[serde(default = "default_init_std")]
    pub init_std: f64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), AlgorithmError> {
        let fail = |msg: &str| Err(AlgorithmError::InvalidConfig(msg.to_string()));
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return fail("gamma must be positive");
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return fail("rho must be positive");
        }
        if self.tau == 0 {
            return fail("tau must be at least 1");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1");
        }
        if self.monte_carlo_runs == 0 {
            return fail("monte_carlo_runs must be at least 1");
        }
        if !(self.cost.t_g >= 0.0 && self.cost.t_c >= 0.0) {
            return fail("cost constants must be non-negative");
        }
        if !(self.init_std >= 0.0 && self.init_std.is_finite()) {
            return fail("init_std must be non-negative");
        }
        Ok(())
    }

    /// Seed of Monte Carlo replicate `r`.
    pub fn replicate_seed(&self, replicate: usize) -> u64 {
        derive_seed(self.master_seed, Purpose::Initialization, &[replicate as u64])
    }
}

/// One agent's persistent state between outer iterations.
#[derive(Debug, Clone)]
pub struct AgentState {
    pub id: usize,
    pub x: DVector<f64>,
    /// `z_ij`, in the order of `topology.neighbors(id)`.
    pub z: Vec<DVector<f64>>,
    pub saga: Option<SagaTable>,
    pub counter: EvalCounter,
}

impl AgentState {
    /// Initial state with `z_ij = x_{i,0}` for every neighbor.
    pub fn new(id: usize, x0: DVector<f64>, degree: usize, variant: Variant, points: usize) -> Self {
        let n = x0.len();
        Self {
            id,
            z: vec![x0.clone(); degree],
            x: x0,
            saga: variant.uses_saga().then(|| SagaTable::new(points, n)),
            counter: EvalCounter::default(),
        }
    }
}

/// `p_ij = z_ij - 2 rho x_i`, sent from `sender` to `receiver`.
#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub sender: usize,
    pub receiver: usize,
    pub payload: DVector<f64>,
}

/// Optional per-step recordings of a local training epoch.
#[derive(Debug, Clone, Copy, Default)]
pub struct EpochOptions {
    pub record_inner: bool,
    pub record_estimates: bool,
}

#[derive(Debug, Clone)]
pub struct EpochOutput {
    pub x_new: DVector<f64>,
    /// `phi^0 .. phi^{tau-1}` when recorded.
    pub inner_iterates: Vec<DVector<f64>>,
    /// `g_i(phi^0) .. g_i(phi^{tau-1})` when recorded.
    pub estimates: Vec<DVector<f64>>,
}

fn is_divergent(x: &DVector<f64>) -> bool {
    !x.iter().all(|v| v.is_finite()) || x.norm() > DIVERGENCE_NORM
}

/// Runs the `tau` local steps of one agent at outer iteration `k` and
/// returns `x_{i,k+1}`. Does not modify `state.x`.
pub fn local_training_epoch(
    state: &mut AgentState,
    instance: &ProblemInstance,
    config: &RunConfig,
    k: usize,
    seed: u64,
    options: EpochOptions,
) -> Result<EpochOutput, AlgorithmError> {
    let agent = state.id;
    let degree = state.z.len() as f64;
    let n = state.x.len();
    let mut sum_z = DVector::zeros(n);
    for z in &state.z {
        sum_z += z;
    }

    let mut phi = state.x.clone();
    if let Some(table) = state.saga.as_mut() {
        if config.variant == Variant::LtAdmmVr || k == 0 {
            table.refresh(instance, agent, phi.as_slice(), &mut state.counter);
        }
    }

    let m = instance.num_points(agent);
    let mut out = EpochOutput { x_new: DVector::zeros(0), inner_iterates: Vec::new(), estimates: Vec::new() };
    for t in 0..config.tau {
        let batch = match config.variant {
            Variant::Exact => Vec::new(),
            _ => {
                let mut rng = stream(seed, Purpose::Batch, &[agent as u64, k as u64, t as u64]);
                sample_batch(&mut rng, m, config.batch_size, config.sampling)?
            }
        };
        let g = match (&mut state.saga, config.variant) {
            (_, Variant::Exact) => full_gradient(instance, agent, phi.as_slice(), &mut state.counter),
            (Some(table), _) => table.estimate(instance, agent, phi.as_slice(), &batch, &mut state.counter)?,
            (None, _) => sgd_estimate(instance, agent, phi.as_slice(), &batch, &mut state.counter)?,
        };

        let mut next = phi.clone();
        for l in 0..n {
            next[l] -= config.gamma * (g[l] + config.rho * degree * phi[l] - sum_z[l]);
        }
        // the memory takes the point where its gradients were just evaluated
        if let Some(table) = state.saga.as_mut() {
            table.update_memory(instance, agent, phi.as_slice(), &batch, &mut state.counter)?;
        }
        if options.record_inner {
            out.inner_iterates.push(phi);
        }
        if options.record_estimates {
            out.estimates.push(g);
        }
        phi = next;
    }

    if is_divergent(&phi) {
        return Err(AlgorithmError::Diverged { agent, iteration: k });
    }
    out.x_new = phi;
    Ok(out)
}

/// New `z_ij` from the current `z_ij` and the payload `p_ji = z_ji - 2 rho x_j`.
pub fn z_update(z_ij: &DVector<f64>, payload_ji: &DVector<f64>) -> DVector<f64> {
    (z_ij - payload_ji) * 0.5
}

/// All messages of one round, given the agents' new iterates.
pub fn outgoing_messages(states: &[AgentState], x_new: &[DVector<f64>], topology: &Topology, rho: f64) -> Vec<Message> {
    let mut messages = Vec::with_capacity(topology.num_directed_edges());
    for (i, state) in states.iter().enumerate() {
        for (pos, &j) in topology.neighbors(i).iter().enumerate() {
            messages.push(Message { sender: i, receiver: j, payload: &state.z[pos] - &x_new[i] * (2.0 * rho) });
        }
    }
    messages
}

/// Recordings of one outer step, indexed `[agent][t]`.
#[derive(Debug, Clone, Default)]
pub struct StepRecording {
    pub inner_iterates: Vec<Vec<DVector<f64>>>,
    pub estimates: Vec<Vec<DVector<f64>>>,
}

/// One replicate: agent states plus the running cost tally.
#[derive(Debug, Clone)]
pub struct Simulation<'a> {
    instance: &'a ProblemInstance,
    topology: &'a Topology,
    config: &'a RunConfig,
    seed: u64,
    states: Vec<AgentState>,
    k: usize,
    charged: Charge,
    model_time: f64,
}

impl<'a> Simulation<'a> {
    /// Draws `x_{i,0} ~ N(0, init_std^2 I)` for every agent from `seed`.
    pub fn new(instance: &'a ProblemInstance, topology: &'a Topology, config: &'a RunConfig, seed: u64) -> Result<Self, AlgorithmError> {
        let normal = Normal::new(0.0, config.init_std).map_err(|e| AlgorithmError::InvalidConfig(e.to_string()))?;
        let x0 = (0..topology.num_agents())
            .map(|i| {
                let mut rng = stream(seed, Purpose::Initialization, &[i as u64]);
                DVector::from_fn(instance.dimension(), |_, _| normal.sample(&mut rng))
            })
            .collect();
        Self::with_initial(instance, topology, config, seed, x0)
    }

    pub fn with_initial(
        instance: &'a ProblemInstance,
        topology: &'a Topology,
        config: &'a RunConfig,
        seed: u64,
        x0: Vec<DVector<f64>>,
    ) -> Result<Self, AlgorithmError> {
        config.validate()?;
        if topology.num_agents() != instance.num_agents() || x0.len() != instance.num_agents() {
            return Err(AlgorithmError::SizeMismatch { topology: topology.num_agents(), problem: instance.num_agents() });
        }
        if x0.iter().any(|x| x.len() != instance.dimension()) {
            return Err(AlgorithmError::InvalidConfig("initial iterate has wrong dimension".into()));
        }
        let variant = config.variant;
        if variant != Variant::Exact && (0..instance.num_agents()).any(|i| config.batch_size > instance.num_points(i)) {
            return Err(AlgorithmError::InvalidConfig("batch_size exceeds an agent's data".into()));
        }
        let states = x0
            .into_iter()
            .enumerate()
            .map(|(i, x)| AgentState::new(i, x, topology.degree(i), variant, instance.num_points(i)))
            .collect();
        Ok(Self { instance, topology, config, seed, states, k: 0, charged: Charge::default(), model_time: 0.0 })
    }

    pub fn states(&self) -> &[AgentState] {
        &self.states
    }

    pub fn iteration(&self) -> usize {
        self.k
    }

    pub fn charged(&self) -> Charge {
        self.charged
    }

    pub fn x_bar(&self) -> DVector<f64> {
        let n = self.states.len() as f64;
        let mut sum = DVector::zeros(self.instance.dimension());
        for s in &self.states {
            sum += &s.x;
        }
        sum / n
    }

    /// `||sum_i sum_j z_ij - rho sum_i d_i x_i||`.
    pub fn conservation_residual(&self) -> f64 {
        let mut r = DVector::zeros(self.instance.dimension());
        for s in &self.states {
            for z in &s.z {
                r += z;
            }
            r -= &s.x * (self.config.rho * s.z.len() as f64);
        }
        r.norm()
    }

    pub fn step(&mut self) -> Result<IterationRecord, AlgorithmError> {
        self.step_with(EpochOptions::default()).map(|(rec, _)| rec)
    }

    /// Local training on every agent, message exchange behind a barrier,
    /// edge-variable update, then metrics.
    pub fn step_with(&mut self, options: EpochOptions) -> Result<(IterationRecord, StepRecording), AlgorithmError> {
        let config = self.config;
        let k = self.k;
        let options = EpochOptions { record_inner: options.record_inner || config.record_dk, ..options };
        let before: Vec<u64> = self.states.iter().map(|s| s.counter.component_gradient_evals).collect();

        let mut x_new = Vec::with_capacity(self.states.len());
        let mut recording = StepRecording::default();
        for state in &mut self.states {
            let out = local_training_epoch(state, self.instance, config, k, self.seed, options)?;
            x_new.push(out.x_new);
            recording.inner_iterates.push(out.inner_iterates);
            recording.estimates.push(out.estimates);
        }

        let messages = outgoing_messages(&self.states, &x_new, self.topology, config.rho);
        for (state, x) in self.states.iter_mut().zip(x_new) {
            state.counter.communications += state.z.len() as u64;
            state.x = x;
        }
        for msg in &messages {
            let state = &mut self.states[msg.receiver];
            let pos = self.topology.neighbors(msg.receiver).binary_search(&msg.sender).expect("message along an edge");
            state.z[pos] = z_update(&state.z[pos], &msg.payload);
        }

        let slowest = self
            .states
            .iter()
            .zip(&before)
            .map(|(s, b)| s.counter.component_gradient_evals - b)
            .max()
            .unwrap_or(0);
        let charge = Charge { gradient_evals: slowest, rounds: 1 };
        self.charged += charge;
        self.model_time += config.cost.time(charge);
        self.k += 1;

        let d_k = config.record_dk.then(|| self.dk_from_recording(&recording));
        Ok((self.record(d_k), recording))
    }

    fn dk_from_recording(&self, recording: &StepRecording) -> f64 {
        let n_agents = self.states.len();
        let n = self.instance.dimension();
        let inner: Vec<DVector<f64>> = (0..self.config.tau)
            .map(|t| {
                let mut avg = DVector::zeros(n);
                for (i, iterates) in recording.inner_iterates.iter().enumerate() {
                    self.instance.add_local_gradient(i, iterates[t].as_slice(), 1.0 / n_agents as f64, avg.as_mut_slice());
                }
                avg
            })
            .collect();
        // phi^0 averages to the previous x_bar
        let mut prev_bar = DVector::zeros(n);
        for iterates in &recording.inner_iterates {
            prev_bar += &iterates[0];
        }
        prev_bar /= n_agents as f64;
        crate::metrics::compute_dk(self.instance, prev_bar.as_slice(), &inner, self.config.tau).expect("tau inner averages")
    }

    fn record(&self, d_k: Option<f64>) -> IterationRecord {
        let x_bar = self.x_bar();
        IterationRecord {
            k: self.k,
            grad_norm_sq: self.instance.global_gradient_norm_sq(x_bar.as_slice()),
            d_k,
            consensus_err: self.states.iter().map(|s| (&s.x - &x_bar).norm()).fold(0.0, f64::max),
            conservation_residual: self.conservation_residual(),
            component_evals: self.states.iter().map(|s| s.counter.component_gradient_evals).sum(),
            comms: self.states.iter().map(|s| s.counter.communications).sum(),
            charged_evals: self.charged.gradient_evals,
            rounds: self.charged.rounds,
            model_time: self.model_time,
        }
    }

    /// Charge predicted by the per-iteration formulas for the iterations run so far.
    pub fn formula_charge(&self) -> Charge {
        let mut total = Charge::default();
        for k in 0..self.k {
            total += iteration_charge(self.config.variant, self.config.tau, self.config.batch_size, self.instance.max_points(), k);
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ReplicateStatus {
    Completed,
    Diverged { agent: usize, iteration: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateTrace {
    pub replicate: usize,
    pub seed: u64,
    pub status: ReplicateStatus,
    pub records: Vec<IterationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    /// Mean over the replicates that completed.
    pub mean: Vec<AggregatedRecord>,
    pub replicates: Vec<ReplicateTrace>,
}

impl RunOutput {
    pub fn completed(&self) -> usize {
        self.replicates.iter().filter(|r| r.status == ReplicateStatus::Completed).count()
    }
}

/// Runs one replicate for `outer_iterations` iterations. Divergence ends the
/// replicate early and is reported in its status.
pub fn run_replicate(instance: &ProblemInstance, topology: &Topology, config: &RunConfig, replicate: usize) -> Result<ReplicateTrace, AlgorithmError> {
    let seed = config.replicate_seed(replicate);
    let mut sim = Simulation::new(instance, topology, config, seed)?;
    let mut records = Vec::with_capacity(config.outer_iterations);
    let mut status = ReplicateStatus::Completed;
    for _ in 0..config.outer_iterations {
        match sim.step() {
            Ok(rec) => records.push(rec),
            Err(AlgorithmError::Diverged { agent, iteration }) => {
                status = ReplicateStatus::Diverged { agent, iteration };
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(ReplicateTrace { replicate, seed, status, records })
}

/// Monte Carlo run: `monte_carlo_runs` independent replicates sharing the
/// data, with their own initial points and batch draws. Replicates run in
/// parallel on the current rayon pool; the output does not depend on
/// scheduling.
pub fn run(instance: &ProblemInstance, topology: &Topology, config: &RunConfig) -> Result<RunOutput, AlgorithmError> {
    config.validate()?;
    let replicates: Vec<ReplicateTrace> = (0..config.monte_carlo_runs)
        .into_par_iter()
        .map(|r| run_replicate(instance, topology, config, r))
        .collect::<Result<_, _>>()?;
    let completed: Vec<&[IterationRecord]> = replicates
        .iter()
        .filter(|r| r.status == ReplicateStatus::Completed)
        .map(|r| r.records.as_slice())
        .collect();
    Ok(RunOutput { mean: aggregate(&completed), replicates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{AgentData, LossKind};

    fn config(variant: Variant) -> RunConfig {
        RunConfig {
            variant,
            gamma: 0.05,
            rho: 1.0,
            tau: 3,
            batch_size: 1,
            sampling: Sampling::WithReplacement,
            outer_iterations: 5,
            master_seed: 42,
            cost: CostModel { t_g: 1.0, t_c: 10.0 },
            monte_carlo_runs: 2,
            record_dk: false,
            init_std: 10.0,
        }
    }

    /// `f(x) = x^2 / 2` per agent: a single least-squares point `a = 1, b = 0`.
    fn scalar_quadratic(agents: usize) -> ProblemInstance {
        let data = AgentData::new(vec![1.0], vec![0.0], 1).unwrap();
        ProblemInstance::new(1, LossKind::LeastSquares, vec![data; agents]).unwrap()
    }

    #[test]
    fn zero_cost_fixed_point() {
        let data = AgentData::new(vec![0.0, 0.0], vec![0.0], 2).unwrap();
        let p = ProblemInstance::new(2, LossKind::LeastSquares, vec![data; 3]).unwrap();
        let cfg = config(Variant::Exact);
        let mut state = AgentState::new(0, DVector::zeros(2), 2, Variant::Exact, 1);
        let out = local_training_epoch(&mut state, &p, &cfg, 0, 1, EpochOptions::default()).unwrap();
        assert_eq!(out.x_new, DVector::zeros(2));
    }

    #[test]
    fn single_step_unrolls() {
        let p = ProblemInstance::generate_classification(3, 3, 2, 4, LossKind::LogisticNonconvex { epsilon: 0.01 }).unwrap();
        let cfg = RunConfig { tau: 1, ..config(Variant::Exact) };
        let x = DVector::from_vec(vec![0.7, -0.4]);
        let mut state = AgentState::new(1, x.clone(), 2, Variant::Exact, 4);
        state.z = vec![DVector::from_vec(vec![1.0, 2.0]), DVector::from_vec(vec![-0.5, 0.25])];
        let out = local_training_epoch(&mut state, &p, &cfg, 0, 1, EpochOptions::default()).unwrap();
        let sum_z = &state.z[0] + &state.z[1];
        let expected = &x - (p.local_full_gradient(1, x.as_slice()) + &x * 2.0 - sum_z) * cfg.gamma;
        assert!((out.x_new - expected).norm() < 1e-15);
    }

    #[test]
    fn scalar_quadratic_three_steps() {
        let p = scalar_quadratic(3);
        let cfg = RunConfig { tau: 3, gamma: 0.1, rho: 1.0, ..config(Variant::Exact) };
        let mut state = AgentState::new(0, DVector::from_vec(vec![1.0]), 2, Variant::Exact, 1);
        state.z = vec![DVector::zeros(1), DVector::zeros(1)];
        let out = local_training_epoch(&mut state, &p, &cfg, 0, 1, EpochOptions::default()).unwrap();
        assert!((out.x_new[0] - 0.343).abs() < 1e-15);
    }

    #[test]
    fn z_update_cases() {
        let zero = DVector::zeros(3);
        let rho = 1.5;
        let xj = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        // payload from j with z_ji = 0 and x_j = 0
        assert_eq!(z_update(&zero, &zero), zero);
        let z = DVector::from_vec(vec![0.3, 0.3, -1.0]);
        let payload = &z - &xj * (2.0 * rho);
        assert!((z_update(&z, &payload) - &xj * rho).norm() < 1e-15);
    }

    #[test]
    fn divergence_is_reported() {
        let p = scalar_quadratic(3);
        let topo = Topology::ring(3).unwrap();
        let cfg = RunConfig { gamma: 5.0, tau: 10, ..config(Variant::Exact) };
        let mut sim = Simulation::new(&p, &topo, &cfg, 1).unwrap();
        let err = (0..100).map(|_| sim.step()).find_map(Result::err).unwrap();
        assert!(matches!(err, AlgorithmError::Diverged { .. }));

        let out = run(&p, &topo, &RunConfig { monte_carlo_runs: 3, outer_iterations: 100, ..cfg }).unwrap();
        assert_eq!(out.completed(), 0);
        assert!(out.mean.is_empty());
        assert!(out.replicates.iter().all(|r| matches!(r.status, ReplicateStatus::Diverged { .. })));
    }

    #[test]
    fn zero_iterations_leave_state_untouched() {
        let p = scalar_quadratic(3);
        let topo = Topology::ring(3).unwrap();
        let cfg = RunConfig { outer_iterations: 0, ..config(Variant::LtAdmm) };
        let out = run(&p, &topo, &cfg).unwrap();
        assert!(out.mean.is_empty());
        assert!(out.replicates.iter().all(|r| r.records.is_empty()));
    }

    #[test]
    fn config_validation() {
        let base = config(Variant::LtAdmm);
        for bad in [
            RunConfig { gamma: 0.0, ..base.clone() },
            RunConfig { rho: -1.0, ..base.clone() },
            RunConfig { tau: 0, ..base.clone() },
            RunConfig { batch_size: 0, ..base.clone() },
            RunConfig { monte_carlo_runs: 0, ..base.clone() },
            RunConfig { cost: CostModel { t_g: -1.0, t_c: 0.0 }, ..base.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(AlgorithmError::InvalidConfig(_))));
        }
        assert_eq!("lt_admm_vr".parse::<Variant>().unwrap(), Variant::LtAdmmVr);
        assert!("gt_saga".parse::<Variant>().is_err());
    }

    #[test]
    fn messages_one_per_directed_edge() {
        let p = ProblemInstance::generate_classification(1, 5, 3, 4, LossKind::LeastSquares).unwrap();
        let topo = Topology::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 2)]).unwrap();
        let cfg = config(Variant::LtAdmm);
        let sim = Simulation::new(&p, &topo, &cfg, 9).unwrap();
        let x_new: Vec<_> = sim.states().iter().map(|s| s.x.clone()).collect();
        let msgs = outgoing_messages(sim.states(), &x_new, &topo, cfg.rho);
        assert_eq!(msgs.len(), topo.num_directed_edges());
        let mut pairs: Vec<_> = msgs.iter().map(|m| (m.sender, m.receiver)).collect();
        pairs.sort_unstable();
        pairs.dedup();
        assert_eq!(pairs.len(), topo.num_directed_edges());
    }
}
