//! Empirical-risk problem instances.
//!
//! Agent `i` holds `m_i` samples `(a_{i,h}, b_{i,h})` and the local cost
//! `f_i(x) = (1/m_i) sum_h f_{i,h}(x)`. Two component losses are provided:
//!
//! * `logistic_nonconvex(eps)`: `log(1 + exp(-b a^T x)) + eps * sum_l x_l^2 / (1 + x_l^2)`.
//!   The regularizer is carried by every component so that the local average
//!   reproduces the regularized cost exactly.
//! * `least_squares`: `0.5 * (a^T x - b)^2`, convex with a closed-form optimum.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("non-finite input vector")]
    NonFinite,
    #[error("agent {0} out of range")]
    AgentOutOfRange(usize),
    #[error("component {1} out of range for agent {0}")]
    ComponentOutOfRange(usize, usize),
    #[error("invalid problem size: {0}")]
    InvalidSize(String),
    #[error("dataset csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("dataset csv: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    LogisticNonconvex { epsilon: f64 },
    LeastSquares,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentData {
    /// Row-major `m_i x n` feature matrix.
    features: Vec<f64>,
    labels: Vec<f64>,
}

impl AgentData {
    pub fn new(features: Vec<f64>, labels: Vec<f64>, dimension: usize) -> Result<Self, ProblemError> {
        if labels.is_empty() {
            return Err(ProblemError::InvalidSize("agent without data points".into()));
        }
        if features.len() != labels.len() * dimension {
            return Err(ProblemError::InvalidSize(format!(
                "{} feature values for {} points of dimension {}",
                features.len(),
                labels.len(),
                dimension
            )));
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothnessMethod {
    AnalyticBound,
    PowerIteration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessEstimate {
    pub lipschitz: f64,
    pub method: SmoothnessMethod,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    dimension: usize,
    loss: LossKind,
    agents: Vec<AgentData>,
}

/// Parameters of the two-cluster Gaussian generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    /// Distance between the two class means.
    pub separation: f64,
    /// Standard deviation of the noise around each mean.
    pub noise_std: f64,
    /// Ratio between the largest and smallest per-coordinate feature scale.
    /// Coordinate `l` of every feature vector is multiplied by
    /// `scale_ratio^(1/2 - l/(n-1))`, so the scales have geometric mean 1.
    /// A value of 1 gives isotropic clusters.
    pub scale_ratio: f64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self { separation: 1.0, noise_std: 1.0, scale_ratio: 1.0 }
    }
}

impl ClusterParams {
    pub fn feature_scales(&self, dimension: usize) -> Vec<f64> {
        if dimension == 1 {
            return vec![1.0];
        }
        (0..dimension)
            .map(|l| self.scale_ratio.powf(0.5 - l as f64 / (dimension - 1) as f64))
            .collect()
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `log(1 + exp(t))` without overflow.
#[inline]
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

#[inline]
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn check_finite(x: &[f64]) -> Result<(), ProblemError> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(ProblemError::NonFinite)
    }
}

impl ProblemInstance {
    pub fn new(dimension: usize, loss: LossKind, agents: Vec<AgentData>) -> Result<Self, ProblemError> {
        if dimension == 0 || agents.is_empty() {
            return Err(ProblemError::InvalidSize("dimension and agent count must be positive".into()));
        }
        for a in &agents {
            if a.is_empty() || a.features.len() != a.len() * dimension {
                return Err(ProblemError::InvalidSize("inconsistent agent dataset".into()));
            }
        }
        Ok(Self { dimension, loss, agents })
    }

    /// Two-cluster Gaussian classification data, `points_per_agent` samples on
    /// each of `n_agents` agents. Deterministic in `seed`.
    pub fn generate_classification(
        seed: u64,
        n_agents: usize,
        dimension: usize,
        points_per_agent: usize,
        loss: LossKind,
    ) -> Result<Self, ProblemError> {
        Self::generate_with_sizes(seed, &vec![points_per_agent; n_agents], dimension, loss, ClusterParams::default())
    }

    /// Same generator with per-agent sample counts.
    pub fn generate_with_sizes(
        seed: u64,
        sizes: &[usize],
        dimension: usize,
        loss: LossKind,
        params: ClusterParams,
    ) -> Result<Self, ProblemError> {
        if sizes.is_empty() || dimension == 0 || sizes.contains(&0) {
            return Err(ProblemError::InvalidSize("all sizes must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut direction: Vec<f64> = (0..dimension).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = dot(&direction, &direction).sqrt().max(f64::MIN_POSITIVE);
        direction.iter_mut().for_each(|d| *d *= 0.5 * params.separation / norm);
        let scales = params.feature_scales(dimension);

        let agents = sizes
            .iter()
            .map(|&m| {
                let mut features = Vec::with_capacity(m * dimension);
                let mut labels = Vec::with_capacity(m);
                for h in 0..m {
                    let label = if h % 2 == 0 { 1.0 } else { -1.0 };
                    labels.push(label);
                    for (&c, &scale) in direction.iter().zip(&scales) {
                        let noise: f64 = StandardNormal.sample(&mut rng);
                        features.push(scale * (label * c + params.noise_std * noise));
                    }
                }
                AgentData { features, labels }
            })
            .collect();
        Self::new(dimension, loss, agents)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn loss(&self) -> LossKind {
        self.loss
    }

    /// Same data under a different component loss.
    pub fn with_loss(&self, loss: LossKind) -> Self {
        Self { loss, ..self.clone() }
    }

    pub fn num_points(&self, agent: usize) -> usize {
        self.agents[agent].len()
    }

    pub fn min_points(&self) -> usize {
        self.agents.iter().map(AgentData::len).min().unwrap_or(0)
    }

    pub fn max_points(&self) -> usize {
        self.agents.iter().map(AgentData::len).max().unwrap_or(0)
    }

    pub fn feature(&self, agent: usize, h: usize) -> &[f64] {
        let n = self.dimension;
        &self.agents[agent].features[h * n..(h + 1) * n]
    }

    pub fn label(&self, agent: usize, h: usize) -> f64 {
        self.agents[agent].labels[h]
    }

    fn check_index(&self, agent: usize, h: usize) -> Result<(), ProblemError> {
        let data = self.agents.get(agent).ok_or(ProblemError::AgentOutOfRange(agent))?;
        if h >= data.len() {
            return Err(ProblemError::ComponentOutOfRange(agent, h));
        }
        Ok(())
    }

    pub fn component_loss(&self, agent: usize, h: usize, x: &[f64]) -> f64 {
        let a = self.feature(agent, h);
        let b = self.label(agent, h);
        match self.loss {
            LossKind::LogisticNonconvex { epsilon } => {
                let reg: f64 = x.iter().map(|v| v * v / (1.0 + v * v)).sum();
                softplus(-b * dot(a, x)) + epsilon * reg
            }
            LossKind::LeastSquares => {
                let r = dot(a, x) - b;
                0.5 * r * r
            }
        }
    }

    pub fn local_loss(&self, agent: usize, x: &[f64]) -> f64 {
        let m = self.num_points(agent);
        (0..m).map(|h| self.component_loss(agent, h, x)).sum::<f64>() / m as f64
    }

    /// `F(x) = (1/N) sum_i f_i(x)`.
    pub fn global_loss(&self, x: &[f64]) -> f64 {
        let n = self.num_agents();
        (0..n).map(|i| self.local_loss(i, x)).sum::<f64>() / n as f64
    }

    /// `out += weight * grad f_{i,h}(x)`. No bounds or finiteness checks.
    #[inline]
    pub fn add_component_gradient(&self, agent: usize, h: usize, x: &[f64], weight: f64, out: &mut [f64]) {
        let a = self.feature(agent, h);
        let b = self.label(agent, h);
        match self.loss {
            LossKind::LogisticNonconvex { epsilon } => {
                let coeff = -b * sigmoid(-b * dot(a, x)) * weight;
                for ((o, &ai), &xi) in out.iter_mut().zip(a).zip(x) {
                    let q = 1.0 + xi * xi;
                    *o += coeff * ai + weight * epsilon * 2.0 * xi / (q * q);
                }
            }
            LossKind::LeastSquares => {
                let coeff = (dot(a, x) - b) * weight;
                for (o, &ai) in out.iter_mut().zip(a) {
                    *o += coeff * ai;
                }
            }
        }
    }

    pub fn component_gradient(&self, agent: usize, h: usize, x: &[f64]) -> Result<DVector<f64>, ProblemError> {
        self.check_index(agent, h)?;
        check_finite(x)?;
        if x.len() != self.dimension {
            return Err(ProblemError::InvalidSize(format!("point of dimension {}", x.len())));
        }
        let mut out = DVector::zeros(self.dimension);
        self.add_component_gradient(agent, h, x, 1.0, out.as_mut_slice());
        Ok(out)
    }

    /// `grad f_i(x)`, the exact mean of the component gradients.
    pub fn local_full_gradient(&self, agent: usize, x: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.dimension);
        self.add_local_gradient(agent, x, 1.0, out.as_mut_slice());
        out
    }

    pub fn add_local_gradient(&self, agent: usize, x: &[f64], weight: f64, out: &mut [f64]) {
        let m = self.num_points(agent);
        let w = weight / m as f64;
        for h in 0..m {
            self.add_component_gradient(agent, h, x, w, out);
        }
    }

    /// `grad F(x) = (1/N) sum_i grad f_i(x)`.
    pub fn global_gradient(&self, x: &[f64]) -> DVector<f64> {
        let n = self.num_agents();
        let mut out = DVector::zeros(self.dimension);
        for i in 0..n {
            self.add_local_gradient(i, x, 1.0 / n as f64, out.as_mut_slice());
        }
        out
    }

    pub fn global_gradient_norm_sq(&self, x: &[f64]) -> f64 {
        self.global_gradient(x).norm_squared()
    }

    /// Hessian of `f_i` for least squares, `(1/m_i) A_i^T A_i`.
    fn least_squares_hessian(&self, agent: usize) -> DMatrix<f64> {
        let n = self.dimension;
        let m = self.num_points(agent);
        let a = DMatrix::from_row_slice(m, n, &self.agents[agent].features);
        a.transpose() * a / m as f64
    }

    /// Lipschitz constant of the local gradients.
    pub fn smoothness_constant(&self) -> SmoothnessEstimate {
        match self.loss {
            LossKind::LogisticNonconvex { epsilon } => {
                let max_sq = (0..self.num_agents())
                    .flat_map(|i| (0..self.num_points(i)).map(move |h| (i, h)))
                    .map(|(i, h)| {
                        let a = self.feature(i, h);
                        dot(a, a)
                    })
                    .fold(0.0, f64::max);
                SmoothnessEstimate { lipschitz: 0.25 * max_sq + 2.0 * epsilon, method: SmoothnessMethod::AnalyticBound }
            }
            LossKind::LeastSquares => {
                let lipschitz = (0..self.num_agents())
                    .map(|i| power_iteration(&self.least_squares_hessian(i), 1e-8))
                    .fold(0.0, f64::max);
                SmoothnessEstimate { lipschitz, method: SmoothnessMethod::PowerIteration }
            }
        }
    }

    /// Global minimizer of the least-squares objective, if the averaged
    /// Hessian is invertible. `None` for other losses.
    pub fn least_squares_optimum(&self) -> Option<DVector<f64>> {
        if self.loss != LossKind::LeastSquares {
            return None;
        }
        let n = self.dimension;
        let mut hess = DMatrix::zeros(n, n);
        let mut rhs = DVector::zeros(n);
        for i in 0..self.num_agents() {
            let m = self.num_points(i) as f64;
            hess += self.least_squares_hessian(i);
            for h in 0..self.num_points(i) {
                let a = DVector::from_column_slice(self.feature(i, h));
                rhs += a * (self.label(i, h) / m);
            }
        }
        hess.cholesky().map(|c| c.solve(&rhs))
    }

    /// Writes `agent,label,f0,...,f{n-1}` rows with a header.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), ProblemError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["agent".to_string(), "label".to_string()];
        header.extend((0..self.dimension).map(|l| format!("f{l}")));
        w.write_record(&header)?;
        for i in 0..self.num_agents() {
            for h in 0..self.num_points(i) {
                let mut row = vec![i.to_string(), format!("{:?}", self.label(i, h))];
                row.extend(self.feature(i, h).iter().map(|v| format!("{v:?}")));
                w.write_record(&row)?;
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Reads the layout produced by [`ProblemInstance::write_csv`]. Agents
    /// must appear as a contiguous block of ids starting at zero.
    pub fn read_csv<R: Read>(reader: R, loss: LossKind) -> Result<Self, ProblemError> {
        let mut r = csv::Reader::from_reader(reader);
        let dimension = r.headers()?.len().checked_sub(2).filter(|&n| n > 0).ok_or_else(|| ProblemError::Parse("missing feature columns".into()))?;
        let mut agents: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        for record in r.records() {
            let record = record?;
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| ProblemError::Parse(format!("{s:?}: {e}")));
            let agent: usize = record[0].trim().parse().map_err(|e| ProblemError::Parse(format!("agent id: {e}")))?;
            if agent >= agents.len() {
                agents.resize_with(agent + 1, Default::default);
            }
            agents[agent].1.push(parse(&record[1])?);
            for field in record.iter().skip(2) {
                agents[agent].0.push(parse(field)?);
            }
        }
        let agents = agents
            .into_iter()
            .map(|(f, l)| AgentData::new(f, l, dimension))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(dimension, loss, agents)
    }
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix.
fn power_iteration(matrix: &DMatrix<f64>, rel_tol: f64) -> f64 {
    let n = matrix.nrows();
    // all-ones start plus a tilt so it is not orthogonal to the top eigenvector by symmetry
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.1 * i as f64);
    v /= v.norm();
    let mut estimate = 0.0;
    for _ in 0..10_000 {
        let w = matrix * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = v.dot(&w);
        v = w / norm;
        if (next - estimate).abs() <= rel_tol * next.abs() {
            return next;
        }
        estimate = next;
    }
    estimate
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;
    use rand::Rng;

    const LOGISTIC: LossKind = LossKind::LogisticNonconvex { epsilon: 0.01 };

    fn single_point(a: Vec<f64>, b: f64, loss: LossKind) -> ProblemInstance {
        let n = a.len();
        ProblemInstance::new(n, loss, vec![AgentData::new(a, vec![b], n).unwrap()]).unwrap()
    }

    fn fd_gradient(p: &ProblemInstance, i: usize, h: usize, x: &[f64], step: f64) -> Vec<f64> {
        (0..x.len())
            .map(|l| {
                let mut up = x.to_vec();
                let mut down = x.to_vec();
                up[l] += step;
                down[l] -= step;
                (p.component_loss(i, h, &up) - p.component_loss(i, h, &down)) / (2.0 * step)
            })
            .collect()
    }

    #[test]
    fn generator_shape_and_determinism() {
        let p = ProblemInstance::generate_classification(1, 10, 5, 100, LOGISTIC).unwrap();
        assert_eq!(p.num_agents(), 10);
        assert_eq!(p.dimension(), 5);
        assert!((0..10).all(|i| p.num_points(i) == 100));
        let again = ProblemInstance::generate_classification(1, 10, 5, 100, LOGISTIC).unwrap();
        assert_eq!(p, again);
        let other = ProblemInstance::generate_classification(2, 10, 5, 100, LOGISTIC).unwrap();
        assert_ne!(p, other);
        let positives = (0..100).filter(|&h| p.label(0, h) == 1.0).count();
        assert_eq!(positives, 50);
        assert!((0..100).all(|h| p.label(3, h).abs() == 1.0));
    }

    #[test]
    fn regularizer_gradient() {
        // zero feature isolates the regularizer; the logistic part is -b*0*... = 0
        let p = single_point(vec![0.0, 0.0], 1.0, LOGISTIC);
        let g0 = p.component_gradient(0, 0, &[0.0, 0.0]).unwrap();
        assert_eq!(g0.as_slice(), &[0.0, 0.0]);
        let g1 = p.component_gradient(0, 0, &[1.0, 0.0]).unwrap();
        assert!((g1[0] - 0.005).abs() < 1e-15);
        let fd = fd_gradient(&p, 0, 0, &[1.0, 0.0], 1e-6);
        assert!((fd[0] - 0.005).abs() < 1e-9);
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let p = single_point(vec![1.0], 1.0, LOGISTIC);
        assert!(matches!(p.component_gradient(0, 0, &[f64::NAN]), Err(ProblemError::NonFinite)));
        assert!(matches!(p.component_gradient(0, 1, &[0.0]), Err(ProblemError::ComponentOutOfRange(0, 1))));
        assert!(matches!(p.component_gradient(4, 0, &[0.0]), Err(ProblemError::AgentOutOfRange(4))));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for loss in [LOGISTIC, LossKind::LeastSquares] {
            let p = ProblemInstance::generate_classification(5, 3, 4, 7, loss).unwrap();
            for _ in 0..100 {
                let x: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
                let (i, h) = (rng.random_range(0..3), rng.random_range(0..7));
                let g = p.component_gradient(i, h, &x).unwrap();
                let fd = fd_gradient(&p, i, h, &x, 1e-6);
                for l in 0..4 {
                    assert!((g[l] - fd[l]).abs() <= 1e-6, "{loss:?} {} vs {}", g[l], fd[l]);
                    assert!((g[l] - fd[l]).abs() <= 1e-5 * g[l].abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn local_gradient_is_component_mean() {
        let p = ProblemInstance::generate_classification(2, 2, 5, 100, LOGISTIC).unwrap();
        let x = [0.3, -1.2, 2.0, 0.0, 0.7];
        let mut oracle = [0.0; 5];
        for h in 0..100 {
            let g = p.component_gradient(1, h, &x).unwrap();
            for l in 0..5 {
                oracle[l] += g[l];
            }
        }
        let full = p.local_full_gradient(1, &x);
        for l in 0..5 {
            assert!((full[l] - oracle[l] / 100.0).abs() <= 1e-14);
        }

        let one = single_point(vec![1.0, 2.0], -1.0, LOGISTIC);
        assert_eq!(one.local_full_gradient(0, &x[..2]), one.component_gradient(0, 0, &x[..2]).unwrap());
        let twice = ProblemInstance::new(
            2,
            LOGISTIC,
            vec![AgentData::new(vec![1.0, 2.0, 1.0, 2.0], vec![-1.0, -1.0], 2).unwrap()],
        )
        .unwrap();
        assert!((twice.local_full_gradient(0, &x[..2]) - one.local_full_gradient(0, &x[..2])).norm() < 1e-16);
    }

    #[test]
    fn global_gradient_norm() {
        let p = ProblemInstance::generate_classification(3, 4, 3, 9, LOGISTIC).unwrap();
        let x = [0.5, -0.25, 1.5];
        // stacked brute force: sum over all (i, h) with weights 1/(N m_i)
        let mut stacked = [0.0; 3];
        for i in 0..4 {
            for h in 0..9 {
                let g = p.component_gradient(i, h, &x).unwrap();
                for l in 0..3 {
                    stacked[l] += g[l] / 36.0;
                }
            }
        }
        let expected: f64 = stacked.iter().map(|v| v * v).sum();
        assert!((p.global_gradient_norm_sq(&x) - expected).abs() <= 1e-13);

        let data = AgentData::new(vec![1.0, 0.5, -0.5, 1.0, 2.0, 1.0], vec![1.0, -1.0], 3).unwrap();
        let same = ProblemInstance::new(3, LOGISTIC, vec![data.clone(), data.clone(), data]).unwrap();
        let g1 = same.local_full_gradient(0, &x).norm_squared();
        assert!((same.global_gradient_norm_sq(&x) - g1).abs() <= 1e-15);

        let ls = p.with_loss(LossKind::LeastSquares);
        let opt = ls.least_squares_optimum().unwrap();
        assert!(ls.global_gradient_norm_sq(opt.as_slice()) <= 1e-20);
    }

    #[test]
    fn smoothness_constants() {
        let unit = single_point(vec![1.0, 0.0, 0.0], 1.0, LossKind::LogisticNonconvex { epsilon: 0.0 });
        assert_eq!(unit.smoothness_constant().lipschitz, 0.25);
        let zero = single_point(vec![0.0, 0.0], 1.0, LOGISTIC);
        assert!((zero.smoothness_constant().lipschitz - 0.02).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for loss in [LOGISTIC, LossKind::LeastSquares] {
            let p = ProblemInstance::generate_classification(9, 3, 5, 20, loss).unwrap();
            let l = p.smoothness_constant().lipschitz;
            for _ in 0..1000 {
                let i = rng.random_range(0..3);
                let x: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
                let y: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
                let dg = (p.local_full_gradient(i, &x) - p.local_full_gradient(i, &y)).norm();
                let dx = (DVector::from_vec(x) - DVector::from_vec(y)).norm();
                assert!(dg / dx <= l * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn power_iteration_matches_eigensolver() {
        let p = ProblemInstance::generate_classification(4, 3, 6, 30, LossKind::LeastSquares).unwrap();
        for i in 0..3 {
            let h = p.least_squares_hessian(i);
            let exact = SymmetricEigen::new(h.clone()).eigenvalues.max();
            assert!((power_iteration(&h, 1e-8) - exact).abs() <= 1e-6 * exact);
        }
    }

    #[test]
    fn logistic_costs_are_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = ProblemInstance::generate_classification(1, 3, 5, 10, LOGISTIC).unwrap();
        for _ in 0..200 {
            let x: Vec<f64> = (0..5).map(|_| rng.random_range(-50.0..50.0)).collect();
            assert!((0..3).all(|i| p.local_loss(i, &x) >= 0.0));
        }
    }

    #[test]
    fn least_squares_is_convex_along_segments() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let p = ProblemInstance::generate_classification(1, 3, 4, 10, LossKind::LeastSquares).unwrap();
        for _ in 0..100 {
            let i = rng.random_range(0..3);
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-5.0..5.0)).collect();
            let y: Vec<f64> = (0..4).map(|_| rng.random_range(-5.0..5.0)).collect();
            let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
            assert!(p.local_loss(i, &mid) <= 0.5 * (p.local_loss(i, &x) + p.local_loss(i, &y)) + 1e-12);
        }
    }

    #[test]
    fn csv_round_trip() {
        let p = ProblemInstance::generate_with_sizes(6, &[3, 5, 2], 4, LOGISTIC, ClusterParams::default()).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let back = ProblemInstance::read_csv(buf.as_slice(), LOGISTIC).unwrap();
        assert_eq!(p, back);
    }
}
