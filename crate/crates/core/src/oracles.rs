//! Local gradient estimators: full gradient, mini-batch SGD and the SAGA
//! gradient table, with component-evaluation accounting.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problems::ProblemInstance;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("batch index {index} out of range for {points} points")]
    IndexOutOfRange { index: usize, points: usize },
    #[error("batch of size {size} exceeds the {points} local points")]
    BatchTooLarge { size: usize, points: usize },
}

/// Cumulative work done by one agent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounter {
    pub component_gradient_evals: u64,
    /// Messages sent, one per neighbor per round.
    pub communications: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    #[default]
    WithReplacement,
    WithoutReplacement,
}

/// Draws `size` indices from `0..points`, uniformly.
pub fn sample_batch<R: Rng + ?Sized>(rng: &mut R, points: usize, size: usize, sampling: Sampling) -> Result<Vec<usize>, OracleError> {
    if size == 0 {
        return Err(OracleError::EmptyBatch);
    }
    if size > points {
        return Err(OracleError::BatchTooLarge { size, points });
    }
    Ok(match sampling {
        Sampling::WithReplacement => (0..size).map(|_| rng.random_range(0..points)).collect(),
        Sampling::WithoutReplacement => rand::seq::index::sample(rng, points, size).into_vec(),
    })
}

fn validate_batch(batch: &[usize], points: usize) -> Result<(), OracleError> {
    if batch.is_empty() {
        return Err(OracleError::EmptyBatch);
    }
    if batch.len() > points {
        return Err(OracleError::BatchTooLarge { size: batch.len(), points });
    }
    match batch.iter().find(|&&h| h >= points) {
        Some(&index) => Err(OracleError::IndexOutOfRange { index, points }),
        None => Ok(()),
    }
}

/// Exact local gradient; costs `m_i` evaluations.
pub fn full_gradient(instance: &ProblemInstance, agent: usize, x: &[f64], counter: &mut EvalCounter) -> DVector<f64> {
    counter.component_gradient_evals += instance.num_points(agent) as u64;
    instance.local_full_gradient(agent, x)
}

/// Mini-batch SGD estimate `(1/|B|) sum_{h in B} grad f_{i,h}(x)`.
/// The batch is a multiset: repeated indices are counted repeatedly.
pub fn sgd_estimate(
    instance: &ProblemInstance,
    agent: usize,
    x: &[f64],
    batch: &[usize],
    counter: &mut EvalCounter,
) -> Result<DVector<f64>, OracleError> {
    validate_batch(batch, instance.num_points(agent))?;
    let mut out = DVector::zeros(instance.dimension());
    let w = 1.0 / batch.len() as f64;
    for &h in batch {
        instance.add_component_gradient(agent, h, x, w, out.as_mut_slice());
    }
    counter.component_gradient_evals += batch.len() as u64;
    Ok(out)
}

/// Component gradients evaluated by the last estimate, kept so a memory
/// update at the same point does not evaluate them again.
#[derive(Debug, Clone, Default)]
struct EvalCache {
    point: Vec<f64>,
    indices: Vec<usize>,
    grads: Vec<f64>,
}

impl EvalCache {
    fn lookup(&self, point: &[f64], h: usize, n: usize) -> Option<&[f64]> {
        if self.point.as_slice() != point {
            return None;
        }
        let pos = self.indices.iter().position(|&k| k == h)?;
        Some(&self.grads[pos * n..(pos + 1) * n])
    }
}

/// Per-agent SAGA memory: the stored component gradients
/// `G_h = grad f_{i,h}(r_h)` and their running sum.
///
/// Gradients are stored instead of the points `r_h`; the estimator only ever
/// needs `grad f_{i,h}(r_h)`.
#[derive(Debug, Clone)]
pub struct SagaTable {
    dimension: usize,
    grads: Vec<f64>,
    running_sum: Vec<f64>,
    /// Set while every slot holds the gradient at this exact point.
    fresh_anchor: Option<Vec<f64>>,
    cache: EvalCache,
}

impl SagaTable {
    /// An all-zero table for `points` components; call [`SagaTable::refresh`]
    /// before estimating.
    pub fn new(points: usize, dimension: usize) -> Self {
        Self {
            dimension,
            grads: vec![0.0; points * dimension],
            running_sum: vec![0.0; dimension],
            fresh_anchor: None,
            cache: EvalCache::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.grads.len() / self.dimension
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn stored_gradient(&self, h: usize) -> &[f64] {
        &self.grads[h * self.dimension..(h + 1) * self.dimension]
    }

    pub fn running_sum(&self) -> &[f64] {
        &self.running_sum
    }

    /// Sum of the stored gradients computed from scratch.
    pub fn recomputed_sum(&self) -> Vec<f64> {
        let n = self.dimension;
        let mut sum = vec![0.0; n];
        for row in self.grads.chunks_exact(n) {
            for (s, g) in sum.iter_mut().zip(row) {
                *s += g;
            }
        }
        sum
    }

    /// Re-evaluates every component at `anchor`; costs `m_i` evaluations.
    pub fn refresh(&mut self, instance: &ProblemInstance, agent: usize, anchor: &[f64], counter: &mut EvalCounter) {
        let n = self.dimension;
        self.grads.iter_mut().for_each(|g| *g = 0.0);
        for (h, row) in self.grads.chunks_exact_mut(n).enumerate() {
            instance.add_component_gradient(agent, h, anchor, 1.0, row);
        }
        self.running_sum = self.recomputed_sum();
        self.fresh_anchor = Some(anchor.to_vec());
        counter.component_gradient_evals += self.len() as u64;
    }

    /// SAGA estimate `(1/|B|) sum_{h in B} (grad f_{i,h}(x) - G_h) + (1/m_i) sum_h G_h`.
    ///
    /// At the point of the last refresh the correction terms vanish and the
    /// stored average is returned without evaluating anything.
    pub fn estimate(
        &mut self,
        instance: &ProblemInstance,
        agent: usize,
        x: &[f64],
        batch: &[usize],
        counter: &mut EvalCounter,
    ) -> Result<DVector<f64>, OracleError> {
        let m = self.len();
        validate_batch(batch, m)?;
        let n = self.dimension;
        let mean = DVector::from_iterator(n, self.running_sum.iter().map(|s| s / m as f64));
        if self.fresh_anchor.as_deref() == Some(x) {
            self.cache.point.clear();
            return Ok(mean);
        }

        self.cache.point.clear();
        self.cache.point.extend_from_slice(x);
        self.cache.indices.clear();
        self.cache.grads.clear();

        let w = 1.0 / batch.len() as f64;
        let mut correction = DVector::zeros(n);
        let mut grad = vec![0.0; n];
        for &h in batch {
            grad.iter_mut().for_each(|g| *g = 0.0);
            instance.add_component_gradient(agent, h, x, 1.0, &mut grad);
            let stored = self.stored_gradient(h);
            for l in 0..n {
                correction[l] += w * (grad[l] - stored[l]);
            }
            if !self.cache.indices.contains(&h) {
                self.cache.indices.push(h);
                self.cache.grads.extend_from_slice(&grad);
            }
        }
        counter.component_gradient_evals += batch.len() as u64;
        Ok(correction + mean)
    }

    /// Moves the memory of every (distinct) index in `batch` to `new_x`.
    /// Gradients already evaluated at `new_x` by the preceding estimate are
    /// reused; the rest cost one evaluation each.
    pub fn update_memory(
        &mut self,
        instance: &ProblemInstance,
        agent: usize,
        new_x: &[f64],
        batch: &[usize],
        counter: &mut EvalCounter,
    ) -> Result<(), OracleError> {
        let m = self.len();
        validate_batch(batch, m)?;
        if self.fresh_anchor.as_deref() == Some(new_x) {
            return Ok(());
        }
        let n = self.dimension;
        let mut unique = batch.to_vec();
        unique.sort_unstable();
        unique.dedup();

        let mut grad = vec![0.0; n];
        for h in unique {
            match self.cache.lookup(new_x, h, n) {
                Some(cached) => grad.copy_from_slice(cached),
                None => {
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    instance.add_component_gradient(agent, h, new_x, 1.0, &mut grad);
                    counter.component_gradient_evals += 1;
                }
            }
            let slot = &mut self.grads[h * n..(h + 1) * n];
            for l in 0..n {
                self.running_sum[l] += grad[l] - slot[l];
                slot[l] = grad[l];
            }
        }
        self.fresh_anchor = None;
        Ok(())
    }
}
