//! Dense stacked-matrix form of the exact-gradient dynamics, used as an
//! independent differential-testing oracle for the per-agent simulator.
//!
//! Rows of `X` (`N x n`) are agent iterates; rows of `Z` (`M x n`) are edge
//! variables in directed-edge-index order. With the edge selector `A`
//! (`(A X)_e = x_i` for `e = (i, j)`) and the edge swap `P`:
//!
//! ```text
//! X' = X - gamma * sum_t (G(Phi^t) + rho A^T A Phi^t - A^T Z)
//! Z' = Z / 2 - P Z / 2 + rho P A X'
//! ```

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::graph::Topology;
use crate::problems::ProblemInstance;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CompactError {
    #[error("structural identity violated: {0}")]
    Structure(&'static str),
    #[error("state has shape {got:?}, expected {expected:?}")]
    Shape { got: (usize, usize), expected: (usize, usize) },
}

/// Structural operators of a topology.
#[derive(Debug, Clone, PartialEq)]
pub struct Operators {
    /// `M x N` edge-to-owner selector.
    pub a: DMatrix<f64>,
    /// `M x M` swap of `(i, j)` and `(j, i)`.
    pub p: DMatrix<f64>,
    /// Degree matrix `A^T A`.
    pub d: DMatrix<f64>,
    /// Adjacency matrix `A^T P A`.
    pub adjacency: DMatrix<f64>,
    /// `L~ = adjacency - D`.
    pub l_tilde: DMatrix<f64>,
}

impl Operators {
    pub fn new(topology: &Topology) -> Result<Self, CompactError> {
        let n_agents = topology.num_agents();
        let m = topology.num_directed_edges();
        let mut a = DMatrix::zeros(m, n_agents);
        let mut p = DMatrix::zeros(m, m);
        for e in 0..m {
            let (i, j) = topology.edge(e);
            a[(e, i)] = 1.0;
            let reverse = topology.edge_index(j, i).ok_or(CompactError::Structure("missing reverse edge"))?;
            p[(e, reverse)] = 1.0;
        }
        let d = a.transpose() * &a;
        let adjacency = a.transpose() * &p * &a;
        if &p * &p != DMatrix::identity(m, m) {
            return Err(CompactError::Structure("P is not an involution"));
        }
        if adjacency != topology.adjacency_matrix() {
            return Err(CompactError::Structure("A^T P A differs from the adjacency matrix"));
        }
        if d != DMatrix::from_diagonal(&DVector::from_fn(n_agents, |i, _| topology.degree(i) as f64)) {
            return Err(CompactError::Structure("A^T A differs from the degree matrix"));
        }
        let l_tilde = &adjacency - &d;
        Ok(Self { a, p, d, adjacency, l_tilde })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompactState {
    pub ops: Operators,
    pub x: DMatrix<f64>,
    pub z: DMatrix<f64>,
}

/// Inner iterates and the gradients used at each of them during one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDetail {
    pub phis: Vec<DMatrix<f64>>,
    pub grads: Vec<DMatrix<f64>>,
}

/// `Y`, `Y~` and the stacked average `X_bar`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticVectors {
    pub y: DMatrix<f64>,
    pub y_tilde: DMatrix<f64>,
    pub x_bar: DMatrix<f64>,
}

/// Rows `grad f_i(phi_i)`.
pub fn exact_gradients(instance: &ProblemInstance, phi: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(phi.nrows(), phi.ncols());
    for i in 0..phi.nrows() {
        let row: Vec<f64> = phi.row(i).iter().copied().collect();
        let g = instance.local_full_gradient(i, &row);
        out.set_row(i, &g.transpose());
    }
    out
}

/// Stacked `grad F(X_bar)` with rows `(1/N) grad f_i(x_bar)`.
pub fn stacked_average_gradient(instance: &ProblemInstance, x_bar: &[f64]) -> DMatrix<f64> {
    let n_agents = instance.num_agents();
    let mut out = DMatrix::zeros(n_agents, x_bar.len());
    for i in 0..n_agents {
        let g = instance.local_full_gradient(i, x_bar) / n_agents as f64;
        out.set_row(i, &g.transpose());
    }
    out
}

impl CompactState {
    pub fn new(topology: &Topology, x: DMatrix<f64>, z: DMatrix<f64>) -> Result<Self, CompactError> {
        let ops = Operators::new(topology)?;
        let expected_x = (topology.num_agents(), x.ncols());
        if x.shape() != expected_x {
            return Err(CompactError::Shape { got: x.shape(), expected: expected_x });
        }
        let expected_z = (topology.num_directed_edges(), x.ncols());
        if z.shape() != expected_z {
            return Err(CompactError::Shape { got: z.shape(), expected: expected_z });
        }
        Ok(Self { ops, x, z })
    }

    /// `Z_0 = A X_0`, i.e. `z_ij = x_i`.
    pub fn from_initial(topology: &Topology, x0: DMatrix<f64>) -> Result<Self, CompactError> {
        let ops = Operators::new(topology)?;
        let z = &ops.a * &x0;
        Self::new(topology, x0, z)
    }

    /// One outer step with gradients supplied by `grad(t, Phi^t)`.
    pub fn step_with<G>(&mut self, gamma: f64, rho: f64, tau: usize, mut grad: G) -> StepDetail
    where
        G: FnMut(usize, &DMatrix<f64>) -> DMatrix<f64>,
    {
        let at_z = self.ops.a.transpose() * &self.z;
        let d = &self.ops.d;
        let mut phi = self.x.clone();
        let mut total = DMatrix::zeros(self.x.nrows(), self.x.ncols());
        let mut detail = StepDetail { phis: Vec::with_capacity(tau), grads: Vec::with_capacity(tau) };
        for t in 0..tau {
            let g = grad(t, &phi);
            let increment = &g + d * &phi * rho - &at_z;
            let next = &phi - &increment * gamma;
            total += increment;
            detail.phis.push(phi);
            detail.grads.push(g);
            phi = next;
        }
        self.x = &self.x - total * gamma;
        let p = &self.ops.p;
        self.z = &self.z * 0.5 - p * &self.z * 0.5 + p * &self.ops.a * &self.x * rho;
        detail
    }

    /// Exact-gradient step.
    pub fn compact_step(&mut self, instance: &ProblemInstance, gamma: f64, rho: f64, tau: usize) -> StepDetail {
        self.step_with(gamma, rho, tau, |_, phi| exact_gradients(instance, phi))
    }

    /// `||1^T A^T Z - rho 1^T D X||`.
    pub fn conservation_residual(&self, rho: f64) -> f64 {
        let lhs = (&self.ops.a.transpose() * &self.z).row_sum();
        let rhs = (&self.ops.d * &self.x).row_sum() * rho;
        (lhs - rhs).norm()
    }

    pub fn x_bar(&self) -> DVector<f64> {
        self.x.row_mean().transpose()
    }

    pub fn diagnostics(&self, instance: &ProblemInstance, rho: f64) -> DiagnosticVectors {
        let x_bar = self.x_bar();
        let grad_bar = stacked_average_gradient(instance, x_bar.as_slice());
        let at = self.ops.a.transpose();
        let dx = &self.ops.d * &self.x * rho;
        DiagnosticVectors {
            y: &at * &self.z - &grad_bar - &dx,
            y_tilde: &at * &self.ops.p * &self.z + &grad_bar - &dx,
            x_bar: DMatrix::from_fn(self.x.nrows(), self.x.ncols(), |_, c| x_bar[c]),
        }
    }
}

/// Predicts `(X_{k+1}, Y_{k+1}, Y~_{k+1})` from step-`k` quantities through
/// the block linear system driven by the nonlinear input `h_k`.
#[allow(clippy::too_many_arguments)]
pub fn block_form_prediction(
    ops: &Operators,
    instance: &ProblemInstance,
    x_k: &DMatrix<f64>,
    diag_k: &DiagnosticVectors,
    detail: &StepDetail,
    x_next_bar: &[f64],
    gamma: f64,
    rho: f64,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let tau = detail.phis.len() as f64;
    let x_bar_k: Vec<f64> = diag_k.x_bar.row(0).iter().copied().collect();
    let grad_k = stacked_average_gradient(instance, &x_bar_k);
    let grad_next = stacked_average_gradient(instance, x_next_bar);

    let mut drift = DMatrix::zeros(x_k.nrows(), x_k.ncols());
    for (phi, g) in detail.phis.iter().zip(&detail.grads) {
        drift += g - &grad_k + &ops.d * phi * rho - &ops.d * x_k * rho;
    }
    let h1 = &drift * gamma;
    let h2 = &ops.l_tilde * &drift * (gamma * rho) + &grad_next - &grad_k;
    let h3 = -&grad_next + &grad_k;

    let (y, yt) = (&diag_k.y, &diag_k.y_tilde);
    let x_next = x_k + y * (gamma * tau) - h1;
    let y_next = &ops.l_tilde * x_k * rho + &ops.l_tilde * y * (rho * gamma * tau) + y * 0.5 - yt * 0.5 - h2;
    let yt_next = y * -0.5 + yt * 0.5 - h3;
    (x_next, y_next, yt_next)
}
