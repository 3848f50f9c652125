//! Undirected agent topologies and Laplacian spectral diagnostics.
//!
//! Every undirected edge `{i, j}` appears twice in the directed edge index,
//! once as `(i, j)` (owned by agent `i`) and once as `(j, i)` (owned by
//! agent `j`). Directed edges are grouped by their owner and ordered by the
//! neighbor's id, so edge `e` of agent `i` lives at
//! `offset(i) + position of j in neighbors(i)`.

use std::collections::{BTreeSet, VecDeque};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("a ring needs at least 3 agents, got {0}")]
    RingTooSmall(usize),
    #[error("topology needs at least one agent")]
    Empty,
    #[error("edge ({0}, {1}) references an agent outside 0..{2}")]
    VertexOutOfRange(usize, usize, usize),
    #[error("self-loop on agent {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("graph is disconnected: agent {0} is unreachable from agent 0")]
    Disconnected(usize),
}

/// A connected, undirected, unweighted communication graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    neighbors: Vec<Vec<usize>>,
    offsets: Vec<usize>,
    directed: Vec<(usize, usize)>,
}

impl Topology {
    /// Cycle `0 - 1 - ... - (n-1) - 0`.
    pub fn ring(n_agents: usize) -> Result<Self, GraphError> {
        if n_agents < 3 {
            return Err(GraphError::RingTooSmall(n_agents));
        }
        let edges: Vec<_> = (0..n_agents).map(|i| (i, (i + 1) % n_agents)).collect();
        Self::from_edges(n_agents, &edges)
    }

    /// Complete graph on `n_agents` vertices.
    pub fn complete(n_agents: usize) -> Result<Self, GraphError> {
        let mut edges = Vec::new();
        for i in 0..n_agents {
            for j in (i + 1)..n_agents {
                edges.push((i, j));
            }
        }
        Self::from_edges(n_agents, &edges)
    }

    /// Path `0 - 1 - ... - (n-1)`.
    pub fn path(n_agents: usize) -> Result<Self, GraphError> {
        let edges: Vec<_> = (1..n_agents).map(|i| (i - 1, i)).collect();
        Self::from_edges(n_agents, &edges)
    }

    /// Builds a topology from unordered pairs, rejecting self-loops,
    /// duplicates (in either orientation) and disconnected graphs.
    pub fn from_edges(n_agents: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        if n_agents == 0 {
            return Err(GraphError::Empty);
        }
        let mut sets = vec![BTreeSet::new(); n_agents];
        for &(a, b) in edges {
            if a >= n_agents || b >= n_agents {
                return Err(GraphError::VertexOutOfRange(a, b, n_agents));
            }
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            if !sets[a].insert(b) || !sets[b].insert(a) {
                return Err(GraphError::DuplicateEdge(a, b));
            }
        }
        let neighbors: Vec<Vec<usize>> = sets.into_iter().map(|s| s.into_iter().collect()).collect();

        // BFS from agent 0
        let mut seen = vec![false; n_agents];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for &w in &neighbors[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(GraphError::Disconnected(missing));
        }

        let mut offsets = Vec::with_capacity(n_agents + 1);
        let mut directed = Vec::new();
        offsets.push(0);
        for (i, nbrs) in neighbors.iter().enumerate() {
            directed.extend(nbrs.iter().map(|&j| (i, j)));
            offsets.push(directed.len());
        }
        Ok(Self { neighbors, offsets, directed })
    }

    /// Random connected graph: a uniformly shuffled spanning tree plus each
    /// remaining pair independently with probability `extra_edge_prob`.
    pub fn random_connected<R: Rng + ?Sized>(n_agents: usize, extra_edge_prob: f64, rng: &mut R) -> Result<Self, GraphError> {
        if n_agents == 0 {
            return Err(GraphError::Empty);
        }
        let mut order: Vec<usize> = (0..n_agents).collect();
        for i in (1..n_agents).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        let mut present = BTreeSet::new();
        for k in 1..n_agents {
            let parent = order[rng.random_range(0..k)];
            let child = order[k];
            present.insert((parent.min(child), parent.max(child)));
        }
        for i in 0..n_agents {
            for j in (i + 1)..n_agents {
                if !present.contains(&(i, j)) && rng.random_bool(extra_edge_prob.clamp(0.0, 1.0)) {
                    present.insert((i, j));
                }
            }
        }
        let edges: Vec<_> = present.into_iter().collect();
        Self::from_edges(n_agents, &edges)
    }

    pub fn num_agents(&self) -> usize {
        self.neighbors.len()
    }

    /// Number of directed edges, `M = sum_i |N_i|`.
    pub fn num_directed_edges(&self) -> usize {
        self.directed.len()
    }

    pub fn neighbors(&self, agent: usize) -> &[usize] {
        &self.neighbors[agent]
    }

    pub fn degree(&self, agent: usize) -> usize {
        self.neighbors[agent].len()
    }

    pub fn max_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Index of the directed edge `(i, j)`, if `j` is a neighbor of `i`.
    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        let pos = self.neighbors.get(i)?.binary_search(&j).ok()?;
        Some(self.offsets[i] + pos)
    }

    /// The ordered pair stored at a directed edge index.
    pub fn edge(&self, index: usize) -> (usize, usize) {
        self.directed[index]
    }

    /// First directed edge owned by `agent`; its edges occupy
    /// `edge_offset(agent)..edge_offset(agent + 1)`.
    pub fn edge_offset(&self, agent: usize) -> usize {
        self.offsets[agent]
    }

    /// Undirected edges as `(i, j)` with `i < j`.
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        self.directed.iter().copied().filter(|&(i, j)| i < j).collect()
    }

    pub fn adjacency_matrix(&self) -> DMatrix<f64> {
        let n = self.num_agents();
        let mut adj = DMatrix::zeros(n, n);
        for &(i, j) in &self.directed {
            adj[(i, j)] = 1.0;
        }
        adj
    }

    /// Combinatorial Laplacian `D - A` (the negative of `L~ = A - D`).
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut lap = -self.adjacency_matrix();
        for i in 0..self.num_agents() {
            lap[(i, i)] = self.degree(i) as f64;
        }
        lap
    }
}

/// Spectral constants of `Q^T L~ Q` as used by the step-size bounds.
///
/// The nonzero eigenvalues of the Laplacian `D - A` are exactly the negated
/// eigenvalues of `Q^T L~ Q`, so everything is read off the `N x N`
/// Laplacian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralInfo {
    /// `|lambda~_min|`: largest Laplacian eigenvalue.
    pub lambda_tilde_min_abs: f64,
    /// `|lambda~_max|`: algebraic connectivity.
    pub lambda_tilde_max_abs: f64,
    pub max_degree: usize,
    /// Spectral norm of `L~`.
    pub laplacian_norm: f64,
    /// All nonzero Laplacian eigenvalues, ascending.
    pub nonzero_eigenvalues: Vec<f64>,
}

pub fn laplacian_eigenvalues(topology: &Topology) -> Vec<f64> {
    let eig = SymmetricEigen::new(topology.laplacian());
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

pub fn spectral_quantities(topology: &Topology) -> SpectralInfo {
    let values = laplacian_eigenvalues(topology);
    // the smallest eigenvalue is the (numerically zero) consensus direction
    let nonzero: Vec<f64> = values[1..].to_vec();
    let lambda_tilde_min_abs = nonzero.last().copied().unwrap_or(0.0);
    SpectralInfo {
        lambda_tilde_min_abs,
        lambda_tilde_max_abs: nonzero.first().copied().unwrap_or(0.0),
        max_degree: topology.max_degree(),
        laplacian_norm: lambda_tilde_min_abs,
        nonzero_eigenvalues: nonzero,
    }
}

/// Graph description as it appears in configuration files: either
/// `ring = N` or `n_agents = N` plus an explicit `edges` list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TopologySpec {
    Ring { ring: usize },
    Edges { n_agents: usize, edges: Vec<(usize, usize)> },
}

impl TopologySpec {
    pub fn build(&self) -> Result<Topology, GraphError> {
        match self {
            TopologySpec::Ring { ring } => Topology::ring(*ring),
            TopologySpec::Edges { n_agents, edges } => Topology::from_edges(*n_agents, edges),
        }
    }
}
