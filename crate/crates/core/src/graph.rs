//! Undirected weighted graphs and their algebraic matrices.
//!
//! Edges keep the orientation they were given in: column `k` of the incidence
//! matrix has `+1` at the tail and `-1` at the head of edge `k`. Node indices
//! are 1-based at the public constructors and 0-based everywhere else.

use std::collections::{BTreeSet, VecDeque};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{FormationError, Result};
use crate::linalg;

/// An oriented edge between two 0-based node indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
}

impl Edge {
    /// The endpoint opposite to `node`, if `node` belongs to this edge.
    pub fn other(&self, node: usize) -> Option<usize> {
        if node == self.tail {
            Some(self.head)
        } else if node == self.head {
            Some(self.tail)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
    weights: Vec<f64>,
}

impl Graph {
    /// Unit-weight graph from 1-based `(tail, head)` pairs.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::with_weights(n, edges, &vec![1.0; edges.len()])
    }

    /// Weighted graph from 1-based `(tail, head)` pairs.
    pub fn with_weights(n: usize, edges: &[(usize, usize)], weights: &[f64]) -> Result<Self> {
        if n < 2 {
            return Err(FormationError::TooFewNodes(n));
        }
        if weights.len() != edges.len() {
            return Err(FormationError::DimensionMismatch {
                what: "edge weights",
                expected: edges.len(),
                found: weights.len(),
            });
        }
        let mut seen: Vec<((usize, usize), usize)> = Vec::with_capacity(edges.len());
        let mut oriented = Vec::with_capacity(edges.len());
        for (k, (&(tail, head), &weight)) in edges.iter().zip(weights).enumerate() {
            let edge = k + 1;
            for node in [tail, head] {
                if node == 0 || node > n {
                    return Err(FormationError::NodeOutOfRange { edge, node, n });
                }
            }
            if tail == head {
                return Err(FormationError::SelfLoop { edge, tail, head });
            }
            if !(weight > 0.0) || !weight.is_finite() {
                return Err(FormationError::NonPositiveWeight { edge, weight });
            }
            let key = (tail.min(head), tail.max(head));
            if let Some((_, first)) = seen.iter().find(|(s, _)| *s == key) {
                return Err(FormationError::DuplicateEdge {
                    edge,
                    first: *first,
                    tail,
                    head,
                });
            }
            seen.push((key, edge));
            oriented.push(Edge {
                tail: tail - 1,
                head: head - 1,
            });
        }
        Ok(Graph {
            n,
            edges: oriented,
            weights: weights.to_vec(),
        })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Sorted 0-based neighbors of node `i`.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let set: BTreeSet<usize> = self.edges.iter().filter_map(|e| e.other(i)).collect();
        set.into_iter().collect()
    }

    /// Index of the edge joining `i` and `j` in either orientation.
    pub fn edge_between(&self, i: usize, j: usize) -> Option<usize> {
        self.edges
            .iter()
            .position(|e| (e.tail == i && e.head == j) || (e.tail == j && e.head == i))
    }

    /// Weight shared by every edge, if the weights are uniform.
    pub fn uniform_weight(&self) -> Option<f64> {
        let first = *self.weights.first()?;
        self.weights
            .iter()
            .all(|w| (w - first).abs() <= 1e-12 * first.max(1.0))
            .then_some(first)
    }

    /// Connected components as lists of 0-based nodes.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut label = vec![usize::MAX; self.n];
        let mut out = Vec::new();
        for start in 0..self.n {
            if label[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut comp = vec![start];
            label[start] = id;
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for w in self.neighbors(v) {
                    if label[w] == usize::MAX {
                        label[w] = id;
                        comp.push(w);
                        queue.push_back(w);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }
}

/// Node-by-edge incidence matrix `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMatrix(pub DMatrix<f64>);

impl IncidenceMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// `B ⊗ I_m`.
    pub fn lifted(&self, m: usize) -> DMatrix<f64> {
        linalg::lift(&self.0, m)
    }
}

/// Weighted graph Laplacian `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian(pub DMatrix<f64>);

impl Laplacian {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// `L ⊗ I_m`.
    pub fn lifted(&self, m: usize) -> DMatrix<f64> {
        linalg::lift(&self.0, m)
    }

    /// Ascending eigenvalues (the matrix is symmetric).
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.0.clone().symmetric_eigen().eigenvalues.iter().cloned().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    /// Number of eigenvalues below the scale-relative zero threshold.
    pub fn zero_eigenvalue_count(&self) -> usize {
        let ev = self.eigenvalues();
        let norm = ev.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        let tol = linalg::zero_threshold(norm);
        ev.iter().filter(|x| x.abs() < tol).count()
    }
}

pub fn build_incidence(graph: &Graph) -> IncidenceMatrix {
    let mut b = DMatrix::zeros(graph.node_count(), graph.edge_count());
    for (k, e) in graph.edges().iter().enumerate() {
        b[(e.tail, k)] = 1.0;
        b[(e.head, k)] = -1.0;
    }
    IncidenceMatrix(b)
}

/// Laplacian assembled entrywise: degree sums on the diagonal, `-w_ij` off it.
pub fn build_laplacian(graph: &Graph) -> Laplacian {
    let n = graph.node_count();
    let mut l = DMatrix::zeros(n, n);
    for (e, &w) in graph.edges().iter().zip(graph.weights()) {
        l[(e.tail, e.head)] -= w;
        l[(e.head, e.tail)] -= w;
        l[(e.tail, e.tail)] += w;
        l[(e.head, e.head)] += w;
    }
    Laplacian(l)
}

/// `diag(w)`, one entry per edge.
pub fn weight_matrix(graph: &Graph) -> DMatrix<f64> {
    DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(graph.weights()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphClass {
    pub connected: bool,
    pub tree: bool,
    pub components: usize,
    /// `λ_min(BᵀB)`, reported for trees.
    pub incidence_gram_min_eigenvalue: Option<f64>,
}

pub fn classify_graph(graph: &Graph) -> GraphClass {
    let components = graph.components().len();
    let connected = components == 1;
    let tree = connected && graph.edge_count() == graph.node_count() - 1;
    let incidence_gram_min_eigenvalue = tree.then(|| {
        let b = build_incidence(graph).0;
        let lambda = linalg::symmetric_min_eigenvalue(&(b.transpose() * &b));
        debug_assert!(lambda > 1e-9, "tree with singular BᵀB: {lambda}");
        lambda
    });
    GraphClass {
        connected,
        tree,
        components,
        incidence_gram_min_eigenvalue,
    }
}

/// Fails unless the graph is connected.
pub fn require_connected(graph: &Graph) -> Result<GraphClass> {
    let class = classify_graph(graph);
    if !class.connected {
        return Err(FormationError::NotConnected {
            components: class.components,
        });
    }
    Ok(class)
}

/// Fails unless the graph is a tree.
pub fn require_tree(graph: &Graph, why: &str) -> Result<GraphClass> {
    let class = require_connected(graph)?;
    if !class.tree {
        return Err(FormationError::UnsupportedTopology(format!(
            "{why} requires a tree graph, this one has {} edges on {} nodes",
            graph.edge_count(),
            graph.node_count()
        )));
    }
    Ok(class)
}
