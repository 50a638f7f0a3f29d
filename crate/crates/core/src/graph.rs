//! Simple undirected connected graphs and the matrices derived from them:
//! adjacency `A`, degree `D`, Laplacian `L = D - A`, the neighborhood
//! averaging matrix `G = (D + I)^{-1}(A + I)`, and the Moore-Penrose
//! pseudoinverse of `L`.
//!
//! Node ids are 1-based at the interface and 0-based internally. Graphs are
//! immutable after construction; a topology change means building a new one.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::numerics::{kernel_threshold, sym_eigen};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph needs at least 2 nodes, got {0}")]
    EmptyGraph(usize),
    #[error("self-loop at node {0}")]
    SelfLoop(usize),
    #[error("node id {id} out of range 1..={n}")]
    NodeOutOfRange { id: usize, n: usize },
    #[error("graph is not connected")]
    NotConnected,
    #[error("edge list parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// A simple undirected graph on nodes `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    // 0-based, stored with i < j
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as 1-based `(i, j)` pairs with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().map(|&(i, j)| (i + 1, j + 1))
    }

    /// 0-based neighbor lists.
    fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        adj
    }
}

/// Build a graph from 1-based node pairs. Duplicate and reversed pairs are
/// merged; self-loops and out-of-range ids are rejected.
pub fn build_graph(n: usize, edges: &[(usize, usize)]) -> Result<Graph, GraphError> {
    if n < 2 {
        return Err(GraphError::EmptyGraph(n));
    }
    let mut set = BTreeSet::new();
    for &(a, b) in edges {
        for id in [a, b] {
            if id < 1 || id > n {
                return Err(GraphError::NodeOutOfRange { id, n });
            }
        }
        if a == b {
            return Err(GraphError::SelfLoop(a));
        }
        let (i, j) = (a.min(b) - 1, a.max(b) - 1);
        set.insert((i, j));
    }
    Ok(Graph { n, edges: set })
}

/// True iff one traversal from node 1 reaches every node.
pub fn is_connected(g: &Graph) -> bool {
    let adj = g.neighbors();
    let mut seen = vec![false; g.n];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen.iter().all(|&s| s)
}

/// The matrices every other module works with.
#[derive(Debug, Clone)]
pub struct GraphMatrices {
    pub adjacency: DMatrix<f64>,
    pub degree: DMatrix<f64>,
    pub laplacian: DMatrix<f64>,
    /// `G = (D + I)^{-1}(A + I)`; row i averages node i with its neighbors.
    pub averaging: DMatrix<f64>,
}

impl GraphMatrices {
    pub fn node_count(&self) -> usize {
        self.laplacian.nrows()
    }

    /// `D + I`, the diagonal used to symmetrize the averaging matrix.
    pub fn degree_plus_identity(&self) -> DMatrix<f64> {
        &self.degree + DMatrix::<f64>::identity(self.node_count(), self.node_count())
    }
}

/// Derive `A`, `D`, `L` and `G` for a connected graph.
pub fn derive_matrices(g: &Graph) -> Result<GraphMatrices, GraphError> {
    if !is_connected(g) {
        return Err(GraphError::NotConnected);
    }
    let n = g.n;
    let mut adjacency = DMatrix::<f64>::zeros(n, n);
    for &(i, j) in &g.edges {
        adjacency[(i, j)] = 1.0;
        adjacency[(j, i)] = 1.0;
    }
    let degrees: Vec<f64> = (0..n).map(|i| adjacency.row(i).sum()).collect();
    let degree = DMatrix::from_diagonal(&DVector::from_vec(degrees.clone()));
    let laplacian = &degree - &adjacency;

    let mut averaging = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let w = 1.0 / (degrees[i] + 1.0);
        averaging[(i, i)] = w;
        for j in 0..n {
            if adjacency[(i, j)] != 0.0 {
                averaging[(i, j)] = w;
            }
        }
    }
    Ok(GraphMatrices {
        adjacency,
        degree,
        laplacian,
        averaging,
    })
}

/// Moore-Penrose pseudoinverse of the Laplacian, computed spectrally.
///
/// Only eigenvalues above the kernel threshold are inverted; connectivity
/// guarantees rank `N - 1`, so exactly the consensus direction is dropped.
pub fn laplacian_pseudoinverse(m: &GraphMatrices) -> DMatrix<f64> {
    let eig = sym_eigen(&m.laplacian).expect("Laplacian is symmetric by construction");
    let n = eig.values.len();
    let thr = kernel_threshold(eig.values[n - 1]);
    let mut inv = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        if eig.values[k] > thr {
            inv[(k, k)] = 1.0 / eig.values[k];
        }
    }
    &eig.vectors * inv * eig.vectors.transpose()
}

/// Parse the edge-list text format: first non-comment line is `n`, then one
/// `i j` pair per line. `#` starts a comment, ids are 1-based.
pub fn parse_edge_list(text: &str) -> Result<Graph, GraphError> {
    let mut n: Option<usize> = None;
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        if n.is_none() {
            let v: usize = fields.next().unwrap().parse().map_err(|_| GraphError::Parse {
                line: lineno + 1,
                reason: format!("expected node count, got `{line}`"),
            })?;
            if fields.next().is_some() {
                return Err(GraphError::Parse {
                    line: lineno + 1,
                    reason: "first line must contain only the node count".into(),
                });
            }
            n = Some(v);
            continue;
        }
        let parse = |s: Option<&str>| -> Result<usize, GraphError> {
            s.and_then(|t| t.parse().ok()).ok_or(GraphError::Parse {
                line: lineno + 1,
                reason: format!("expected `i j` pair, got `{line}`"),
            })
        };
        let i = parse(fields.next())?;
        let j = parse(fields.next())?;
        if fields.next().is_some() {
            return Err(GraphError::Parse {
                line: lineno + 1,
                reason: format!("expected `i j` pair, got `{line}`"),
            });
        }
        edges.push((i, j));
    }
    let n = n.ok_or(GraphError::Parse {
        line: 0,
        reason: "empty edge list".into(),
    })?;
    build_graph(n, &edges)
}

/// The 6-node cycle used throughout the regression scenarios.
pub fn six_cycle() -> Graph {
    build_graph(6, &[(1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 1)]).unwrap()
}
