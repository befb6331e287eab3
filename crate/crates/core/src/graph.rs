//! Weighted undirected graphs carrying the discrete Wasserstein geometry.
//!
//! Each edge is stored once as `(i, j, w)` with `i < j` and read in both
//! directions. The normalized vertex weights are
//! `d_i = deg(i) / sum_i sum_j w_ij`, where the double sum counts every edge
//! twice, so that `sum_i d_i = 1`.
//!
//! # File format
//!
//! Graphs are read from TOML documents with exactly two keys:
//!
//! ```toml
//! n = 3
//! edges = [[0, 1, 1.0], [1, 2, 0.5]]
//! ```
//!
//! `n` is the vertex count and `edges` lists `[i, j, weight]` triples with
//! 0-based vertex indices and strictly positive weights. Self-loops,
//! duplicate edges (in either orientation) and unknown keys are rejected, and
//! the graph must be connected.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
    /// `adjacency[i]` holds `(neighbor, weight)` pairs.
    adjacency: Vec<Vec<(usize, f64)>>,
    d: Vec<f64>,
}

/// On-disk representation of a graph document.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

impl Graph {
    /// Builds a graph from `(i, j, weight)` triples.
    pub fn new(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGraph(format!("need at least 2 vertices, got {n}")));
        }
        let mut stored: Vec<Edge> = Vec::with_capacity(edges.len());
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b, w) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidGraph(format!("edge ({a}, {b}) references a vertex outside 0..{n}")));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {a}")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidGraph(format!("edge ({a}, {b}) has non-positive weight {w}")));
            }
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            if stored.iter().any(|e| e.i == i && e.j == j) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({i}, {j})")));
            }
            stored.push(Edge { i, j, weight: w });
            adjacency[i].push((j, w));
            adjacency[j].push((i, w));
        }

        let total: f64 = 2.0 * stored.iter().map(|e| e.weight).sum::<f64>();
        let d = adjacency.iter().map(|nbrs| nbrs.iter().map(|&(_, w)| w).sum::<f64>() / total).collect();

        let graph = Graph { n, edges: stored, adjacency, d };
        if !graph.is_connected() {
            return Err(Error::InvalidGraph("graph is not connected".into()));
        }
        Ok(graph)
    }

    pub fn from_file_contents(text: &str) -> Result<Self> {
        let file: GraphFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::new(file.n, &file.edges)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::from_file_contents(&text)
    }

    /// Two vertices joined by one edge.
    pub fn two_node(weight: f64) -> Result<Self> {
        Self::new(2, &[(0, 1, weight)])
    }

    /// Path `0 - 1 - ... - (n-1)` with unit weights.
    pub fn path(n: usize) -> Result<Self> {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i, 1.0)).collect();
        Self::new(n, &edges)
    }

    /// Cycle on `n` vertices with unit weights.
    pub fn cycle(n: usize) -> Result<Self> {
        let mut edges: Vec<_> = (1..n).map(|i| (i - 1, i, 1.0)).collect();
        if n > 2 {
            edges.push((0, n - 1, 1.0));
        }
        Self::new(n, &edges)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    /// Normalized vertex weights `d_i`.
    pub fn d(&self) -> &[f64] {
        &self.d
    }

    /// Weight of edge `{i, j}`, if present.
    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        self.adjacency.get(i)?.iter().find(|&&(k, _)| k == j).map(|&(_, w)| w)
    }

    pub fn to_file(&self) -> GraphFile {
        GraphFile { n: self.n, edges: self.edges.iter().map(|e| (e.i, e.j, e.weight)).collect() }
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &(u, _) in &self.adjacency[v] {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}
