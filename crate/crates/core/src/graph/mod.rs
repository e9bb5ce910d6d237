//! Fixed network structures.
//!
//! A [`Graph`] is a simple binary adjacency structure. The edge processes of
//! an original network are moved onto the nodes of a derived graph, built
//! either deterministically with [`to_line_graph`] or by sampling from
//! [`sample_erdos_renyi`] / [`sample_sbm`]. [`neighbourhoods`] then computes
//! the stage-wise neighbour sets and weights used by the autoregression.

mod io;
mod line;
mod neighbourhood;
mod random;

pub use io::{read_graph, write_graph, GraphMeta};
pub use line::{to_line_graph, LineGraph};
pub use neighbourhood::{neighbourhoods, NeighbourhoodTable};
pub use random::{sample_erdos_renyi, sample_sbm, SbmGraph};

use crate::error::{Error, Result};

/// Simple graph on nodes `0..n_nodes` stored as a dense 0/1 adjacency matrix.
///
/// No self-loops. An undirected graph always has a symmetric matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n_nodes: usize,
    adjacency: Vec<u8>,
    directed: bool,
}

impl Graph {
    pub fn empty(n_nodes: usize, directed: bool) -> Self {
        Self {
            n_nodes,
            adjacency: vec![0; n_nodes * n_nodes],
            directed,
        }
    }

    /// Builds a graph from an edge list. Repeated edges collapse into one.
    pub fn from_edges<I>(n_nodes: usize, edges: I, directed: bool) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut g = Self::empty(n_nodes, directed);
        for (from, to) in edges {
            if from >= n_nodes || to >= n_nodes {
                return Err(Error::Graph(format!(
                    "edge ({from}, {to}) references a node outside 0..{n_nodes}"
                )));
            }
            if from == to {
                return Err(Error::Graph(format!("self-loop on node {from}")));
            }
            g.insert(from, to);
        }
        Ok(g)
    }

    /// Builds a graph from a square 0/1 matrix, checking the invariants.
    pub fn from_adjacency(rows: &[Vec<u8>], directed: bool) -> Result<Self> {
        let n = rows.len();
        let mut g = Self::empty(n, directed);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Graph(format!(
                    "adjacency row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (j, &a) in row.iter().enumerate() {
                match a {
                    0 => {}
                    1 if i == j => return Err(Error::Graph(format!("self-loop on node {i}"))),
                    1 => g.adjacency[i * n + j] = 1,
                    _ => {
                        return Err(Error::Graph(format!(
                            "adjacency entry ({i}, {j}) = {a} is not binary"
                        )))
                    }
                }
            }
        }
        if !directed {
            for i in 0..n {
                for j in (i + 1)..n {
                    if g.adjacency[i * n + j] != g.adjacency[j * n + i] {
                        return Err(Error::Graph(format!(
                            "undirected adjacency is not symmetric at ({i}, {j})"
                        )));
                    }
                }
            }
        }
        Ok(g)
    }

    fn insert(&mut self, from: usize, to: usize) {
        let n = self.n_nodes;
        self.adjacency[from * n + to] = 1;
        if !self.directed {
            self.adjacency[to * n + from] = 1;
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        from < self.n_nodes && to < self.n_nodes && self.adjacency[from * self.n_nodes + to] == 1
    }

    pub fn adjacency_row(&self, node: usize) -> &[u8] {
        &self.adjacency[node * self.n_nodes..(node + 1) * self.n_nodes]
    }

    /// Edge list in row-major order. Undirected edges are reported once as
    /// `(i, j)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.n_nodes;
        let mut out = Vec::new();
        for i in 0..n {
            let start = if self.directed { 0 } else { i + 1 };
            for j in start..n {
                if self.adjacency[i * n + j] == 1 {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn n_edges(&self) -> usize {
        let total = self.adjacency.iter().filter(|&&a| a == 1).count();
        if self.directed {
            total
        } else {
            total / 2
        }
    }

    /// Out-neighbours of `node` (all neighbours when undirected).
    pub fn neighbours(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency_row(node)
            .iter()
            .enumerate()
            .filter_map(|(j, &a)| (a == 1).then_some(j))
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency_row(node).iter().filter(|&&a| a == 1).count()
    }
}
