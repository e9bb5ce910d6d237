use std::collections::VecDeque;

use super::Graph;
use crate::error::{Error, Result};

/// Stage-wise neighbour sets `N^(r)(i)`, `r = 1..=r_max`, with equal weights
/// inside every non-empty stage.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighbourhoodTable {
    r_max: usize,
    // stages[node][r - 1], sorted ascending
    stages: Vec<Vec<Vec<usize>>>,
}

impl NeighbourhoodTable {
    pub fn r_max(&self) -> usize {
        self.r_max
    }

    pub fn n_nodes(&self) -> usize {
        self.stages.len()
    }

    /// Nodes at shortest-path distance exactly `r` from `node`. Empty for
    /// stages beyond `r_max`.
    pub fn stage(&self, node: usize, r: usize) -> &[usize] {
        match r {
            0 => &[],
            r if r > self.r_max => &[],
            r => &self.stages[node][r - 1],
        }
    }

    /// Weight `w_{node, v}` shared by every `v` in stage `r` (0 if empty).
    pub fn weight(&self, node: usize, r: usize) -> f64 {
        let len = self.stage(node, r).len();
        if len == 0 {
            0.0
        } else {
            1.0 / len as f64
        }
    }

    pub fn weights(&self, node: usize, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let w = self.weight(node, r);
        self.stage(node, r).iter().map(move |&v| (v, w))
    }

    /// `Σ_v w_{node,v} value(v)` over stage `r`; `None` if any value is
    /// missing, `Some(0.0)` for an empty stage.
    pub fn weighted_sum<F>(&self, node: usize, r: usize, mut value: F) -> Option<f64>
    where
        F: FnMut(usize) -> Option<f64>,
    {
        let w = self.weight(node, r);
        let mut acc = 0.0;
        for &v in self.stage(node, r) {
            acc += w * value(v)?;
        }
        Some(acc)
    }
}

/// Computes stage-`r` neighbourhoods by breadth-first search along
/// out-edges.
pub fn neighbourhoods(g: &Graph, r_max: usize) -> Result<NeighbourhoodTable> {
    if r_max == 0 {
        return Err(Error::Config("r_max must be at least 1".into()));
    }
    let n = g.n_nodes();
    let mut stages = Vec::with_capacity(n);
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();

    for source in 0..n {
        dist.fill(usize::MAX);
        dist[source] = 0;
        queue.clear();
        queue.push_back(source);
        let mut layers: Vec<Vec<usize>> = vec![Vec::new(); r_max];

        while let Some(u) = queue.pop_front() {
            let d = dist[u];
            if d == r_max {
                continue;
            }
            for v in g.neighbours(u) {
                if dist[v] == usize::MAX {
                    dist[v] = d + 1;
                    layers[d].push(v);
                    queue.push_back(v);
                }
            }
        }
        for layer in &mut layers {
            layer.sort_unstable();
        }
        stages.push(layers);
    }

    Ok(NeighbourhoodTable { r_max, stages })
}
