use rand::seq::index;
use rand::Rng as _;

use super::Graph;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Maps a linear index over the strict upper triangle to its `(i, j)` pair.
fn pair_from_index(n: usize, mut k: usize) -> (usize, usize) {
    let mut i = 0;
    loop {
        let row = n - 1 - i;
        if k < row {
            return (i, i + 1 + k);
        }
        k -= row;
        i += 1;
    }
}

/// Undirected Erdős–Rényi graph with exactly `n_edges` edges drawn uniformly
/// without replacement from all node pairs.
pub fn sample_erdos_renyi(n_nodes: usize, n_edges: usize, seed: u64) -> Result<Graph> {
    let max = n_nodes * n_nodes.saturating_sub(1) / 2;
    if n_edges > max {
        return Err(Error::Config(format!(
            "{n_edges} edges requested but a simple graph on {n_nodes} nodes has at most {max}"
        )));
    }
    if n_edges == 0 {
        return Err(Error::Config(
            "Erdős–Rényi sample with zero edges has no usable structure".into(),
        ));
    }
    let mut rng = rng_from_seed(seed);
    let chosen = index::sample(&mut rng, max, n_edges);
    Graph::from_edges(
        n_nodes,
        chosen.into_iter().map(|k| pair_from_index(n_nodes, k)),
        false,
    )
}

/// A stochastic block model draw together with the block of every node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SbmGraph {
    pub graph: Graph,
    /// Cluster index per node; nodes are laid out cluster by cluster.
    pub labels: Vec<usize>,
}

/// Two-probability stochastic block model: each unordered pair is connected
/// independently with `p_within` inside a block and `p_between` across blocks.
pub fn sample_sbm(
    cluster_sizes: &[usize],
    p_within: f64,
    p_between: f64,
    seed: u64,
) -> Result<SbmGraph> {
    for (name, p) in [("p_within", p_within), ("p_between", p_between)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!("{name} = {p} is not a probability")));
        }
    }
    if cluster_sizes.is_empty() || cluster_sizes.contains(&0) {
        return Err(Error::Config("cluster sizes must be positive".into()));
    }

    let labels: Vec<usize> = cluster_sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &size)| std::iter::repeat_n(c, size))
        .collect();
    let n = labels.len();
    let mut rng = rng_from_seed(seed);
    let mut graph = Graph::empty(n, false);
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if labels[i] == labels[j] {
                p_within
            } else {
                p_between
            };
            if rng.random_bool(p) {
                graph.insert(i, j);
            }
        }
    }
    Ok(SbmGraph { graph, labels })
}
