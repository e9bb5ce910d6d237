use super::Graph;
use crate::error::{Error, Result};

/// Edge-to-vertex dual of a graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineGraph {
    pub graph: Graph,
    /// `edge_map[node]` is the original edge carried by that node.
    pub edge_map: Vec<(usize, usize)>,
}

/// Builds the line graph `L(G)`: one node per edge of `g`, two nodes adjacent
/// iff their edges share at least one endpoint. Edge direction is ignored for
/// the sharing test and the result is always undirected.
pub fn to_line_graph(g: &Graph) -> Result<LineGraph> {
    let edges = g.edges();
    if edges.is_empty() {
        return Err(Error::DegenerateLineGraph);
    }

    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); g.n_nodes()];
    for (idx, &(u, v)) in edges.iter().enumerate() {
        incident[u].push(idx);
        incident[v].push(idx);
    }

    let mut line = Graph::empty(edges.len(), false);
    for around in &incident {
        for (a, &e1) in around.iter().enumerate() {
            for &e2 in &around[a + 1..] {
                line.insert(e1, e2);
            }
        }
    }

    Ok(LineGraph {
        graph: line,
        edge_map: edges,
    })
}
