use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{Error, Result};

/// One-line JSON sidecar accompanying an edge-list CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphMeta {
    pub n_nodes: usize,
    pub directed: bool,
}

#[derive(Serialize, Deserialize)]
struct EdgeRow {
    from: usize,
    to: usize,
}

/// Writes `from,to` edge rows (0-based) to `edges` and the sidecar JSON to
/// `meta`.
pub fn write_graph<E: Write, M: Write>(g: &Graph, edges: E, mut meta: M) -> Result<()> {
    let mut w = csv::Writer::from_writer(edges);
    for (from, to) in g.edges() {
        w.serialize(EdgeRow { from, to })?;
    }
    w.flush()?;
    let sidecar = GraphMeta {
        n_nodes: g.n_nodes(),
        directed: g.is_directed(),
    };
    serde_json::to_writer(&mut meta, &sidecar)?;
    meta.write_all(b"\n")?;
    Ok(())
}

pub fn read_graph<E: Read, M: Read>(edges: E, meta: M) -> Result<Graph> {
    let meta: GraphMeta = serde_json::from_reader(meta)?;
    let mut r = csv::Reader::from_reader(edges);
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["from", "to"] {
        return Err(Error::Data(format!(
            "edge list header must be `from,to`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut list = Vec::new();
    for row in r.deserialize::<EdgeRow>() {
        let row = row?;
        list.push((row.from, row.to));
    }
    Graph::from_edges(meta.n_nodes, list, meta.directed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_isolated_node() {
        let g = Graph::from_edges(4, [(0, 1), (1, 2)], false).unwrap();
        let mut edges = Vec::new();
        let mut meta = Vec::new();
        write_graph(&g, &mut edges, &mut meta).unwrap();
        assert_eq!(
            String::from_utf8(edges.clone()).unwrap(),
            "from,to\n0,1\n1,2\n"
        );
        assert_eq!(
            String::from_utf8(meta.clone()).unwrap(),
            "{\"n_nodes\":4,\"directed\":false}\n"
        );
        assert_eq!(read_graph(&edges[..], &meta[..]).unwrap(), g);
    }

    #[test]
    fn rejects_wrong_header() {
        let meta = br#"{"n_nodes": 2, "directed": false}"#;
        assert!(read_graph(&b"a,b\n0,1\n"[..], &meta[..]).is_err());
    }
}
