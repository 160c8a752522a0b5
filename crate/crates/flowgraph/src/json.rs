//! Versioned JSON document format for graphs.
//!
//! The canonical writer emits nodes in ascending order and edges in
//! (src, dst, kind) order, so serializing the same graph twice yields the
//! same bytes.

use serde::{Deserialize, Serialize};

use crate::graph::{Edge, Graph, GraphBuilder, NodeId};
use crate::Error;

pub const GRAPH_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct GraphDoc {
    version: u32,
    entry: Option<NodeId>,
    nodes: Vec<NodeId>,
    edges: Vec<Edge>,
}

impl Serialize for Graph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let doc = GraphDoc {
            version: GRAPH_FORMAT_VERSION,
            entry: self.entry_node(),
            nodes: self.nodes().collect(),
            edges: self.edges().cloned().collect(),
        };
        doc.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Graph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = GraphDoc::deserialize(d)?;
        if doc.version != GRAPH_FORMAT_VERSION {
            return Err(D::Error::custom(format!(
                "unsupported graph format version {} (expected {})",
                doc.version, GRAPH_FORMAT_VERSION
            )));
        }
        let mut b = GraphBuilder::new();
        for n in &doc.nodes {
            b.add_node(*n);
        }
        if let Some(e) = doc.entry {
            b.entry(e);
        }
        for e in doc.edges {
            b.add_edge(e.src, e.dst, e.kind).map_err(D::Error::custom)?;
        }
        b.build().map_err(D::Error::custom)
    }
}

/// Canonical single-line JSON encoding of a graph.
pub fn write_canonical(g: &Graph) -> String {
    serde_json::to_string(g).expect("graph serialization cannot fail")
}

pub fn read(s: &str) -> Result<Graph, Error> {
    serde_json::from_str(s).map_err(|e| Error::Format(e.to_string()))
}
