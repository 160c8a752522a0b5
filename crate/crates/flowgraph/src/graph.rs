//! Directed multigraph with typed edges and the path primitives everything
//! else is built on.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::Error;

/// Identity of a node. Ids are plain integers, unique within one graph and
/// stable under serialization; derived graphs allocate fresh ids past the
/// maximum of the graph they were built from, so ids need not be contiguous.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for NodeId {
    fn from(v: u32) -> Self {
        NodeId(v)
    }
}

/// Kind of a directed edge. Only `ControlFlow` participates in interval
/// partitioning; the other kinds ride along.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeKind {
    ControlFlow,
    DataDependency,
    Call,
    /// Opaque extension tag for edge kinds this crate knows nothing about.
    Ext(String),
}

impl EdgeKind {
    pub fn as_str(&self) -> &str {
        match self {
            EdgeKind::ControlFlow => "cf",
            EdgeKind::DataDependency => "dd",
            EdgeKind::Call => "call",
            EdgeKind::Ext(tag) => tag,
        }
    }

    pub fn parse(s: &str) -> EdgeKind {
        match s {
            "cf" => EdgeKind::ControlFlow,
            "dd" => EdgeKind::DataDependency,
            "call" => EdgeKind::Call,
            other => EdgeKind::Ext(other.to_string()),
        }
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for EdgeKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for EdgeKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(EdgeKind::parse(&s))
    }
}

/// One directed typed edge. Ordering is (src, dst, kind), which the canonical
/// serializer relies on.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub kind: EdgeKind,
}

/// Shortest-path mode: `Directed` follows edge direction, `Symmetrized`
/// treats every edge as bidirectional (the neighborhood convention used by
/// synchronous message passing).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Directed,
    Symmetrized,
}

/// Immutable directed multigraph. Parallel edges of the same kind collapse to
/// one; self-loops are stored but ignored by interval analysis and distances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    nodes: BTreeSet<NodeId>,
    entry: Option<NodeId>,
    edges: BTreeSet<Edge>,
    // reverse index keyed (dst, src, kind) for predecessor queries
    redges: BTreeSet<(NodeId, NodeId, EdgeKind)>,
}

/// Builder for [`Graph`]. Nodes must be added before edges referring to them.
#[derive(Debug, Default, Clone)]
pub struct GraphBuilder {
    nodes: BTreeSet<NodeId>,
    entry: Option<NodeId>,
    edges: BTreeSet<Edge>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, id: impl Into<NodeId>) -> &mut Self {
        self.nodes.insert(id.into());
        self
    }

    pub fn add_edge(
        &mut self,
        src: impl Into<NodeId>,
        dst: impl Into<NodeId>,
        kind: EdgeKind,
    ) -> Result<&mut Self, Error> {
        let (src, dst) = (src.into(), dst.into());
        for v in [src, dst] {
            if !self.nodes.contains(&v) {
                return Err(Error::UnknownNode(v));
            }
        }
        self.edges.insert(Edge { src, dst, kind });
        Ok(self)
    }

    pub fn entry(&mut self, id: impl Into<NodeId>) -> &mut Self {
        self.entry = Some(id.into());
        self
    }

    pub fn build(self) -> Result<Graph, Error> {
        if let Some(e) = self.entry {
            if !self.nodes.contains(&e) {
                return Err(Error::UnknownNode(e));
            }
        }
        let redges = self
            .edges
            .iter()
            .map(|e| (e.dst, e.src, e.kind.clone()))
            .collect();
        Ok(Graph {
            nodes: self.nodes,
            entry: self.entry,
            edges: self.edges,
            redges,
        })
    }
}

impl Graph {
    /// Convenience constructor for control-flow-only graphs.
    pub fn from_cf_edges(
        nodes: impl IntoIterator<Item = u32>,
        edges: impl IntoIterator<Item = (u32, u32)>,
        entry: Option<u32>,
    ) -> Result<Graph, Error> {
        let mut b = GraphBuilder::new();
        for n in nodes {
            b.add_node(n);
        }
        if let Some(e) = entry {
            b.entry(e);
        }
        for (s, d) in edges {
            b.add_edge(s, d, EdgeKind::ControlFlow)?;
        }
        b.build()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().copied()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.nodes.contains(&v)
    }

    pub fn entry_node(&self) -> Option<NodeId> {
        self.entry
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> + '_ {
        self.edges.iter()
    }

    pub fn edge_count(&self, kind: &EdgeKind) -> usize {
        self.edges.iter().filter(|e| &e.kind == kind).count()
    }

    pub fn has_edge(&self, src: NodeId, dst: NodeId, kind: &EdgeKind) -> bool {
        self.edges.contains(&Edge {
            src,
            dst,
            kind: kind.clone(),
        })
    }

    pub fn max_node_id(&self) -> Option<u32> {
        self.nodes.iter().next_back().map(|n| n.0)
    }

    fn check_member(&self, v: NodeId) -> Result<(), Error> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(Error::UnknownNode(v))
        }
    }

    /// Immediate successors of `v` through edges of `kind`.
    pub fn successors(&self, v: NodeId, kind: &EdgeKind) -> Result<BTreeSet<NodeId>, Error> {
        self.check_member(v)?;
        let lo = Edge {
            src: v,
            dst: NodeId(0),
            kind: EdgeKind::ControlFlow,
        };
        let hi = Edge {
            src: NodeId(v.0 + 1),
            dst: NodeId(0),
            kind: EdgeKind::ControlFlow,
        };
        Ok(self
            .edges
            .range(lo..hi)
            .filter(|e| &e.kind == kind)
            .map(|e| e.dst)
            .collect())
    }

    /// Immediate predecessors of `v` through edges of `kind`.
    pub fn predecessors(&self, v: NodeId, kind: &EdgeKind) -> Result<BTreeSet<NodeId>, Error> {
        self.check_member(v)?;
        let lo = (v, NodeId(0), EdgeKind::ControlFlow);
        let hi = (NodeId(v.0 + 1), NodeId(0), EdgeKind::ControlFlow);
        Ok(self
            .redges
            .range(lo..hi)
            .filter(|(_, _, k)| k == kind)
            .map(|(_, src, _)| *src)
            .collect())
    }

    /// Neighbors of `v` in both directions, self excluded.
    pub fn neighbors_sym(&self, v: NodeId, kind: &EdgeKind) -> Result<BTreeSet<NodeId>, Error> {
        let mut out = self.successors(v, kind)?;
        out.extend(self.predecessors(v, kind)?);
        out.remove(&v);
        Ok(out)
    }

    fn step_neighbors(&self, v: NodeId, mode: Mode) -> BTreeSet<NodeId> {
        let kind = EdgeKind::ControlFlow;
        let mut out = self.successors(v, &kind).unwrap_or_default();
        if mode == Mode::Symmetrized {
            out.extend(self.predecessors(v, &kind).unwrap_or_default());
        }
        out.remove(&v);
        out
    }

    /// Breadth-first shortest-path length from `u` to `v` over control-flow
    /// edges. `None` means unreachable.
    pub fn distance(&self, u: NodeId, v: NodeId, mode: Mode) -> Result<Option<u32>, Error> {
        self.check_member(u)?;
        self.check_member(v)?;
        Ok(self.bfs_distances(u, mode).get(&v).copied())
    }

    /// Single-source BFS distances over control-flow edges.
    pub fn bfs_distances(&self, source: NodeId, mode: Mode) -> BTreeMap<NodeId, u32> {
        let mut dist = BTreeMap::new();
        dist.insert(source, 0);
        let mut q = VecDeque::new();
        q.push_back(source);
        while let Some(cur) = q.pop_front() {
            let d = dist[&cur];
            for next in self.step_neighbors(cur, mode) {
                if let std::collections::btree_map::Entry::Vacant(e) = dist.entry(next) {
                    e.insert(d + 1);
                    q.push_back(next);
                }
            }
        }
        dist
    }

    /// Longest shortest-path distance over all ordered node pairs. Errors on
    /// disconnected graphs, carrying an offending pair.
    pub fn diameter(&self, mode: Mode) -> Result<u32, Error> {
        let mut best = 0;
        for u in self.nodes() {
            let dist = self.bfs_distances(u, mode);
            for v in self.nodes() {
                match dist.get(&v) {
                    Some(d) => best = best.max(*d),
                    None => return Err(Error::DiameterUndefined { from: u, to: v }),
                }
            }
        }
        Ok(best)
    }

    /// True when every node can reach every other ignoring edge direction.
    pub fn is_weakly_connected(&self) -> bool {
        let Some(start) = self.nodes.iter().next().copied() else {
            return true;
        };
        self.bfs_distances(start, Mode::Symmetrized).len() == self.node_count()
    }

    /// Nodes reachable from the entry along directed control flow. Errors if
    /// the entry is missing.
    pub fn reachable_from_entry(&self) -> Result<BTreeSet<NodeId>, Error> {
        let entry = self.entry.ok_or(Error::MissingEntry)?;
        Ok(self
            .bfs_distances(entry, Mode::Directed)
            .into_keys()
            .collect())
    }

    /// Subgraph induced by `members`: the member nodes plus every edge with
    /// both endpoints inside. The entry is dropped.
    pub fn induced(&self, members: &BTreeSet<NodeId>) -> Graph {
        let edges: BTreeSet<Edge> = self
            .edges
            .iter()
            .filter(|e| members.contains(&e.src) && members.contains(&e.dst))
            .cloned()
            .collect();
        let redges = edges
            .iter()
            .map(|e| (e.dst, e.src, e.kind.clone()))
            .collect();
        Graph {
            nodes: members.clone(),
            entry: None,
            edges,
            redges,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kind() -> EdgeKind {
        EdgeKind::ControlFlow
    }

    #[test]
    fn predecessors_of_single_edge() {
        let g = Graph::from_cf_edges([1, 2], [(1, 2)], None).unwrap();
        let p = g.predecessors(NodeId(2), &kind()).unwrap();
        assert_eq!(p, BTreeSet::from([NodeId(1)]));
    }

    #[test]
    fn predecessors_of_join_node() {
        // node 2 of the nested-loop reference graph has in-edges from 1 and 7
        let g = crate::fixtures::nested_loop_cfg();
        let p = g.predecessors(NodeId(2), &kind()).unwrap();
        assert_eq!(p, BTreeSet::from([NodeId(1), NodeId(7)]));
    }

    #[test]
    fn predecessors_empty_when_no_in_edges() {
        let g = Graph::from_cf_edges([1, 2], [(1, 2)], None).unwrap();
        assert!(g.predecessors(NodeId(1), &kind()).unwrap().is_empty());
    }

    #[test]
    fn successors_of_single_edge() {
        let g = Graph::from_cf_edges([1, 2], [(1, 2)], None).unwrap();
        let s = g.successors(NodeId(1), &kind()).unwrap();
        assert_eq!(s, BTreeSet::from([NodeId(2)]));
    }

    #[test]
    fn successors_of_branch_node() {
        let g = crate::fixtures::nested_loop_cfg();
        let s = g.successors(NodeId(2), &kind()).unwrap();
        assert_eq!(s, BTreeSet::from([NodeId(3), NodeId(7)]));
    }

    #[test]
    fn successors_empty_for_sink() {
        let g = Graph::from_cf_edges([1, 2], [(1, 2)], None).unwrap();
        assert!(g.successors(NodeId(2), &kind()).unwrap().is_empty());
    }

    #[test]
    fn unknown_node_is_rejected() {
        let g = Graph::from_cf_edges([1], [], None).unwrap();
        assert!(matches!(
            g.predecessors(NodeId(9), &kind()),
            Err(Error::UnknownNode(NodeId(9)))
        ));
    }

    #[test]
    fn distance_identity_is_zero() {
        let g = Graph::from_cf_edges([1, 2, 3], [(1, 2), (2, 3)], None).unwrap();
        assert_eq!(g.distance(NodeId(1), NodeId(1), Mode::Directed).unwrap(), Some(0));
    }

    #[test]
    fn distance_along_chain() {
        let g = Graph::from_cf_edges([1, 2, 3], [(1, 2), (2, 3)], None).unwrap();
        assert_eq!(g.distance(NodeId(1), NodeId(3), Mode::Directed).unwrap(), Some(2));
    }

    #[test]
    fn distance_reversal_needs_symmetrized_mode() {
        let g = Graph::from_cf_edges([1, 2, 3], [(1, 2), (2, 3)], None).unwrap();
        assert_eq!(g.distance(NodeId(3), NodeId(1), Mode::Directed).unwrap(), None);
        assert_eq!(
            g.distance(NodeId(3), NodeId(1), Mode::Symmetrized).unwrap(),
            Some(2)
        );
    }

    #[test]
    fn diameter_of_single_node() {
        let g = Graph::from_cf_edges([1], [], None).unwrap();
        assert_eq!(g.diameter(Mode::Directed).unwrap(), 0);
    }

    #[test]
    fn diameter_of_directed_three_cycle() {
        // enumerating all six ordered pairs gives a longest distance of 2
        let g = Graph::from_cf_edges([1, 2, 3], [(1, 2), (2, 3), (3, 1)], None).unwrap();
        assert_eq!(g.diameter(Mode::Directed).unwrap(), 2);
        assert_eq!(g.diameter(Mode::Symmetrized).unwrap(), 1);
    }

    #[test]
    fn diameter_of_symmetrized_chain() {
        let g = Graph::from_cf_edges([1, 2, 3, 4], [(1, 2), (2, 3), (3, 4)], None).unwrap();
        assert_eq!(g.diameter(Mode::Symmetrized).unwrap(), 3);
    }

    #[test]
    fn diameter_reports_offending_pair() {
        let g = Graph::from_cf_edges([1, 2], [(1, 2)], None).unwrap();
        match g.diameter(Mode::Directed) {
            Err(Error::DiameterUndefined { from, to }) => {
                assert_eq!((from, to), (NodeId(2), NodeId(1)));
            }
            other => panic!("expected DiameterUndefined, got {other:?}"),
        }
    }

    #[test]
    fn parallel_edges_collapse() {
        let mut b = GraphBuilder::new();
        b.add_node(1).add_node(2);
        b.add_edge(1, 2, kind()).unwrap();
        b.add_edge(1, 2, kind()).unwrap();
        b.add_edge(1, 2, EdgeKind::DataDependency).unwrap();
        let g = b.build().unwrap();
        assert_eq!(g.edges().count(), 2);
    }
}
