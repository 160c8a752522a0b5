//! Derivation of successively higher-order graphs.
//!
//! Each interval of a graph becomes one node of the next graph, and each
//! interval-exit edge becomes an edge between the corresponding nodes. The
//! chain ends when a single node remains or when the partition stops
//! shrinking (an irreducible graph).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::graph::{Edge, EdgeKind, Graph, GraphBuilder, NodeId};
use crate::intervals::{partition, Interval, IntervalPartition};
use crate::Error;

/// Why the derivation stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Terminal {
    SingleNode,
    Irreducible,
}

/// One level of the derived sequence: a graph, its interval partition, and
/// how many parallel control-flow edges were collapsed while building this
/// graph from the level below (0 for the first level).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub graph: Graph,
    pub partition: IntervalPartition,
    pub dedup_events: usize,
}

/// The full chain of derived graphs.
///
/// `provenance[k]` maps each node of level k+1 to the index of the interval
/// of level k it replaces. Singleton intervals keep their node id; each
/// multi-member interval receives the next fresh id, counting upward from one
/// past the largest id of the original graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedSequence {
    pub levels: Vec<Level>,
    pub provenance: Vec<BTreeMap<NodeId, usize>>,
    pub terminal: Terminal,
}

impl DerivedSequence {
    pub fn order(&self) -> usize {
        self.levels.len()
    }

    pub fn first(&self) -> &Level {
        &self.levels[0]
    }

    pub fn last(&self) -> &Level {
        self.levels.last().expect("sequence has at least one level")
    }

    /// The interval of level `level` that node `v` of level `level + 1`
    /// replaces.
    pub fn interval_behind(&self, level: usize, v: NodeId) -> Result<&Interval, Error> {
        let idx = self
            .provenance
            .get(level)
            .and_then(|m| m.get(&v))
            .ok_or_else(|| {
                Error::InvalidSequence(format!("no provenance for node {v} above level {level}"))
            })?;
        Ok(&self.levels[level].partition.intervals[*idx])
    }

    /// Total parallel-edge collapses across all quotients.
    pub fn total_dedup_events(&self) -> usize {
        self.levels.iter().map(|l| l.dedup_events).sum()
    }

    /// Largest interval diameter (symmetrized, over the interval-induced
    /// control-flow subgraph) across all levels.
    pub fn max_interval_diameter(&self) -> Result<u32, Error> {
        let mut tau = 0;
        for level in &self.levels {
            for iv in &level.partition.intervals {
                tau = tau.max(interval_diameter(&level.graph, iv)?);
            }
        }
        Ok(tau)
    }

    /// Basic structural validation, used before simulation.
    pub fn validate(&self) -> Result<(), Error> {
        if self.levels.is_empty() {
            return Err(Error::InvalidSequence("no levels".into()));
        }
        if self.provenance.len() + 1 != self.levels.len() {
            return Err(Error::InvalidSequence(format!(
                "{} levels but {} provenance maps",
                self.levels.len(),
                self.provenance.len()
            )));
        }
        for (k, prov) in self.provenance.iter().enumerate() {
            let upper = &self.levels[k + 1];
            if prov.len() != upper.graph.node_count() {
                return Err(Error::InvalidSequence(format!(
                    "provenance above level {k} covers {} of {} nodes",
                    prov.len(),
                    upper.graph.node_count()
                )));
            }
            for (node, idx) in prov {
                if !upper.graph.contains(*node) {
                    return Err(Error::InvalidSequence(format!(
                        "provenance names unknown node {node} at level {}",
                        k + 1
                    )));
                }
                if *idx >= self.levels[k].partition.intervals.len() {
                    return Err(Error::InvalidSequence(format!(
                        "provenance for node {node} points past the intervals of level {k}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Symmetrized diameter of the control-flow subgraph induced by an interval.
pub fn interval_diameter(g: &Graph, iv: &Interval) -> Result<u32, Error> {
    if iv.is_singleton() {
        return Ok(0);
    }
    let sub = g.induced(&iv.member_set());
    sub.diameter(crate::Mode::Symmetrized)
}

/// Number of edges of `kind` with both endpoints inside the interval.
pub fn interval_edge_count(g: &Graph, iv: &Interval, kind: &EdgeKind) -> usize {
    let members = iv.member_set();
    g.edges()
        .filter(|e| e.kind == *kind && members.contains(&e.src) && members.contains(&e.dst))
        .count()
}

// Build the next-order graph. Returns the graph, the map from new node id to
// interval index, and the number of collapsed parallel control-flow edges.
fn quotient(
    g: &Graph,
    part: &IntervalPartition,
    next_id: &mut u32,
) -> Result<(Graph, BTreeMap<NodeId, usize>, usize), Error> {
    let mut id_of_interval: Vec<NodeId> = Vec::with_capacity(part.intervals.len());
    for iv in &part.intervals {
        if iv.is_singleton() {
            id_of_interval.push(iv.header);
        } else {
            id_of_interval.push(NodeId(*next_id));
            *next_id += 1;
        }
    }

    let mut b = GraphBuilder::new();
    for id in &id_of_interval {
        b.add_node(*id);
    }
    if let Some(entry) = g.entry_node() {
        b.entry(id_of_interval[part.node_to_interval[&entry]]);
    }

    let mut seen_cf: BTreeMap<(NodeId, NodeId), usize> = BTreeMap::new();
    for e in g.edges() {
        let si = part.node_to_interval[&e.src];
        let di = part.node_to_interval[&e.dst];
        if si == di {
            continue; // edge absorbed into the interval; no self-loop emitted
        }
        let (s, d) = (id_of_interval[si], id_of_interval[di]);
        if e.kind == EdgeKind::ControlFlow {
            *seen_cf.entry((s, d)).or_insert(0) += 1;
        }
        b.add_edge(s, d, e.kind.clone())?;
    }
    let dedup_events: usize = seen_cf.values().map(|c| c.saturating_sub(1)).sum();

    let prov = id_of_interval
        .iter()
        .enumerate()
        .map(|(idx, id)| (*id, idx))
        .collect();
    Ok((b.build()?, prov, dedup_events))
}

/// Derive the full sequence of higher-order graphs for `g`.
pub fn derive(g: &Graph) -> Result<DerivedSequence, Error> {
    let mut levels = Vec::new();
    let mut provenance = Vec::new();
    let mut next_id = g.max_node_id().map(|m| m + 1).unwrap_or(0);
    let mut cur = g.clone();
    let mut dedup_for_level = 0usize;

    loop {
        let part = partition(&cur)?;
        let single = cur.node_count() == 1;
        let identity = part.is_identity();
        if single || identity {
            levels.push(Level {
                graph: cur,
                partition: part,
                dedup_events: dedup_for_level,
            });
            let terminal = if single {
                Terminal::SingleNode
            } else {
                Terminal::Irreducible
            };
            return Ok(DerivedSequence {
                levels,
                provenance,
                terminal,
            });
        }
        let (next, prov, dedup) = quotient(&cur, &part, &mut next_id)?;
        levels.push(Level {
            graph: cur,
            partition: part,
            dedup_events: dedup_for_level,
        });
        provenance.push(prov);
        dedup_for_level = dedup;
        cur = next;
    }
}

/// Convenience: the edge list of a level as (src, dst, kind) triples.
pub fn level_edges(level: &Level) -> Vec<Edge> {
    level.graph.edges().cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use std::collections::BTreeSet;

    fn level_sets(seq: &DerivedSequence, k: usize) -> Vec<Vec<u32>> {
        seq.levels[k]
            .partition
            .intervals
            .iter()
            .map(|iv| iv.member_set().iter().map(|n| n.0).collect())
            .collect()
    }

    #[test]
    fn nested_loop_derives_through_four_levels() {
        let g = fixtures::nested_loop_cfg();
        let seq = derive(&g).unwrap();
        assert_eq!(seq.order(), 4);
        assert_eq!(seq.terminal, Terminal::SingleNode);
        assert_eq!(
            level_sets(&seq, 0),
            vec![vec![1], vec![2], vec![3, 4, 5, 6], vec![7]]
        );
        assert_eq!(level_sets(&seq, 1), vec![vec![1], vec![2, 7, 8]]);
        assert_eq!(level_sets(&seq, 2), vec![vec![1, 9]]);
        assert_eq!(level_sets(&seq, 3), vec![vec![10]]);

        let l2: BTreeSet<u32> = seq.levels[1].graph.nodes().map(|n| n.0).collect();
        assert_eq!(l2, BTreeSet::from([1, 2, 7, 8]));
        assert_eq!(seq.levels[1].graph.entry_node(), Some(NodeId(1)));
        seq.validate().unwrap();
    }

    #[test]
    fn single_node_terminates_immediately() {
        let seq = derive(&fixtures::singleton()).unwrap();
        assert_eq!(seq.order(), 1);
        assert_eq!(seq.terminal, Terminal::SingleNode);
    }

    #[test]
    fn two_entry_loop_is_irreducible() {
        let seq = derive(&fixtures::two_entry_loop()).unwrap();
        assert_eq!(seq.terminal, Terminal::Irreducible);
        assert_eq!(seq.order(), 1);
        assert!(seq.last().partition.is_identity());
    }

    #[test]
    fn node_counts_strictly_decrease() {
        let seq = derive(&fixtures::nested_loop_cfg()).unwrap();
        for w in seq.levels.windows(2) {
            assert!(w[1].graph.node_count() < w[0].graph.node_count());
        }
    }

    #[test]
    fn provenance_resolves_created_nodes() {
        let g = fixtures::nested_loop_cfg();
        let seq = derive(&g).unwrap();
        let iv = seq.interval_behind(0, NodeId(8)).unwrap();
        assert_eq!(
            iv.member_set(),
            BTreeSet::from([NodeId(3), NodeId(4), NodeId(5), NodeId(6)])
        );
    }

    #[test]
    fn dedup_counter_fires_on_parallel_exits() {
        // the loop {2,3} exits twice to node 4, which stays outside the
        // interval thanks to its extra predecessor 1
        let g = Graph::from_cf_edges(
            [1, 2, 3, 4],
            [(1, 2), (2, 3), (3, 2), (2, 4), (3, 4), (1, 4)],
            Some(1),
        )
        .unwrap();
        let seq = derive(&g).unwrap();
        assert_eq!(
            seq.levels[0].partition.member_sets(),
            vec![
                BTreeSet::from([NodeId(1)]),
                BTreeSet::from([NodeId(2), NodeId(3)]),
                BTreeSet::from([NodeId(4)]),
            ]
        );
        assert_eq!(seq.total_dedup_events(), 1);
    }

    #[test]
    fn data_edges_ride_along_and_vanish_when_merged() {
        use crate::EdgeKind;
        let mut b = crate::GraphBuilder::new();
        for n in 1..=4 {
            b.add_node(n);
        }
        b.entry(1);
        for (s, d) in [(1, 2), (2, 3), (3, 2), (2, 4), (1, 4)] {
            b.add_edge(s, d, EdgeKind::ControlFlow).unwrap();
        }
        // one data edge inside the future loop interval, one crossing out
        b.add_edge(2, 3, EdgeKind::DataDependency).unwrap();
        b.add_edge(3, 4, EdgeKind::DataDependency).unwrap();
        let g = b.build().unwrap();
        let seq = derive(&g).unwrap();
        // level 1: {1}, {2,3}->5, {4}; the 2->3 data edge merged away, the
        // 3->4 data edge now runs 5->4
        let l1 = &seq.levels[1].graph;
        assert_eq!(l1.edge_count(&EdgeKind::DataDependency), 1);
        assert!(l1.has_edge(NodeId(5), NodeId(4), &EdgeKind::DataDependency));
    }
}
