//! Interval partitioning of control flow graphs.
//!
//! An interval I(h) is the maximal single-entry subgraph headed by h in which
//! every closed path passes through h. The worklist algorithm below grows an
//! interval by absorbing nodes whose control-flow predecessors all lie inside
//! it, then schedules as new headers the nodes that are reached from the
//! finished interval but not absorbed by it.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::graph::{EdgeKind, Graph, NodeId};
use crate::Error;

/// One interval: the header plus its members in absorption order (header
/// first).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub header: NodeId,
    pub members: Vec<NodeId>,
}

impl Interval {
    pub fn singleton(h: NodeId) -> Self {
        Interval {
            header: h,
            members: vec![h],
        }
    }

    pub fn is_singleton(&self) -> bool {
        self.members.len() == 1
    }

    pub fn member_set(&self) -> BTreeSet<NodeId> {
        self.members.iter().copied().collect()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.members.contains(&v)
    }
}

/// A disjoint cover of all graph nodes by intervals, in header discovery
/// order. The entry node always heads the first interval.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalPartition {
    pub intervals: Vec<Interval>,
    pub node_to_interval: BTreeMap<NodeId, usize>,
}

impl IntervalPartition {
    pub fn interval_of(&self, v: NodeId) -> Option<&Interval> {
        self.node_to_interval.get(&v).map(|i| &self.intervals[*i])
    }

    /// True when every interval is a single node.
    pub fn is_identity(&self) -> bool {
        self.intervals.iter().all(Interval::is_singleton)
    }

    /// Member sets in interval order, for compact assertions.
    pub fn member_sets(&self) -> Vec<BTreeSet<NodeId>> {
        self.intervals.iter().map(Interval::member_set).collect()
    }
}

// Control-flow predecessors with self-loops dropped.
fn cf_preds(g: &Graph, v: NodeId) -> BTreeSet<NodeId> {
    let mut p = g
        .predecessors(v, &EdgeKind::ControlFlow)
        .unwrap_or_default();
    p.remove(&v);
    p
}

/// Partition `g` into intervals.
///
/// Requires an entry node from which every node is reachable along directed
/// control flow. Both the header worklist and candidate absorption proceed in
/// ascending node order, so the result is deterministic.
pub fn partition(g: &Graph) -> Result<IntervalPartition, Error> {
    let entry = g.entry_node().ok_or(Error::MissingEntry)?;
    let reachable = g.reachable_from_entry()?;
    for v in g.nodes() {
        if !reachable.contains(&v) {
            return Err(Error::UnreachableNode(v));
        }
    }

    let mut intervals: Vec<Interval> = Vec::new();
    let mut node_to_interval: BTreeMap<NodeId, usize> = BTreeMap::new();
    let mut headers: BTreeSet<NodeId> = BTreeSet::from([entry]);

    while let Some(h) = headers.pop_first() {
        if node_to_interval.contains_key(&h) {
            continue;
        }
        let idx = intervals.len();
        let mut members = vec![h];
        let mut member_set = BTreeSet::from([h]);

        // Absorb, smallest id first, any unassigned node all of whose
        // predecessors already sit inside the growing interval.
        loop {
            let candidate = g.nodes().find(|v| {
                !member_set.contains(v)
                    && !node_to_interval.contains_key(v)
                    && {
                        let preds = cf_preds(g, *v);
                        !preds.is_empty() && preds.is_subset(&member_set)
                    }
            });
            match candidate {
                Some(v) => {
                    members.push(v);
                    member_set.insert(v);
                }
                None => break,
            }
        }

        // Schedule as future headers the unassigned nodes with one
        // predecessor inside the finished interval and another outside.
        for v in g.nodes() {
            if node_to_interval.contains_key(&v) || member_set.contains(&v) {
                continue;
            }
            let preds = cf_preds(g, v);
            let inside = preds.iter().any(|p| member_set.contains(p));
            let outside = preds.iter().any(|p| !member_set.contains(p));
            if inside && outside {
                headers.insert(v);
            }
        }

        for v in &members {
            node_to_interval.insert(*v, idx);
        }
        intervals.push(Interval { header: h, members });
    }

    debug_assert_eq!(node_to_interval.len(), g.node_count());
    Ok(IntervalPartition {
        intervals,
        node_to_interval,
    })
}

/// A way an alleged interval fails to be one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntervalViolation {
    HeaderNotMember { header: NodeId },
    UnknownNode { node: NodeId },
    DuplicateMember { node: NodeId },
    /// Control flow enters a non-header member from outside the interval.
    ExternalEntry { node: NodeId, from: NodeId },
    /// A closed control-flow path stays inside the members without touching
    /// the header.
    ClosedPathAvoidsHeader { cycle: Vec<NodeId> },
}

/// Check the single-entry and closed-path conditions for `iv` against `g`.
/// Empty result means the interval is well formed.
pub fn check_interval(g: &Graph, iv: &Interval) -> Vec<IntervalViolation> {
    let mut violations = Vec::new();
    let mut seen = BTreeSet::new();
    for v in &iv.members {
        if !g.contains(*v) {
            violations.push(IntervalViolation::UnknownNode { node: *v });
        }
        if !seen.insert(*v) {
            violations.push(IntervalViolation::DuplicateMember { node: *v });
        }
    }
    if !seen.contains(&iv.header) {
        violations.push(IntervalViolation::HeaderNotMember { header: iv.header });
    }
    if !violations.is_empty() {
        return violations;
    }
    let member_set = iv.member_set();

    for v in &iv.members {
        if *v == iv.header {
            continue;
        }
        for from in cf_preds(g, *v) {
            if !member_set.contains(&from) {
                violations.push(IntervalViolation::ExternalEntry { node: *v, from });
            }
        }
    }

    // Any cycle in the subgraph induced on members minus the header is a
    // closed path avoiding it.
    let mut interior = member_set.clone();
    interior.remove(&iv.header);
    if let Some(cycle) = find_cycle(g, &interior) {
        violations.push(IntervalViolation::ClosedPathAvoidsHeader { cycle });
    }
    violations
}

// DFS cycle detection over the control-flow subgraph induced on `nodes`,
// returning one witness cycle. Self-loops are ignored.
fn find_cycle(g: &Graph, nodes: &BTreeSet<NodeId>) -> Option<Vec<NodeId>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Color {
        White,
        Grey,
        Black,
    }
    let mut color: BTreeMap<NodeId, Color> = nodes.iter().map(|n| (*n, Color::White)).collect();
    let mut stack_trace: Vec<NodeId> = Vec::new();

    fn dfs(
        g: &Graph,
        nodes: &BTreeSet<NodeId>,
        v: NodeId,
        color: &mut BTreeMap<NodeId, Color>,
        trace: &mut Vec<NodeId>,
    ) -> Option<Vec<NodeId>> {
        color.insert(v, Color::Grey);
        trace.push(v);
        let succs = g.successors(v, &EdgeKind::ControlFlow).unwrap_or_default();
        for s in succs {
            if s == v || !nodes.contains(&s) {
                continue;
            }
            match color[&s] {
                Color::Grey => {
                    let start = trace.iter().position(|n| *n == s).unwrap();
                    let mut cycle = trace[start..].to_vec();
                    cycle.push(s);
                    return Some(cycle);
                }
                Color::White => {
                    if let Some(c) = dfs(g, nodes, s, color, trace) {
                        return Some(c);
                    }
                }
                Color::Black => {}
            }
        }
        trace.pop();
        color.insert(v, Color::Black);
        None
    }

    for v in nodes {
        if color[v] == Color::White {
            if let Some(c) = dfs(g, nodes, *v, &mut color, &mut stack_trace) {
                return Some(c);
            }
        }
    }
    None
}
