//! Exact set-based simulation of synchronous message passing.
//!
//! Every node carries a reach set that starts as itself and, each round,
//! absorbs the sets of its neighbors in both directions. A round costs one
//! message per stored control-flow edge. The interval-based variant runs the
//! same update confined to intervals, ascending the derived hierarchy and
//! descending back, which lets its ledger be checked against a closed form
//! computed purely from interval diameters and edge counts.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::derived::{interval_diameter, interval_edge_count, DerivedSequence, Terminal};
use crate::graph::{EdgeKind, Graph, Mode, NodeId};
use crate::intervals::Interval;
use crate::Error;

/// Reach sets at the end of a run, plus the number of rounds that changed
/// anything.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReachSets {
    pub sigma: BTreeMap<NodeId, BTreeSet<NodeId>>,
    pub round: u32,
}

/// Message counts attributed to one propagation pass.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub level: usize,
    /// Interval index within the level, or `None` for a whole-graph pass at
    /// an irreducible top level.
    pub interval: Option<usize>,
    pub messages: u64,
}

/// Per-round and per-pass message accounting for a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct MessageLedger {
    pub per_round: Vec<u64>,
    pub total: u64,
    pub breakdown: Vec<LedgerEntry>,
}

impl MessageLedger {
    fn push_pass(&mut self, level: usize, interval: Option<usize>, rounds: u32, per_round: u64) {
        let messages = rounds as u64 * per_round;
        for _ in 0..rounds {
            self.per_round.push(per_round);
        }
        self.total += messages;
        self.breakdown.push(LedgerEntry {
            level,
            interval,
            messages,
        });
    }
}

// One synchronous update restricted to `edges` (bidirectional neighborhoods,
// reflexive accumulation). Returns whether anything changed.
fn step(
    sigma: &mut BTreeMap<NodeId, BTreeSet<NodeId>>,
    neighbors: &BTreeMap<NodeId, Vec<NodeId>>,
) -> bool {
    let mut next = sigma.clone();
    let mut changed = false;
    for (v, ns) in neighbors {
        let target = next.get_mut(v).expect("sigma covers all nodes");
        for u in ns {
            for x in &sigma[u] {
                if target.insert(*x) {
                    changed = true;
                }
            }
        }
    }
    *sigma = next;
    changed
}

fn symmetric_adjacency(
    nodes: &BTreeSet<NodeId>,
    edges: &[(NodeId, NodeId)],
) -> BTreeMap<NodeId, Vec<NodeId>> {
    let mut adj: BTreeMap<NodeId, BTreeSet<NodeId>> =
        nodes.iter().map(|n| (*n, BTreeSet::new())).collect();
    for (s, d) in edges {
        if s == d {
            continue;
        }
        adj.get_mut(s).unwrap().insert(*d);
        adj.get_mut(d).unwrap().insert(*s);
    }
    adj.into_iter()
        .map(|(n, s)| (n, s.into_iter().collect()))
        .collect()
}

fn cf_edge_list(g: &Graph) -> Vec<(NodeId, NodeId)> {
    g.edges()
        .filter(|e| e.kind == EdgeKind::ControlFlow)
        .map(|e| (e.src, e.dst))
        .collect()
}

// Run to the local fixed point over the given edge set; every round costs
// one message per edge. Returns the number of effective rounds.
fn run_over_edges(
    sigma: &mut BTreeMap<NodeId, BTreeSet<NodeId>>,
    nodes: &BTreeSet<NodeId>,
    edges: &[(NodeId, NodeId)],
) -> u32 {
    if edges.is_empty() {
        return 0;
    }
    let neighbors = symmetric_adjacency(nodes, edges);
    let mut rounds = 0;
    while step(sigma, &neighbors) {
        rounds += 1;
    }
    rounds
}

/// Synchronous message passing over the whole graph until no reach set
/// changes. Errors on graphs that are not weakly connected, where the fixed
/// point would never cover all nodes.
pub fn run_to_fixed_point(g: &Graph) -> Result<(ReachSets, MessageLedger), Error> {
    let (reach, ledger, _) = run_with_arrivals(g)?;
    Ok((reach, ledger))
}

/// Like [`run_to_fixed_point`], also reporting for every ordered pair (u, v)
/// the first round at which u appeared in v's reach set.
pub fn run_with_arrivals(
    g: &Graph,
) -> Result<(ReachSets, MessageLedger, BTreeMap<(NodeId, NodeId), u32>), Error> {
    if !g.is_weakly_connected() {
        return Err(Error::NotConnected);
    }
    let nodes: BTreeSet<NodeId> = g.nodes().collect();
    let edges = cf_edge_list(g);
    let per_round = edges.len() as u64;
    let neighbors = symmetric_adjacency(&nodes, &edges);

    let mut sigma: BTreeMap<NodeId, BTreeSet<NodeId>> =
        nodes.iter().map(|n| (*n, BTreeSet::from([*n]))).collect();
    let mut arrivals: BTreeMap<(NodeId, NodeId), u32> = nodes
        .iter()
        .map(|n| ((*n, *n), 0))
        .collect::<BTreeMap<_, _>>();

    let mut ledger = MessageLedger::default();
    let mut round = 0;
    loop {
        if !step(&mut sigma, &neighbors) {
            break;
        }
        round += 1;
        ledger.per_round.push(per_round);
        ledger.total += per_round;
        for (v, set) in &sigma {
            for u in set {
                arrivals.entry((*u, *v)).or_insert(round);
            }
        }
    }
    ledger.breakdown.push(LedgerEntry {
        level: 0,
        interval: None,
        messages: ledger.total,
    });
    Ok((ReachSets { sigma, round }, ledger, arrivals))
}

fn interval_cf_edges(g: &Graph, iv: &Interval) -> Vec<(NodeId, NodeId)> {
    let members = iv.member_set();
    g.edges()
        .filter(|e| {
            e.kind == EdgeKind::ControlFlow
                && members.contains(&e.src)
                && members.contains(&e.dst)
        })
        .map(|e| (e.src, e.dst))
        .collect()
}

/// Interval-confined propagation over the whole derived hierarchy.
///
/// Ascending, each level runs every interval to its local fixed point and
/// then merges reach sets into the next level's nodes. The topmost pass that
/// actually moves messages — the single covering interval below a single-node
/// terminal, or a whole-graph pass on an irreducible terminal — happens once.
/// Descending, split nodes restart from singleton sets and every lower level
/// runs its intervals to the local fixed point again.
pub fn run_ibpm_to_fixed_point(seq: &DerivedSequence) -> Result<MessageLedger, Error> {
    seq.validate()?;
    let mut ledger = MessageLedger::default();
    let last = seq.levels.len() - 1;

    let fresh = |level: usize| -> BTreeMap<NodeId, BTreeSet<NodeId>> {
        seq.levels[level]
            .graph
            .nodes()
            .map(|n| (n, BTreeSet::from([n])))
            .collect()
    };

    let run_level = |level: usize,
                     sigma: &mut BTreeMap<NodeId, BTreeSet<NodeId>>,
                     ledger: &mut MessageLedger| {
        let lvl = &seq.levels[level];
        for (i, iv) in lvl.partition.intervals.iter().enumerate() {
            if iv.is_singleton() {
                ledger.push_pass(level, Some(i), 0, 0);
                continue;
            }
            let members = iv.member_set();
            let edges = interval_cf_edges(&lvl.graph, iv);
            let per_round = edges.len() as u64;
            let mut local: BTreeMap<NodeId, BTreeSet<NodeId>> = members
                .iter()
                .map(|m| (*m, sigma.remove(m).expect("member present")))
                .collect();
            let rounds = run_over_edges(&mut local, &members, &edges);
            ledger.push_pass(level, Some(i), rounds, per_round);
            sigma.extend(local);
        }
    };

    // ascent
    let mut sigma = fresh(0);
    for level in 0..last {
        run_level(level, &mut sigma, &mut ledger);
        // merge: the new node's set is the union over the interval it covers
        let mut upper = BTreeMap::new();
        for (node, idx) in &seq.provenance[level] {
            let iv = &seq.levels[level].partition.intervals[*idx];
            let mut merged = BTreeSet::new();
            for m in &iv.members {
                merged.extend(sigma[m].iter().copied());
            }
            upper.insert(*node, merged);
        }
        sigma = upper;
    }

    match seq.terminal {
        Terminal::SingleNode => {
            // The ascent pass at `last - 1` already covered the whole graph
            // through its single interval; the descent re-runs only the
            // levels below it, each restarting from singleton sets.
            for level in (0..last.saturating_sub(1)).rev() {
                let mut s = fresh(level);
                run_level(level, &mut s, &mut ledger);
            }
        }
        Terminal::Irreducible => {
            // whole-graph pass at the top, once
            let top = &seq.levels[last];
            let nodes: BTreeSet<NodeId> = top.graph.nodes().collect();
            let edges = cf_edge_list(&top.graph);
            let per_round = edges.len() as u64;
            let rounds = run_over_edges(&mut sigma, &nodes, &edges);
            ledger.push_pass(last, None, rounds, per_round);
            for level in (0..last).rev() {
                let mut s = fresh(level);
                run_level(level, &mut s, &mut ledger);
            }
        }
    }
    Ok(ledger)
}

/// Closed-form message total for interval-confined propagation, evaluated
/// from interval diameters and induced edge counts alone.
pub fn ibpm_closed_form(seq: &DerivedSequence) -> Result<u64, Error> {
    seq.validate()?;
    let last = seq.levels.len() - 1;
    let per_interval_sum = |level: usize| -> Result<u64, Error> {
        let lvl = &seq.levels[level];
        let mut sum = 0u64;
        for iv in &lvl.partition.intervals {
            let pi = interval_diameter(&lvl.graph, iv)? as u64;
            let edges = interval_edge_count(&lvl.graph, iv, &EdgeKind::ControlFlow) as u64;
            sum += pi * edges;
        }
        Ok(sum)
    };

    match seq.terminal {
        Terminal::SingleNode => {
            if last == 0 {
                return Ok(0);
            }
            let mut total = 0;
            for level in 0..last - 1 {
                total += 2 * per_interval_sum(level)?;
            }
            let top = &seq.levels[last - 1].graph;
            total += top.diameter(Mode::Symmetrized)? as u64
                * top.edge_count(&EdgeKind::ControlFlow) as u64;
            Ok(total)
        }
        Terminal::Irreducible => {
            let mut total = 0;
            for level in 0..last {
                total += 2 * per_interval_sum(level)?;
            }
            let top = &seq.levels[last].graph;
            total += top.diameter(Mode::Symmetrized)? as u64
                * top.edge_count(&EdgeKind::ControlFlow) as u64;
            Ok(total)
        }
    }
}

/// The 2·τ·|E| scalability ceiling, where τ is the largest interval diameter
/// anywhere in the hierarchy and |E| counts the first-order control-flow
/// edges. Returns the bound and whether the simulated total stays within it.
pub fn ibpm_bound(seq: &DerivedSequence) -> Result<(u64, bool), Error> {
    let tau = seq.max_interval_diameter()? as u64;
    let edges = seq.first().graph.edge_count(&EdgeKind::ControlFlow) as u64;
    let bound = 2 * tau * edges;
    let total = run_ibpm_to_fixed_point(seq)?.total;
    Ok((bound, total <= bound))
}
