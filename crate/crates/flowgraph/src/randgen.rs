//! Seed-driven random graph generators for the theorem suites.

use rand::Rng;

use crate::derived::{derive, Terminal};
use crate::graph::{EdgeKind, Graph, GraphBuilder, NodeId};

// Growing CFG under construction: sequential node ids, control-flow edges.
struct CfgSketch {
    next: u32,
    edges: Vec<(u32, u32)>,
}

impl CfgSketch {
    fn node(&mut self) -> u32 {
        let id = self.next;
        self.next += 1;
        id
    }
    fn edge(&mut self, s: u32, d: u32) {
        self.edges.push((s, d));
    }
}

// Emit a structured region starting at `preds`, spending at most `budget`
// nodes; returns the dangling exits. Only sequences, branches, and loops are
// produced, so the result is always reducible.
fn grow(rng: &mut impl Rng, sk: &mut CfgSketch, preds: Vec<u32>, budget: &mut usize) -> Vec<u32> {
    let mut cur = preds;
    while *budget > 0 {
        match rng.random_range(0..6u32) {
            // plain statement
            0..=2 => {
                let n = sk.node();
                *budget -= 1;
                for p in &cur {
                    sk.edge(*p, n);
                }
                cur = vec![n];
            }
            // branch
            3..=4 if *budget >= 3 => {
                let c = sk.node();
                *budget -= 1;
                for p in &cur {
                    sk.edge(*p, c);
                }
                let then_budget = rng.random_range(1..=(*budget / 2).max(1)).min(*budget);
                let mut tb = then_budget;
                let then_exits = grow(rng, sk, vec![c], &mut tb);
                *budget -= then_budget - tb;
                let mut exits = then_exits;
                if *budget >= 1 && rng.random_bool(0.5) {
                    let else_budget = rng.random_range(1..=(*budget / 2).max(1)).min(*budget);
                    let mut eb = else_budget;
                    let else_exits = grow(rng, sk, vec![c], &mut eb);
                    *budget -= else_budget - eb;
                    exits.extend(else_exits);
                } else {
                    exits.push(c);
                }
                cur = exits;
            }
            // loop
            _ if *budget >= 2 => {
                let c = sk.node();
                *budget -= 1;
                for p in &cur {
                    sk.edge(*p, c);
                }
                let body_budget = rng.random_range(1..=(*budget / 2).max(1)).min(*budget);
                let mut bb = body_budget;
                let body_exits = grow(rng, sk, vec![c], &mut bb);
                *budget -= body_budget - bb;
                for e in body_exits {
                    sk.edge(e, c);
                }
                cur = vec![c];
            }
            _ => {
                let n = sk.node();
                *budget -= 1;
                for p in &cur {
                    sk.edge(*p, n);
                }
                cur = vec![n];
            }
        }
        if rng.random_bool(0.12) {
            break;
        }
    }
    cur
}

/// Random structured control flow graph: a composition of sequences,
/// branches, and loops, hence guaranteed reducible. Node count lands in
/// `[min_nodes, max_nodes]`.
pub fn random_reducible_cfg(rng: &mut impl Rng, min_nodes: usize, max_nodes: usize) -> Graph {
    assert!(min_nodes >= 1 && min_nodes <= max_nodes);
    let target = rng.random_range(min_nodes..=max_nodes);
    let mut sk = CfgSketch {
        next: 0,
        edges: Vec::new(),
    };
    let entry = sk.node();
    let mut budget = target - 1;
    let mut cur = vec![entry];
    while budget > 0 {
        cur = grow(rng, &mut sk, cur, &mut budget);
    }
    Graph::from_cf_edges(0..sk.next, sk.edges.iter().copied(), Some(0)).unwrap()
}

/// Random graph whose derivation stops at an irreducible form: a reducible
/// base with a two-entry loop grafted onto it, rejection-sampled until the
/// derived sequence really terminates irreducible.
pub fn random_irreducible_cfg(rng: &mut impl Rng, min_nodes: usize, max_nodes: usize) -> Graph {
    for _ in 0..64 {
        let base = random_reducible_cfg(rng, min_nodes.max(3), max_nodes);
        let n = base.node_count() as u32;
        let a = rng.random_range(1..n);
        let b = rng.random_range(1..n);
        if a == b {
            continue;
        }
        let mut builder = GraphBuilder::new();
        for v in base.nodes() {
            builder.add_node(v);
        }
        builder.entry(base.entry_node().unwrap());
        for e in base.edges() {
            builder.add_edge(e.src, e.dst, e.kind.clone()).unwrap();
        }
        let entry = base.entry_node().unwrap();
        for (s, d) in [
            (entry, NodeId(a)),
            (entry, NodeId(b)),
            (NodeId(a), NodeId(b)),
            (NodeId(b), NodeId(a)),
        ] {
            builder.add_edge(s, d, EdgeKind::ControlFlow).unwrap();
        }
        let g = builder.build().unwrap();
        if let Ok(seq) = derive(&g) {
            if seq.terminal == Terminal::Irreducible {
                return g;
            }
        }
    }
    // two-entry loop with a tail; always irreducible
    let mut b = GraphBuilder::new();
    for v in 0..4u32 {
        b.add_node(v);
    }
    b.entry(0);
    for (s, d) in [(0, 1), (0, 2), (1, 2), (2, 1), (2, 3)] {
        b.add_edge(s, d, EdgeKind::ControlFlow).unwrap();
    }
    b.build().unwrap()
}

/// Random weakly connected digraph with 2..=max_nodes nodes: a randomly
/// oriented spanning tree plus extra edges. No entry node, no self-loops.
pub fn random_connected_digraph(rng: &mut impl Rng, max_nodes: usize) -> Graph {
    let n = rng.random_range(2..=max_nodes.max(2)) as u32;
    let mut b = GraphBuilder::new();
    for v in 0..n {
        b.add_node(v);
    }
    for v in 1..n {
        let other = rng.random_range(0..v);
        if rng.random_bool(0.5) {
            b.add_edge(other, v, EdgeKind::ControlFlow).unwrap();
        } else {
            b.add_edge(v, other, EdgeKind::ControlFlow).unwrap();
        }
    }
    let extra = rng.random_range(0..=n);
    for _ in 0..extra {
        let s = rng.random_range(0..n);
        let d = rng.random_range(0..n);
        if s != d {
            b.add_edge(s, d, EdgeKind::ControlFlow).unwrap();
        }
    }
    b.build().unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reducible_generator_respects_bounds_and_reduces() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let g = random_reducible_cfg(&mut rng, 3, 60);
            assert!((3..=60).contains(&g.node_count()));
            let seq = derive(&g).unwrap();
            assert_eq!(seq.terminal, Terminal::SingleNode, "graph: {g:?}");
        }
    }

    #[test]
    fn irreducible_generator_terminates_irreducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let g = random_irreducible_cfg(&mut rng, 3, 20);
            let seq = derive(&g).unwrap();
            assert_eq!(seq.terminal, Terminal::Irreducible);
        }
    }

    #[test]
    fn connected_generator_is_weakly_connected() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let g = random_connected_digraph(&mut rng, 12);
            assert!(g.is_weakly_connected());
        }
    }
}
