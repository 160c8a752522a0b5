//! Small reference graphs shared by tests and documentation.

use crate::{Graph, NodeId};

/// A seven-node control flow graph with an inner loop (3-4-5-6) nested in an
/// outer loop (2..7): the shape of a doubly nested search loop. It reduces
/// through four derivation levels, collapsing the inner loop first.
///
/// Nodes 1..=7, edges 1→2, 2→3, 2→7, 3→4, 4→5, 5→6, 6→3, 6→7, 7→2,
/// entry 1.
pub fn nested_loop_cfg() -> Graph {
    Graph::from_cf_edges(
        1..=7,
        [
            (1, 2),
            (2, 3),
            (2, 7),
            (3, 4),
            (4, 5),
            (5, 6),
            (6, 3),
            (6, 7),
            (7, 2),
        ],
        Some(1),
    )
    .unwrap()
}

/// The classic irreducible pattern: a loop with two entries. No interval can
/// absorb either loop node, so derivation stops immediately.
///
/// Nodes: 0 (entry), 1, 2 with edges 0→1, 0→2, 1→2, 2→1.
pub fn two_entry_loop() -> Graph {
    Graph::from_cf_edges([0, 1, 2], [(0, 1), (0, 2), (1, 2), (2, 1)], Some(0)).unwrap()
}

/// Straight-line chain 1→2→...→n with entry 1.
pub fn chain(n: u32) -> Graph {
    assert!(n >= 1);
    Graph::from_cf_edges(1..=n, (1..n).map(|i| (i, i + 1)), Some(1)).unwrap()
}

/// Single node, no edges.
pub fn singleton() -> Graph {
    Graph::from_cf_edges([1], [], Some(1)).unwrap()
}

pub fn node(id: u32) -> NodeId {
    NodeId(id)
}
