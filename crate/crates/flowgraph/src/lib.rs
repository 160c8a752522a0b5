//! Control flow graphs, interval partitioning, derived-graph hierarchies,
//! and exact simulation of synchronous message passing over them.

pub mod derived;
pub mod dot;
pub mod fixtures;
pub mod graph;
pub mod intervals;
pub mod json;
pub mod propagation;
pub mod randgen;

pub use derived::{derive, DerivedSequence, Level, Terminal};
pub use graph::{Edge, EdgeKind, Graph, GraphBuilder, Mode, NodeId};
pub use intervals::{check_interval, partition, Interval, IntervalPartition, IntervalViolation};
pub use propagation::{
    ibpm_bound, ibpm_closed_form, run_ibpm_to_fixed_point, run_to_fixed_point, run_with_arrivals,
    LedgerEntry, MessageLedger, ReachSets,
};

use thiserror::Error as ThisError;

#[derive(Debug, Clone, PartialEq, Eq, ThisError)]
pub enum Error {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("graph has no entry node")]
    MissingEntry,
    #[error("node {0} is not reachable from the entry over control flow")]
    UnreachableNode(NodeId),
    #[error("diameter undefined: {to} is unreachable from {from}")]
    DiameterUndefined { from: NodeId, to: NodeId },
    #[error("graph is not weakly connected")]
    NotConnected,
    #[error("invalid derived sequence: {0}")]
    InvalidSequence(String),
    #[error("format error: {0}")]
    Format(String),
}
