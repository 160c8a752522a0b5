//! DOT export for visual inspection. Debug aid only; there is no parser.

use std::fmt::Write as _;

use crate::graph::{EdgeKind, Graph};

pub fn to_dot(g: &Graph, name: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph {name} {{");
    for n in g.nodes() {
        if Some(n) == g.entry_node() {
            let _ = writeln!(out, "  n{n} [label=\"{n}\", shape=doublecircle];");
        } else {
            let _ = writeln!(out, "  n{n} [label=\"{n}\"];");
        }
    }
    for e in g.edges() {
        let style = match e.kind {
            EdgeKind::ControlFlow => "",
            EdgeKind::DataDependency => " [style=dashed, color=blue]",
            EdgeKind::Call => " [style=dotted, color=red]",
            EdgeKind::Ext(_) => " [style=dotted]",
        };
        let _ = writeln!(out, "  n{} -> n{}{};", e.src, e.dst, style);
    }
    out.push_str("}\n");
    out
}
