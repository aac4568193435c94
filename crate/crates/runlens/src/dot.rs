//! Graphviz export of a merged structure graph.

use std::fmt::Write;

use runlens_core::structure::MergedGraph;

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Nodes are labelled with their primitive and occurrence count; edges carry
/// the number of candidates that share them.
pub fn to_dot(g: &MergedGraph, name: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph \"{}\" {{", escape(name));
    out.push_str("  rankdir=LR;\n  node [shape=box];\n");
    let layers = g.layers();
    for n in &g.nodes {
        let _ = writeln!(
            out,
            "  n{} [label=\"{}\\n{}\", layer={}];",
            n.id,
            escape(&n.primitive),
            n.occurrences(),
            layers[n.id]
        );
    }
    for e in &g.edges {
        let mut attrs = format!("label=\"{}\"", e.candidates.len());
        if let Some(cols) = &e.columns {
            let _ = write!(attrs, ", columns=\"{}\"", escape(&cols.join(",")));
        }
        let _ = writeln!(out, "  n{} -> n{} [{}];", e.from, e.to, attrs);
    }
    out.push_str("}\n");
    out
}
