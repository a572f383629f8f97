//! Graphviz DOT rendering of a concept tree.

use std::fmt::Write as _;

use crate::stats::{AttrStats, ConceptStats};
use crate::tree::ConceptTree;

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// The three most frequent attribute values of a concept. Numeric attributes
/// show their mean; ties break by attribute name.
pub fn top_values(stats: &ConceptStats, k: usize) -> Vec<String> {
    let mut entries: Vec<(u64, String)> = Vec::new();
    for (name, attr) in stats.attributes() {
        match attr {
            AttrStats::Nominal(table) => {
                for (token, &c) in table {
                    entries.push((c, format!("{name}={token}")));
                }
            }
            AttrStats::Numeric(s) => entries.push((s.n, format!("{name}={:.3}", s.mean))),
        }
    }
    entries.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    entries.into_iter().take(k).map(|(_, s)| s).collect()
}

pub fn to_dot(tree: &ConceptTree) -> String {
    let mut out = String::from("digraph concepts {\n  node [shape=box];\n");
    for node in tree.nodes() {
        let mut label = format!("{}\\ncount={}", node.id, node.count());
        for line in top_values(&node.stats, 3) {
            label.push_str("\\n");
            label.push_str(&escape(&line));
        }
        writeln!(out, "  \"{}\" [label=\"{}\"];", node.id, label).unwrap();
    }
    for node in tree.nodes() {
        for child in &node.children {
            writeln!(out, "  \"{}\" -> \"{}\";", node.id, child).unwrap();
        }
    }
    out.push_str("}\n");
    out
}
