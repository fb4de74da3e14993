use std::fmt::Write;

use super::{BlockDiagram, BlockKind};
use crate::causality::{BondEnd, CausalAssignment};
use crate::expr::format_number;
use crate::model::BondGraph;

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn block_label(kind: &BlockKind) -> String {
    match kind {
        BlockKind::Integrator { gain, .. } => format!("1/s x {}", format_number(*gain)),
        BlockKind::Gain { k } => format!("x {}", format_number(*k)),
        BlockKind::Sum { signs } => signs.iter().map(|s| if *s < 0.0 { "-" } else { "+" }).collect(),
        BlockKind::Constant { value } => format_number(*value),
        BlockKind::SignalSource { signal } => format!("signal {signal}"),
        BlockKind::Clock => "t".into(),
        BlockKind::Arith { op } => op.symbol().into(),
        BlockKind::Switch { junction, .. } => format!("switch {junction}"),
        BlockKind::Probe { label } => format!("probe {label}"),
    }
}

/// Graphviz text for a block diagram, one node per block.
pub fn emit_dot(d: &BlockDiagram) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph {} {{", quote(&format!("{}_ibd", d.graph.name)));
    out.push_str("  rankdir=LR;\n  node [shape=box];\n");
    for (i, b) in d.blocks.iter().enumerate() {
        let label = format!("{}\\n{}: {}", b.name, b.kind.type_name(), block_label(&b.kind));
        let _ = writeln!(out, "  n{i} [label={}];", quote(&label));
    }
    for w in d.wires() {
        let _ = writeln!(out, "  n{} -> n{} [label=\"{}\"];", w.from, w.to, w.port);
    }
    out.push_str("}\n");
    out
}

/// Graphviz text for a bond graph. With a causal assignment, each bond's
/// tail is labelled `|` at the end that imposes flow, the usual causal
/// stroke placement.
pub fn emit_graph_dot(g: &BondGraph, causality: Option<&CausalAssignment>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph {} {{", quote(&g.name));
    for e in &g.elements {
        let _ = writeln!(
            out,
            "  {} [shape=box, label={}];",
            quote(&e.name),
            quote(&format!("{}: {}", e.kind, e.name))
        );
    }
    for j in &g.junctions {
        let shape = if j.switched { "doublecircle" } else { "circle" };
        let _ = writeln!(
            out,
            "  {} [shape={shape}, label={}];",
            quote(&j.name),
            quote(&format!("{}: {}", j.kind.symbol(), j.name))
        );
    }
    for (i, b) in g.bonds.iter().enumerate() {
        let stroke = match causality.and_then(|c| c.bonds.get(i).copied().flatten()) {
            Some(BondEnd::From) => ", headlabel=\"|\"",
            Some(BondEnd::To) => ", taillabel=\"|\"",
            None => "",
        };
        let _ = writeln!(
            out,
            "  {} -> {} [label={}, arrowhead=lhalf{stroke}];",
            quote(&b.from),
            quote(&b.to),
            quote(&b.name)
        );
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_model;
    use crate::ibd::compile;

    #[test]
    fn dot_lists_every_block_and_bond() {
        let g = parse_model(
            "bondgraph t {
  element Sf Sf1 { value = 1.0 }
  element C C1 { value = 1.0 }
  junction 0 j
  bond b1 from Sf1 to j
  bond b2 from j to C1
}",
        )
        .unwrap();
        let d = compile(&g).unwrap();
        let dot = emit_dot(&d);
        assert!(dot.starts_with("digraph \"t_ibd\" {"));
        assert_eq!(dot.matches("[label=\"").count(), d.blocks.len() + d.wires().len());
        let gd = emit_graph_dot(&g, Some(&d.causality));
        assert!(gd.contains("\"Sf1\" -> \"j\" [label=\"b1\""));
        assert_eq!(gd, emit_graph_dot(&g, Some(&d.causality)));
    }
}
