use std::fmt::Write;

use crate::expr::format_number;
use crate::model::{BondGraph, Parameter};

/// Canonical text of a graph. Item groups are written in a fixed order
/// (signals, decisions, elements, junctions, bonds, probes), each in
/// declaration order, so parsing the output yields an equal graph.
pub fn serialize_model(g: &BondGraph) -> String {
    let mut out = String::new();
    // writing to a String cannot fail
    let _ = write_model(&mut out, g);
    out
}

fn write_model(out: &mut String, g: &BondGraph) -> std::fmt::Result {
    writeln!(out, "bondgraph {} {{", g.name)?;
    for s in &g.signals {
        let points: Vec<String> = s
            .breakpoints
            .iter()
            .map(|(t, v)| format!("{}: {}", format_number(*t), format_number(*v)))
            .collect();
        writeln!(out, "  signal {} = piecewise({})", s.name, points.join(", "))?;
    }
    for d in &g.decisions {
        writeln!(out, "  decision {} = {}", d.name, d.guard)?;
    }
    for e in &g.elements {
        let value = match &e.parameter {
            Parameter::Constant(v) => format_number(*v),
            Parameter::Signal(s) => format!("signal({s})"),
            Parameter::Modulation(m) => m.to_string(),
        };
        writeln!(out, "  element {} {} {{ value = {value} }}", e.kind, e.name)?;
    }
    for j in &g.junctions {
        write!(out, "  junction {} {}", j.kind.symbol(), j.name)?;
        if let (true, Some(c)) = (j.switched, &j.cspec) {
            write!(
                out,
                " switched {{ on_guard = {}; off_guard = {}; init = {} }}",
                c.on_guard,
                c.off_guard,
                c.initial_state.keyword()
            )?;
        }
        out.push('\n');
    }
    for b in &g.bonds {
        writeln!(out, "  bond {} from {} to {}", b.name, b.from, b.to)?;
    }
    for p in &g.probes {
        let var = p.var.to_string();
        if p.label == var {
            writeln!(out, "  probe {var}")?;
        } else {
            writeln!(out, "  probe {} = {var}", p.label)?;
        }
    }
    out.push_str("}\n");
    Ok(())
}
