//! Graphviz rendering: one cluster per pool, solid sequence flows, dashed
//! message flows.

use std::fmt::Write;

use demo_bpmn_core::bpmn::{BpmnGraph, GatewayKind, NodeKind, TaskKind};

/// Quoted Graphviz identifier.
fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' | '\\' => {
                out.push('\\');
                out.push(c);
            }
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn shape(kind: &NodeKind) -> (&'static str, &'static str) {
    match kind {
        NodeKind::StartEvent { .. } => ("circle", ""),
        NodeKind::IntermediateCatchEvent { .. } => ("doublecircle", ""),
        NodeKind::EndEvent { terminate: false } => ("circle", "bold"),
        NodeKind::EndEvent { terminate: true } => ("doublecircle", "bold"),
        NodeKind::Task {
            kind: TaskKind::Send,
            ..
        } => ("box", "rounded,filled"),
        NodeKind::Task { .. } => ("box", "rounded"),
        NodeKind::Gateway(GatewayKind::Exclusive) => ("diamond", ""),
        NodeKind::Gateway(GatewayKind::EventBased) => ("diamond", "dashed"),
        NodeKind::Gateway(GatewayKind::Parallel) => ("diamond", "bold"),
    }
}

pub fn to_dot(graph: &BpmnGraph) -> String {
    let mut out = String::from("digraph collaboration {\n  rankdir=LR;\n  node [fontsize=10];\n");
    for (i, p) in graph.pools.iter().enumerate() {
        let _ = writeln!(out, "  subgraph cluster_{i} {{");
        let _ = writeln!(
            out,
            "    label={};",
            quote(&format!("{} ({})", p.name, p.id))
        );
        for n in &p.nodes {
            let (shape, style) = shape(&n.kind);
            let label = match (n.name.is_empty(), n.kind.message()) {
                (false, _) => n.name.as_str(),
                (true, Some(m)) => graph.message(m).map_or(m, |msg| msg.name.as_str()),
                (true, None) => "",
            };
            let _ = write!(
                out,
                "    {} [shape={shape}, label={}",
                quote(&n.id),
                quote(label)
            );
            if !style.is_empty() {
                let _ = write!(out, ", style={}", quote(style));
            }
            out.push_str("];\n");
        }
        for f in &p.sequence_flows {
            let _ = write!(out, "    {} -> {}", quote(&f.source), quote(&f.target));
            if let Some(g) = &f.guard {
                let _ = write!(out, " [label={}]", quote(g));
            }
            out.push_str(";\n");
        }
        out.push_str("  }\n");
    }
    for mf in &graph.message_flows {
        let label = graph
            .message(&mf.message)
            .map_or(mf.message.as_str(), |m| m.name.as_str());
        let _ = writeln!(
            out,
            "  {} -> {} [style=dashed, constraint=false, label={}];",
            quote(&mf.source),
            quote(&mf.target),
            quote(label)
        );
    }
    out.push_str("}\n");
    out
}
