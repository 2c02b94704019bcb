use std::fmt::Write;

use super::alpha::AlphaNet;
use super::dfg::DirectlyFollowsGraph;

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

pub fn dfg_to_dot(g: &DirectlyFollowsGraph) -> String {
    let mut out = String::from("digraph dfg {\n  rankdir=LR;\n");
    for a in &g.activities {
        let _ = writeln!(out, "  {} [shape=box];", quote(a));
    }
    for ((a, b), n) in &g.edges {
        let _ = writeln!(out, "  {} -> {} [label=\"{n}\"];", quote(a), quote(b));
    }
    out.push_str("}\n");
    out
}

pub fn alpha_to_dot(net: &AlphaNet) -> String {
    let mut out = String::from("digraph alpha {\n  rankdir=LR;\n");
    for t in &net.transitions {
        let _ = writeln!(out, "  {} [shape=box];", quote(t));
    }
    let _ = writeln!(out, "  p_source [shape=circle, label=\"\"];");
    let _ = writeln!(out, "  p_sink [shape=doublecircle, label=\"\"];");
    for i in 0..net.places.len() {
        let _ = writeln!(out, "  p{i} [shape=circle, label=\"\"];");
    }
    for t in &net.source_outputs {
        let _ = writeln!(out, "  p_source -> {};", quote(t));
    }
    for (i, p) in net.places.iter().enumerate() {
        for a in &p.inputs {
            let _ = writeln!(out, "  {} -> p{i};", quote(a));
        }
        for b in &p.outputs {
            let _ = writeln!(out, "  p{i} -> {};", quote(b));
        }
    }
    for t in &net.sink_inputs {
        let _ = writeln!(out, "  {} -> p_sink;", quote(t));
    }
    out.push_str("}\n");
    out
}
