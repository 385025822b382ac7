use std::fmt::Write;

use super::value::format_value;
use super::{CircuitSpec, TopologyNode, Waveform};
use crate::device::RateEdgeParams;

fn list(values: impl Iterator<Item = f64>) -> String {
    let items: Vec<String> = values.map(format_value).collect();
    format!("[{}]", items.join(","))
}

fn edges(e: &[RateEdgeParams]) -> (String, String) {
    (list(e.iter().map(|p| p.tau)), list(e.iter().map(|p| p.v_scale)))
}

fn expr(node: &TopologyNode, spec: &CircuitSpec, out: &mut String, parent_parallel: bool) {
    match node {
        TopologyNode::Leaf(name) => {
            out.push_str(name);
            if let Some(inst) = spec.instances.get(name) {
                out.push(':');
                out.push_str(&inst.model);
            }
        }
        TopologyNode::Series(children) => {
            // Series inside parallel, or nested series, needs grouping.
            if parent_parallel {
                out.push('(');
            }
            for (i, c) in children.iter().enumerate() {
                if i > 0 {
                    out.push_str(" + ");
                }
                let nested_series = matches!(c, TopologyNode::Series(_));
                if nested_series {
                    out.push('(');
                }
                expr(c, spec, out, false);
                if nested_series {
                    out.push(')');
                }
            }
            if parent_parallel {
                out.push(')');
            }
        }
        TopologyNode::Parallel(children) => {
            for (i, c) in children.iter().enumerate() {
                if i > 0 {
                    out.push_str(" | ");
                }
                let nested = matches!(c, TopologyNode::Parallel(_));
                if nested {
                    out.push('(');
                }
                expr(c, spec, out, true);
                if nested {
                    out.push(')');
                }
            }
        }
    }
}

/// Canonical `.mn` text for a valid spec.
pub fn format_circuit(spec: &CircuitSpec) -> String {
    let mut out = String::new();
    for (name, m) in &spec.models {
        let (tau_up, v_up) = edges(&m.up_edges);
        let (tau_down, v_down) = edges(&m.down_edges);
        let _ = writeln!(
            out,
            "model {name} states={} R={} tau_up={tau_up} V_up={v_up} tau_down={tau_down} V_down={v_down}",
            m.states(),
            list(m.resistances.iter().copied()),
        );
    }
    for (name, r) in &spec.fixed_resistors {
        let _ = writeln!(out, "res {name} {}", format_value(*r));
    }
    match spec.source {
        Waveform::Dc { amplitude } => {
            let _ = writeln!(out, "source dc V={}", format_value(amplitude));
        }
        Waveform::Sine { amplitude, frequency, phase } => {
            let _ = write!(out, "source sine amp={} freq={}", format_value(amplitude), format_value(frequency));
            if phase != 0.0 {
                let _ = write!(out, " phase={}", format_value(phase));
            }
            out.push('\n');
        }
    }
    let mut net = String::new();
    expr(&spec.topology, spec, &mut net, false);
    let _ = writeln!(out, "net {net}");
    let inits: Vec<String> = spec
        .instances
        .iter()
        .filter(|(_, i)| i.initial_state != 0)
        .map(|(n, i)| format!("{n}={}", i.initial_state))
        .collect();
    if !inits.is_empty() {
        let _ = writeln!(out, "init {}", inits.join(" "));
    }
    out
}
