//! LTspice netlists realizing the master equation with analog components.
//!
//! Every network state gets a probability node `p<k>` holding a 1 F capacitor
//! whose voltage is the state's probability, charged by a behavioral current
//! source equal to the right-hand side of the master equation. One resistor
//! copy of the network per state supplies the element voltages that set the
//! rates and, weighted by the probabilities, the mean current.

mod check;
mod expr;

pub use check::{lint, netlists_equivalent, parse_netlist, LintIssue, Statement};
pub use expr::{parse_expression, Polynomial};

use std::fmt::Write as _;

use crate::device::Direction;
use crate::error::{Error, Result};
use crate::netdsl::{format_value, CircuitSpec, TopologyNode, Waveform};
use crate::statespace::{transition_rate, StateSpace, Transition};

/// Largest number of probability nodes emitted.
pub const MAX_SPICE_STATES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TranSettings {
    pub t_stop: f64,
    /// Start of recorded output.
    pub t_start: f64,
    pub max_step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetlistDoc {
    pub lines: Vec<String>,
    /// Probability node per state.
    pub state_nodes: Vec<String>,
    /// Resistor names of each state's network copy, in topology order.
    pub copy_resistors: Vec<Vec<String>>,
}

impl NetlistDoc {
    pub fn text(&self) -> String {
        let mut s = self.lines.join("\n");
        s.push('\n');
        s
    }
}

/// Compact SPICE parameter literal: `3E5`, `.05`, `1.5`, `1E-7`.
pub fn format_param(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let a = x.abs();
    if (1e-3..1e3).contains(&a) {
        let s = format!("{x}");
        if let Some(rest) = s.strip_prefix("0.") {
            format!(".{rest}")
        } else if let Some(rest) = s.strip_prefix("-0.") {
            format!("-.{rest}")
        } else {
            s
        }
    } else {
        format!("{x:E}")
    }
}

fn edge_suffix(from: usize, to: usize, states: usize) -> String {
    if states > 10 {
        format!("{from}_{to}")
    } else {
        format!("{from}{to}")
    }
}

/// Per-model parameter symbols.
struct ParamNames {
    multi_model: bool,
}

impl ParamNames {
    fn names(&self, model: &str, states: usize, digit: usize, dir: Direction) -> (String, String) {
        let (from, to) = match dir {
            Direction::Up => (digit, digit + 1),
            Direction::Down => (digit, digit - 1),
        };
        let e = edge_suffix(from, to, states);
        let m = if self.multi_model { format!("_{model}") } else { String::new() };
        (format!("tau{e}{m}"), format!("V{e}{m}"))
    }
}

/// Node wiring of one network copy.
struct Copy {
    resistors: Vec<(String, String, String, f64)>,
    /// Element index -> (n+, n-).
    terminals: Vec<(String, String)>,
}

fn wire(
    node: &TopologyNode<usize>,
    a: &str,
    b: &str,
    copy: usize,
    fresh: &mut usize,
    out: &mut Vec<(usize, String, String)>,
) {
    match node {
        TopologyNode::Leaf(e) => out.push((*e, a.to_string(), b.to_string())),
        TopologyNode::Parallel(c) => c.iter().for_each(|n| wire(n, a, b, copy, fresh, out)),
        TopologyNode::Series(c) => {
            let mut left = a.to_string();
            for (i, n) in c.iter().enumerate() {
                let right = if i + 1 == c.len() {
                    b.to_string()
                } else {
                    *fresh += 1;
                    format!("n{copy}_{fresh}")
                };
                wire(n, &left, &right, copy, fresh, out);
                left = right;
            }
        }
    }
}

fn voltage_expr(a: &str, b: &str) -> String {
    if b == "0" {
        format!("V({a})")
    } else if a == "0" {
        format!("-V({b})")
    } else {
        format!("V({a},{b})")
    }
}

/// Emit the netlist for `space` (lumped or full) of `spec` under `wave`.
///
/// For a dc drive under which the all-on state is absorbing, a switching-time
/// integrator is added: node `Vt` accumulates `t * (influx into all-on)`, and
/// its final voltage is the mean switching time.
pub fn emit_ltspice(
    space: &StateSpace,
    spec: &CircuitSpec,
    wave: &Waveform,
    tran: &TranSettings,
    title: Option<&str>,
) -> Result<NetlistDoc> {
    let m = space.len();
    if m > MAX_SPICE_STATES {
        return Err(Error::Emission(format!("{m} states exceed the netlist limit of {MAX_SPICE_STATES}")));
    }
    if !(tran.t_stop > 0.0 && tran.t_start >= 0.0 && tran.t_start < tran.t_stop && tran.max_step > 0.0) {
        return Err(Error::Emission("invalid .tran settings".into()));
    }
    let topology = spec.indexed_topology();
    let n_elements = spec.elements().len();
    let params = ParamNames { multi_model: spec.models.len() > 1 };
    let node = |s: usize| format!("p{s}");

    // network copies
    let mut copies = Vec::with_capacity(m);
    let mut r_index = 0usize;
    for s in 0..m {
        let mut fresh = 0;
        let mut leaves = Vec::new();
        wire(&topology, "Va", "0", s, &mut fresh, &mut leaves);
        let values = spec.element_resistances(&space.states[s].digits);
        let mut terminals = vec![(String::new(), String::new()); n_elements];
        let mut resistors = Vec::new();
        for (e, a, b) in leaves {
            r_index += 1;
            resistors.push((format!("R{r_index}"), a.clone(), b.clone(), values[e]));
            terminals[e] = (a, b);
        }
        copies.push(Copy { resistors, terminals });
    }

    // rate term of transition `tr` out of state `s`, without gate
    let term = |s: usize, tr: &Transition| -> String {
        let digit = space.states[s].digits[tr.memristor];
        let model = space.instance_model(tr.memristor);
        let (tau, v) = params.names(&model.name, model.states(), digit, tr.direction);
        let (a, b) = &copies[s].terminals[tr.memristor];
        let mut ve = voltage_expr(a, b);
        if tr.direction == Direction::Down {
            ve = match ve.strip_prefix('-') {
                Some(rest) => rest.to_string(),
                None => format!("-{ve}"),
            };
        }
        let coeff = if tr.count > 1 { format!("{}*", tr.count) } else { String::new() };
        format!("{coeff}gm({tau},{v},{ve})*V({})", node(s))
    };

    let mut lines = Vec::new();
    if let Some(t) = title {
        lines.push(format!("* {t}"));
    }

    // master-equation sources, split by the sign of the drive
    for k in 0..m {
        let mut expr = String::new();
        for (dir, gate) in [(Direction::Up, "u(V(Va))"), (Direction::Down, "u(-V(Va))")] {
            let mut group = String::new();
            for (s, trs) in space.transitions.iter().enumerate() {
                for tr in trs.iter().filter(|t| t.target == k && t.direction == dir) {
                    if !group.is_empty() {
                        group.push('+');
                    }
                    group.push_str(&term(s, tr));
                }
            }
            for tr in space.transitions[k].iter().filter(|t| t.direction == dir) {
                group.push('-');
                group.push_str(&term(k, tr));
            }
            if group.is_empty() {
                continue;
            }
            if !expr.is_empty() {
                expr.push('+');
            }
            let _ = write!(expr, "({group})*{gate}");
        }
        if expr.is_empty() {
            expr.push('0');
        }
        lines.push(format!("B{} 0 {} I={expr}", k + 1, node(k)));
    }

    for c in &copies {
        for (name, a, b, r) in &c.resistors {
            lines.push(format!("{name} {a} {b} {}", format_value(*r)));
        }
    }
    let load = format!("R{}", r_index + 1);
    lines.push(format!("{load} VI 0 1k"));

    let ic = space.initial_index(spec);
    for k in 0..m {
        lines.push(format!("C{} {} 0 1 IC={}", k + 1, node(k), if k == ic { 1 } else { 0 }));
    }

    let mean: Vec<String> = copies
        .iter()
        .enumerate()
        .map(|(s, c)| {
            let feeds: Vec<&str> = c.resistors.iter().filter(|r| r.1 == "Va").map(|r| r.0.as_str()).collect();
            let current = if feeds.len() == 1 {
                format!("I({})", feeds[0])
            } else {
                format!("({})", feeds.iter().map(|f| format!("I({f})")).collect::<Vec<_>>().join("+"))
            };
            format!("{current}*V({})", node(s))
        })
        .collect();
    lines.push(format!("B{} 0 VI I={}", m + 1, mean.join("+")));

    if let (Waveform::Dc { amplitude }, Some(target)) = (wave, space.absorbing_hint) {
        let absorbing =
            space.transitions[target].iter().all(|tr| transition_rate(space, target, tr, *amplitude) == 0.0);
        if absorbing {
            let mut influx = Vec::new();
            for (s, trs) in space.transitions.iter().enumerate() {
                for tr in trs.iter().filter(|t| t.target == target) {
                    let gate = match tr.direction {
                        Direction::Up => "u(V(Va))",
                        Direction::Down => "u(-V(Va))",
                    };
                    influx.push(format!("{}*{gate}", term(s, tr)));
                }
            }
            if !influx.is_empty() {
                lines.push(format!("B{} 0 Vt I=time*({})", m + 2, influx.join("+")));
                lines.push(format!("C{} Vt 0 1 IC=0", m + 1));
            }
        }
    }

    lines.push(match *wave {
        Waveform::Dc { amplitude } => format!("V1 Va 0 {}", format_param(amplitude)),
        Waveform::Sine { amplitude, frequency, phase } => {
            if phase == 0.0 {
                format!("V1 Va 0 SINE(0 {} {})", format_param(amplitude), format_param(frequency))
            } else {
                format!(
                    "V1 Va 0 SINE(0 {} {} 0 0 {})",
                    format_param(amplitude),
                    format_param(frequency),
                    format_param(phase.to_degrees())
                )
            }
        }
    });
    lines.push(".func gm(x,y,z){1/(x*exp(-z/y))}".into());
    for model in spec.models.values() {
        for (dir, edges) in [(Direction::Up, &model.up_edges), (Direction::Down, &model.down_edges)] {
            for (i, edge) in edges.iter().enumerate() {
                let digit = match dir {
                    Direction::Up => i,
                    Direction::Down => i + 1,
                };
                let (tau, v) = params.names(&model.name, model.states(), digit, dir);
                lines.push(format!(".param {tau}={} {v}={}", format_param(edge.tau), format_param(edge.v_scale)));
            }
        }
    }
    lines.push(format!(
        ".tran 0 {} {} {}",
        format_param(tran.t_stop),
        format_param(tran.t_start),
        format_param(tran.max_step)
    ));
    lines.push(".backanno".into());
    lines.push(".end".into());

    Ok(NetlistDoc {
        lines,
        state_nodes: (0..m).map(node).collect(),
        copy_resistors: copies.iter().map(|c| c.resistors.iter().map(|r| r.0.clone()).collect()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netdsl::parse_circuit;
    use crate::statespace::{enumerate_states, lump_states};

    const REFERENCE_BINARY: &str = "\
B1 0 p0 I=-gm(tau01,V01,V(Va))*V(p0)*u(V(Va))+gm(tau10,V10,-V(Va))*V(p1)*u(-V(Va))
B2 0 p1 I=gm(tau01,V01,V(Va))*V(p0)*u(V(Va))-gm(tau10,V10,-V(Va))*V(p1)*u(-V(Va))
C1 p0 0 1 IC=1
C2 p1 0 1 IC=.0
R2 Va 0 1k
R1 Va 0 10k
R3 VI 0 1k
B3 0 VI I=I(R1)*V(p0)+I(R2)*V(p1)
V1 Va 0 SINE(0 1 200 0 0 0 0)
.FUNC gm(x,y,z){1/(x*exp(-z/y))}
.param tau01=3E5 V01=.05
.param tau10=3E5 V10=.05
.tran 0 .1 0.05 10E-7
.backanno
.end
";

    fn emit(text: &str, tran: TranSettings) -> NetlistDoc {
        let spec = parse_circuit(text).unwrap();
        let full = enumerate_states(&spec).unwrap();
        let space = lump_states(&full, &spec);
        emit_ltspice(&space, &spec, &spec.source, &tran, None).unwrap()
    }

    #[test]
    fn param_formatting() {
        assert_eq!(format_param(3e5), "3E5");
        assert_eq!(format_param(0.05), ".05");
        assert_eq!(format_param(0.07), ".07");
        assert_eq!(format_param(1.5), "1.5");
        assert_eq!(format_param(200.0), "200");
        assert_eq!(format_param(1e-7), "1E-7");
        assert_eq!(format_param(2e4), "2E4");
        assert_eq!(format_param(-0.5), "-.5");
    }

    #[test]
    fn binary_single_matches_reference_netlist() {
        let doc = emit(
            "model B R=[10k,1k] tau=3e5 V=.05\nsource sine amp=1 freq=200\nnet m1\n",
            TranSettings { t_stop: 0.1, t_start: 0.05, max_step: 1e-6 },
        );
        assert!(netlists_equivalent(&doc.text(), REFERENCE_BINARY).unwrap());
        assert!(lint(&doc.text()).is_empty(), "{:?}", lint(&doc.text()));
        assert_eq!(
            doc.text(),
            emit(
                "model B R=[10k,1k] tau=3e5 V=.05\nsource sine amp=1 freq=200\nnet m1\n",
                TranSettings { t_stop: 0.1, t_start: 0.05, max_step: 1e-6 },
            )
            .text()
        );
    }

    #[test]
    fn five_series_has_integrator() {
        let doc = emit(
            "model B R=[10k,1k] tau=3e5 V=.05\nsource dc V=5\nnet m1+m2+m3+m4+m5\n",
            TranSettings { t_stop: 2e-3, t_start: 0.0, max_step: 1e-7 },
        );
        let text = doc.text();
        assert_eq!(doc.state_nodes.len(), 6);
        assert_eq!(doc.copy_resistors.len(), 6);
        assert!(text.contains("B8 0 Vt I=time*("));
        assert!(text.contains("C7 Vt 0 1 IC=0"));
        assert!(text.contains("5*gm(tau01,V01,V(Va,n0_1))*V(p0)"));
        assert!(lint(&text).is_empty(), "{:?}", lint(&text));
    }

    #[test]
    fn parallel_feeds_sum_and_capacity_limit() {
        let doc = emit(
            "model B R=[10k,1k] tau=3e5 V=.05\nsource dc V=1\nnet m1 | (m2 + m3)\n",
            TranSettings { t_stop: 1.0, t_start: 0.0, max_step: 1e-3 },
        );
        assert!(doc.text().contains("(I(R1)+I(R2))*V(p0)"));
        assert!(lint(&doc.text()).is_empty(), "{:?}", lint(&doc.text()));

        let spec = parse_circuit(
            "model A R=[10k,1k] tau=3e5 V=.05\nmodel C R=[9k,2k] tau=3e5 V=.05\nsource dc V=1\nnet a1:A + a2:C + a3:A + a4:C + a5:A + a6:C + a7:A\n",
        )
        .unwrap();
        let full = enumerate_states(&spec).unwrap();
        let tran = TranSettings { t_stop: 1.0, t_start: 0.0, max_step: 1e-3 };
        assert!(matches!(emit_ltspice(&full, &spec, &spec.source, &tran, None), Err(Error::Emission(_))));
    }
}
