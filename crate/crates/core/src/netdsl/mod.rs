//! The `.mn` circuit description language.
//!
//! Line-oriented; `#` starts a comment. Statements:
//!
//! ```text
//! model T states=3 R=[10k,3k,1k] tau_up=[3e5,3e5] V_up=[.05,.07] tau_down=[3e5,3e5] V_down=[.05,.07]
//! res R1 2.2k
//! source sine amp=1.5 freq=200 [phase=0]
//! source dc V=5
//! net (m1:T + m2:T) | R1
//! init m1=1
//! ```
//!
//! `tau=` and `V=` set every edge in both directions at once; the per-edge
//! keys take precedence. In `net`, `name:Model` declares a memristor instance
//! at its (single) leaf; a bare name refers to a `res` or, when exactly one
//! model is declared, to a new instance of that model. Instances are ordered
//! by first appearance in the `net` expression.
//!
//! Topology grammar, series binding looser than parallel:
//!
//! ```text
//! expr   := term ('+' term)*
//! term   := factor ('|' factor)*
//! factor := NAME [':' MODEL] | '(' expr ')'
//! ```

mod format;
mod parser;
mod value;

pub use format::format_circuit;
pub use parser::parse_circuit;
pub use value::{format_value, parse_value};

use indexmap::IndexMap;

use crate::device::MemristorModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub model: String,
    pub initial_state: usize,
}

/// Series/parallel reduction tree. Leaves carry an element handle: a name in
/// a parsed [`CircuitSpec`], an element index once resolved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TopologyNode<L = String> {
    Leaf(L),
    Series(Vec<TopologyNode<L>>),
    Parallel(Vec<TopologyNode<L>>),
}

impl<L> TopologyNode<L> {
    pub fn leaves(&self) -> Vec<&L> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a L>) {
        match self {
            TopologyNode::Leaf(l) => out.push(l),
            TopologyNode::Series(c) | TopologyNode::Parallel(c) => c.iter().for_each(|n| n.collect_leaves(out)),
        }
    }

    pub fn map_leaves<M, F: FnMut(&L) -> M>(&self, f: &mut F) -> TopologyNode<M> {
        match self {
            TopologyNode::Leaf(l) => TopologyNode::Leaf(f(l)),
            TopologyNode::Series(c) => TopologyNode::Series(c.iter().map(|n| n.map_leaves(f)).collect()),
            TopologyNode::Parallel(c) => TopologyNode::Parallel(c.iter().map(|n| n.map_leaves(f)).collect()),
        }
    }

    /// True if every Series/Parallel node has at least two children.
    pub fn is_well_formed(&self) -> bool {
        match self {
            TopologyNode::Leaf(_) => true,
            TopologyNode::Series(c) | TopologyNode::Parallel(c) => {
                c.len() >= 2 && c.iter().all(TopologyNode::is_well_formed)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Waveform {
    Dc { amplitude: f64 },
    Sine { amplitude: f64, frequency: f64, phase: f64 },
}

impl Waveform {
    pub fn dc(amplitude: f64) -> Self {
        Waveform::Dc { amplitude }
    }

    pub fn sine(amplitude: f64, frequency: f64) -> Self {
        Waveform::Sine { amplitude, frequency, phase: 0.0 }
    }

    pub fn value_at(&self, t: f64) -> f64 {
        match *self {
            Waveform::Dc { amplitude } => amplitude,
            Waveform::Sine { amplitude, frequency, phase } => {
                amplitude * (std::f64::consts::TAU * frequency * t + phase).sin()
            }
        }
    }

    pub fn amplitude(&self) -> f64 {
        match *self {
            Waveform::Dc { amplitude } | Waveform::Sine { amplitude, .. } => amplitude,
        }
    }

    pub fn is_dc(&self) -> bool {
        matches!(self, Waveform::Dc { .. })
    }

    pub fn with_frequency(self, f: f64) -> Self {
        match self {
            Waveform::Sine { amplitude, phase, .. } => Waveform::Sine { amplitude, frequency: f, phase },
            dc => dc,
        }
    }
}

/// Reference to a circuit element by its index in [`CircuitSpec::elements`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementKind {
    Memristor(usize),
    Resistor(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitSpec {
    pub models: IndexMap<String, MemristorModel>,
    pub instances: IndexMap<String, Instance>,
    pub fixed_resistors: IndexMap<String, f64>,
    pub topology: TopologyNode,
    pub source: Waveform,
}

impl CircuitSpec {
    /// Elements in index order: memristor instances, then fixed resistors.
    pub fn elements(&self) -> Vec<(&str, ElementKind)> {
        let mems = self.instances.keys().enumerate().map(|(i, n)| (n.as_str(), ElementKind::Memristor(i)));
        let res = self.fixed_resistors.keys().enumerate().map(|(i, n)| (n.as_str(), ElementKind::Resistor(i)));
        mems.chain(res).collect()
    }

    pub fn element_index(&self, name: &str) -> Option<usize> {
        if let Some(i) = self.instances.get_index_of(name) {
            return Some(i);
        }
        self.fixed_resistors.get_index_of(name).map(|i| self.instances.len() + i)
    }

    /// Topology with leaves resolved to element indices.
    pub fn indexed_topology(&self) -> TopologyNode<usize> {
        self.topology.map_leaves(&mut |name: &String| {
            self.element_index(name).expect("validated spec: every leaf names an element")
        })
    }

    pub fn instance_model(&self, i: usize) -> &MemristorModel {
        let (_, inst) = self.instances.get_index(i).expect("instance index in range");
        &self.models[&inst.model]
    }

    /// Resistance of every element for the given memristor state digits.
    pub fn element_resistances(&self, digits: &[usize]) -> Vec<f64> {
        let mut r: Vec<f64> =
            (0..self.instances.len()).map(|i| self.instance_model(i).resistances[digits[i]]).collect();
        r.extend(self.fixed_resistors.values().copied());
        r
    }

    pub fn initial_digits(&self) -> Vec<usize> {
        self.instances.values().map(|i| i.initial_state).collect()
    }

    /// Check every structural invariant. Parsed specs always pass.
    pub fn validate(&self) -> Result<()> {
        for (name, m) in &self.models {
            if let Some(v) = m.validate().first() {
                return Err(Error::Input(format!("model {name}: {v}")));
            }
        }
        for (name, inst) in &self.instances {
            let m = self
                .models
                .get(&inst.model)
                .ok_or_else(|| Error::Input(format!("unknown model {} for {name}", inst.model)))?;
            if inst.initial_state >= m.states() {
                return Err(Error::Input(format!(
                    "initial state {} of {name} out of range for {}-state model",
                    inst.initial_state,
                    m.states()
                )));
            }
        }
        for (name, r) in &self.fixed_resistors {
            if !(r.is_finite() && *r > 0.0) {
                return Err(Error::Input(format!("resistor {name} must be positive")));
            }
            if self.instances.contains_key(name) {
                return Err(Error::Input(format!("duplicate name {name}")));
            }
        }
        if !self.topology.is_well_formed() {
            return Err(Error::Input("series/parallel nodes need at least two children".into()));
        }
        let leaves = self.topology.leaves();
        let mut seen = std::collections::HashSet::new();
        for leaf in &leaves {
            if self.element_index(leaf).is_none() {
                return Err(Error::Input(format!("unknown element {leaf}")));
            }
            if !seen.insert(leaf.as_str()) {
                return Err(Error::Input(format!("element {leaf} used more than once")));
            }
        }
        if seen.len() != self.instances.len() + self.fixed_resistors.len() {
            return Err(Error::Input("every element must appear in the net exactly once".into()));
        }
        if let Waveform::Sine { frequency, amplitude, phase } = self.source {
            if !(frequency.is_finite() && frequency > 0.0) {
                return Err(Error::Input("sine frequency must be positive".into()));
            }
            if !(amplitude.is_finite() && phase.is_finite()) {
                return Err(Error::Input("non-finite source parameter".into()));
            }
        } else if !self.source.amplitude().is_finite() {
            return Err(Error::Input("non-finite source amplitude".into()));
        }
        Ok(())
    }
}
