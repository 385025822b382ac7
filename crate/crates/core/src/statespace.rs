//! Network configurations, the adjacent-move transition scheme, and lumping
//! of permutation-equivalent configurations.
//!
//! State order is lexicographic with the first declared instance as the least
//! significant digit. Labels print the digits most-significant first, so the
//! first instance is the rightmost character: `01111` has instances 1-4 on and
//! instance 5 off.
//!
//! In a lumped space each state stands for a whole permutation class. Its
//! probability is the total probability of the class, and the outgoing rate
//! towards another class is the sum of member-level rates from any single
//! representative. Interchangeable instances have identical rates, so the
//! aggregation is exact.

use std::collections::HashMap;

use crate::circuit::{solve_configuration, ConfigSolution};
use crate::device::{Direction, MemristorModel};
use crate::error::{Error, Result};
use crate::netdsl::{CircuitSpec, TopologyNode};

pub const DEFAULT_STATE_CAP: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NetworkState {
    /// One state index per memristor instance, in declaration order.
    pub digits: Vec<usize>,
}

impl NetworkState {
    pub fn label(&self) -> String {
        self.digits.iter().rev().map(|d| std::char::from_digit(*d as u32, 36).unwrap_or('?')).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transition {
    pub target: usize,
    /// Instance whose digit moves (a representative one in a lumped space).
    pub memristor: usize,
    pub direction: Direction,
    /// Number of member-level transitions aggregated into this edge.
    pub count: u32,
}

#[derive(Debug, Clone)]
pub struct StateSpace {
    pub states: Vec<NetworkState>,
    pub transitions: Vec<Vec<Transition>>,
    pub config_solutions: Vec<ConfigSolution>,
    pub multiplicity: Vec<u64>,
    /// Index of the all-on configuration.
    pub absorbing_hint: Option<usize>,
    models: Vec<MemristorModel>,
    radices: Vec<usize>,
    /// Interchangeable instance groups (empty for a full space).
    groups: Vec<Vec<usize>>,
    /// Full-space index of each state's digits -> state index.
    index_of: HashMap<u64, usize>,
}

impl StateSpace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn is_lumped(&self) -> bool {
        !self.groups.is_empty()
    }

    pub fn instance_count(&self) -> usize {
        self.radices.len()
    }

    pub fn instance_model(&self, m: usize) -> &MemristorModel {
        &self.models[m]
    }

    /// Product of all state counts: the size of the unlumped space.
    pub fn full_size(&self) -> u64 {
        self.radices.iter().map(|&k| k as u64).product()
    }

    pub fn symmetry_groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn label(&self, s: usize) -> String {
        let base = format!("p{}", self.states[s].label());
        match self.multiplicity[s] {
            1 => base,
            m => format!("{base}x{m}"),
        }
    }

    pub fn labels(&self) -> Vec<String> {
        (0..self.len()).map(|s| self.label(s)).collect()
    }

    fn full_index(&self, digits: &[usize]) -> u64 {
        full_index(&self.radices, digits)
    }

    /// State index holding the configuration `digits` (after canonicalization
    /// in a lumped space).
    pub fn index_of_digits(&self, digits: &[usize]) -> Option<usize> {
        if digits.len() != self.radices.len() || digits.iter().zip(&self.radices).any(|(d, k)| d >= k) {
            return None;
        }
        let canon = canonicalize(&self.groups, digits);
        self.index_of.get(&self.full_index(&canon)).copied()
    }

    pub fn initial_index(&self, spec: &CircuitSpec) -> usize {
        self.index_of_digits(&spec.initial_digits()).expect("initial digits are within range")
    }

    /// Sum full-space probabilities into this space's classes.
    pub fn aggregate(&self, full: &StateSpace, p_full: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (s, p) in full.states.iter().zip(p_full) {
            out[self.index_of_digits(&s.digits).expect("same circuit")] += p;
        }
        out
    }
}

fn full_index(radices: &[usize], digits: &[usize]) -> u64 {
    let mut idx = 0u64;
    let mut stride = 1u64;
    for (d, k) in digits.iter().zip(radices) {
        idx += *d as u64 * stride;
        stride *= *k as u64;
    }
    idx
}

fn digits_of(radices: &[usize], mut idx: u64) -> Vec<usize> {
    radices
        .iter()
        .map(|&k| {
            let d = (idx % k as u64) as usize;
            idx /= k as u64;
            d
        })
        .collect()
}

/// Within each group, hand the largest digits to the earliest instances.
fn canonicalize(groups: &[Vec<usize>], digits: &[usize]) -> Vec<usize> {
    let mut out = digits.to_vec();
    for g in groups {
        let mut vals: Vec<usize> = g.iter().map(|&m| digits[m]).collect();
        vals.sort_unstable_by(|a, b| b.cmp(a));
        for (&m, v) in g.iter().zip(vals) {
            out[m] = v;
        }
    }
    out
}

fn structural_neighbors(radices: &[usize], digits: &[usize]) -> Vec<(Vec<usize>, usize, Direction)> {
    let mut out = Vec::new();
    for m in 0..digits.len() {
        if digits[m] > 0 {
            let mut d = digits.to_vec();
            d[m] -= 1;
            out.push((d, m, Direction::Down));
        }
        if digits[m] + 1 < radices[m] {
            let mut d = digits.to_vec();
            d[m] += 1;
            out.push((d, m, Direction::Up));
        }
    }
    out
}

/// Full product space of the circuit, with the default cap.
pub fn enumerate_states(spec: &CircuitSpec) -> Result<StateSpace> {
    enumerate_states_with_cap(spec, DEFAULT_STATE_CAP)
}

pub fn enumerate_states_with_cap(spec: &CircuitSpec, cap: usize) -> Result<StateSpace> {
    let models: Vec<MemristorModel> = (0..spec.instances.len()).map(|i| spec.instance_model(i).clone()).collect();
    let radices: Vec<usize> = models.iter().map(MemristorModel::states).collect();
    let total: u128 = radices.iter().map(|&k| k as u128).product();
    if total > cap as u128 {
        return Err(Error::Capacity { states: total, cap });
    }
    let n = total as usize;
    let topology = spec.indexed_topology();
    let mut states = Vec::with_capacity(n);
    let mut transitions = Vec::with_capacity(n);
    let mut config_solutions = Vec::with_capacity(n);
    for idx in 0..n as u64 {
        let digits = digits_of(&radices, idx);
        config_solutions.push(solve_configuration(&topology, &spec.element_resistances(&digits)));
        transitions.push(
            structural_neighbors(&radices, &digits)
                .into_iter()
                .map(|(d, memristor, direction)| Transition {
                    target: full_index(&radices, &d) as usize,
                    memristor,
                    direction,
                    count: 1,
                })
                .collect(),
        );
        states.push(NetworkState { digits });
    }
    let all_on: Vec<usize> = radices.iter().map(|k| k - 1).collect();
    Ok(StateSpace {
        absorbing_hint: Some(full_index(&radices, &all_on) as usize),
        states,
        transitions,
        config_solutions,
        multiplicity: vec![1; n],
        models,
        radices,
        groups: Vec::new(),
        index_of: (0..n).map(|i| (i as u64, i)).collect(),
    })
}

/// Interchangeable instances: leaf siblings under one topology node sharing
/// model and initial state.
pub fn symmetry_groups(spec: &CircuitSpec) -> Vec<Vec<usize>> {
    fn walk(node: &TopologyNode<usize>, spec: &CircuitSpec, out: &mut Vec<Vec<usize>>) {
        let children = match node {
            TopologyNode::Leaf(_) => return,
            TopologyNode::Series(c) | TopologyNode::Parallel(c) => c,
        };
        let mut buckets: Vec<((String, usize), Vec<usize>)> = Vec::new();
        for child in children {
            match child {
                TopologyNode::Leaf(e) if *e < spec.instances.len() => {
                    let inst = &spec.instances[*e];
                    let key = (inst.model.clone(), inst.initial_state);
                    match buckets.iter_mut().find(|(k, _)| *k == key) {
                        Some((_, v)) => v.push(*e),
                        None => buckets.push((key, vec![*e])),
                    }
                }
                other => walk(other, spec, out),
            }
        }
        out.extend(
            buckets
                .into_iter()
                .map(|(_, mut v)| {
                    v.sort_unstable();
                    v
                })
                .filter(|v| v.len() > 1),
        );
    }
    let mut out = Vec::new();
    walk(&spec.indexed_topology(), spec, &mut out);
    out.sort();
    out
}

fn multinomial(counts: &[u64]) -> u64 {
    let mut result = 1u64;
    let mut n = 0u64;
    for &c in counts {
        for i in 1..=c {
            n += 1;
            result = result * n / i;
        }
    }
    result
}

/// Merge permutation-equivalent configurations of interchangeable instances.
/// A no-op (apart from bookkeeping) when the circuit has no symmetry.
pub fn lump_states(full: &StateSpace, spec: &CircuitSpec) -> StateSpace {
    let groups = symmetry_groups(spec);
    if groups.is_empty() {
        return full.clone();
    }
    let mut states = Vec::new();
    let mut reps = Vec::new();
    let mut index_of = HashMap::new();
    for (i, s) in full.states.iter().enumerate() {
        if canonicalize(&groups, &s.digits) == s.digits {
            index_of.insert(i as u64, states.len());
            states.push(s.clone());
            reps.push(i);
        }
    }
    let class = |digits: &[usize]| -> usize {
        let c = canonicalize(&groups, digits);
        index_of[&full_index(&full.radices, &c)]
    };
    let mut transitions = Vec::with_capacity(states.len());
    let mut multiplicity = Vec::with_capacity(states.len());
    for &r in &reps {
        let mut out: Vec<Transition> = Vec::new();
        for tr in &full.transitions[r] {
            let target = class(&full.states[tr.target].digits);
            match out.iter_mut().find(|t| t.target == target) {
                Some(t) => t.count += 1,
                None => out.push(Transition { target, ..*tr }),
            }
        }
        transitions.push(out);
        let digits = &full.states[r].digits;
        multiplicity.push(
            groups
                .iter()
                .map(|g| {
                    let mut counts: HashMap<usize, u64> = HashMap::new();
                    for &m in g {
                        *counts.entry(digits[m]).or_default() += 1;
                    }
                    let counts: Vec<u64> = counts.into_values().collect();
                    multinomial(&counts)
                })
                .product(),
        );
    }
    let all_on: Vec<usize> = full.radices.iter().map(|k| k - 1).collect();
    StateSpace {
        absorbing_hint: Some(class(&all_on)),
        config_solutions: reps.iter().map(|&r| full.config_solutions[r].clone()).collect(),
        states,
        transitions,
        multiplicity,
        models: full.models.clone(),
        radices: full.radices.clone(),
        groups,
        index_of,
    }
}

pub fn neighbors(space: &StateSpace, s: usize) -> &[Transition] {
    &space.transitions[s]
}

/// Rate of `tr` out of state `from`, evaluated with the source state's
/// element voltages. Returns NaN for a non-finite source voltage.
pub fn transition_rate(space: &StateSpace, from: usize, tr: &Transition, v_source: f64) -> f64 {
    let m = tr.memristor;
    let digit = space.states[from].digits[m];
    let v = space.config_solutions[from].element_voltage(m, v_source);
    let rate = space.models[m].rate(digit, tr.direction, v).unwrap_or(f64::NAN);
    rate * tr.count as f64
}
