//! Memristor state models and voltage-dependent switching rates.
//!
//! A device has `K >= 2` resistance states. State 0 is the off state (highest
//! resistance) and state `K-1` the on state. Only adjacent moves are allowed:
//! edge `i` connects states `i` and `i+1`, and carries separate parameters for
//! the up move (`i -> i+1`, driven by positive voltage) and the down move
//! (`i+1 -> i`, driven by negative voltage).
//!
//! Rates follow the exponential law `1 / (tau * exp(-|v| / v_scale))`, gated
//! to zero on the wrong polarity and at exactly zero volts.

use crate::error::{Error, Result};

/// Rates are clamped here before use. `exp(|v|/V)` overflows near 709 and the
/// clamp keeps "effectively instantaneous" transitions finite.
pub const RATE_CLAMP: f64 = 1e300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEdgeParams {
    /// Mean switching time at zero bias extrapolation, seconds.
    pub tau: f64,
    /// Voltage scale of the exponential, volts.
    pub v_scale: f64,
}

impl RateEdgeParams {
    pub fn new(tau: f64, v_scale: f64) -> Self {
        Self { tau, v_scale }
    }

    pub fn is_valid(&self) -> bool {
        self.tau.is_finite() && self.tau > 0.0 && self.v_scale.is_finite() && self.v_scale > 0.0
    }

    /// Rate at bias magnitude `mag >= 0`, without any polarity gate.
    fn rate_at_magnitude(&self, mag: f64) -> f64 {
        let r = (mag / self.v_scale).exp() / self.tau;
        if r.is_nan() {
            RATE_CLAMP
        } else {
            r.min(RATE_CLAMP)
        }
    }
}

/// Rate of the up transition across `edge` at device voltage `v`.
pub fn rate_up(edge: &RateEdgeParams, v: f64) -> Result<f64> {
    if !v.is_finite() {
        return Err(Error::Input(format!("non-finite device voltage {v}")));
    }
    Ok(if v > 0.0 { edge.rate_at_magnitude(v) } else { 0.0 })
}

/// Rate of the down transition across `edge` at device voltage `v`.
pub fn rate_down(edge: &RateEdgeParams, v: f64) -> Result<f64> {
    if !v.is_finite() {
        return Err(Error::Input(format!("non-finite device voltage {v}")));
    }
    Ok(if v < 0.0 { edge.rate_at_magnitude(-v) } else { 0.0 })
}

/// Direction of a single-device move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    pub fn reversed(self) -> Self {
        match self {
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemristorModel {
    pub name: String,
    /// Ohms per state, strictly decreasing from off (index 0) to on.
    pub resistances: Vec<f64>,
    /// `up_edges[i]` governs `i -> i+1`.
    pub up_edges: Vec<RateEdgeParams>,
    /// `down_edges[i]` governs `i+1 -> i`.
    pub down_edges: Vec<RateEdgeParams>,
}

/// One broken model invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelViolation {
    pub field: String,
    pub rule: ViolationRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationRule {
    TooFewStates,
    Positivity,
    Ordering,
    Length,
}

impl std::fmt::Display for ModelViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let rule = match self.rule {
            ViolationRule::TooFewStates => "at least two states are required",
            ViolationRule::Positivity => "must be finite and strictly positive",
            ViolationRule::Ordering => "resistances must strictly decrease from off to on",
            ViolationRule::Length => "list length must be K-1",
        };
        write!(f, "{}: {}", self.field, rule)
    }
}

impl MemristorModel {
    /// Model with the same up and down parameters on every edge.
    pub fn symmetric(name: &str, resistances: Vec<f64>, edge: RateEdgeParams) -> Self {
        let n = resistances.len().saturating_sub(1);
        Self { name: name.to_string(), resistances, up_edges: vec![edge; n], down_edges: vec![edge; n] }
    }

    pub fn states(&self) -> usize {
        self.resistances.len()
    }

    pub fn resistance(&self, state: usize) -> Result<f64> {
        self.resistances.get(state).copied().ok_or(Error::StateIndex { index: state, states: self.states() })
    }

    /// Rate of leaving `state` in `direction` at device voltage `v`; zero when
    /// the move would leave the valid state range.
    pub fn rate(&self, state: usize, direction: Direction, v: f64) -> Result<f64> {
        match direction {
            Direction::Up if state + 1 < self.states() => rate_up(&self.up_edges[state], v),
            Direction::Down if state > 0 && state < self.states() => rate_down(&self.down_edges[state - 1], v),
            _ => Ok(0.0),
        }
    }

    /// Edge parameters used when leaving `state` in `direction`.
    pub fn edge(&self, state: usize, direction: Direction) -> Option<&RateEdgeParams> {
        match direction {
            Direction::Up => self.up_edges.get(state),
            Direction::Down => state.checked_sub(1).and_then(|i| self.down_edges.get(i)),
        }
    }

    pub fn validate(&self) -> Vec<ModelViolation> {
        validate_model(self)
    }
}

/// Check every model invariant; an empty list means the model is valid.
pub fn validate_model(model: &MemristorModel) -> Vec<ModelViolation> {
    let mut out = Vec::new();
    let mut push = |field: String, rule| out.push(ModelViolation { field, rule });

    let k = model.resistances.len();
    if k < 2 {
        push("resistances".into(), ViolationRule::TooFewStates);
    }
    for (i, r) in model.resistances.iter().enumerate() {
        if !(r.is_finite() && *r > 0.0) {
            push(format!("resistances[{i}]"), ViolationRule::Positivity);
        }
    }
    for (i, w) in model.resistances.windows(2).enumerate() {
        if !(w[1] < w[0]) {
            push(format!("resistances[{}]", i + 1), ViolationRule::Ordering);
        }
    }
    for (label, edges) in [("up_edges", &model.up_edges), ("down_edges", &model.down_edges)] {
        if k >= 2 && edges.len() != k - 1 {
            push(label.into(), ViolationRule::Length);
        }
        for (i, e) in edges.iter().enumerate() {
            if !(e.tau.is_finite() && e.tau > 0.0) {
                push(format!("{label}[{i}].tau"), ViolationRule::Positivity);
            }
            if !(e.v_scale.is_finite() && e.v_scale > 0.0) {
                push(format!("{label}[{i}].v_scale"), ViolationRule::Positivity);
            }
        }
    }
    out
}
