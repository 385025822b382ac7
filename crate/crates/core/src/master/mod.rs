//! Master equation for occupation probabilities: `dp/dt = Q(V_a(t)) p`.

mod dc;
mod generator;
mod transient;

pub use dc::{expm_increment, solve_dc};
pub use generator::{generator_matrix, CompiledRates, GeneratorMatrix};
pub use transient::{solve_transient, TransientOptions};

use crate::error::{Error, Result};
use crate::netdsl::CircuitSpec;
use crate::statespace::StateSpace;

/// Default absolute tolerance for conservation checks and local error.
pub const DEFAULT_TOL: f64 = 1e-8;
/// Default number of output samples per run, including both end points.
pub const DEFAULT_SAMPLES: usize = 2000;

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector(pub Vec<f64>);

impl ProbabilityVector {
    /// All mass on state `index`.
    pub fn point(dim: usize, index: usize) -> Self {
        let mut p = vec![0.0; dim];
        p[index] = 1.0;
        Self(p)
    }

    /// Point mass on the circuit's declared initial configuration.
    pub fn initial(space: &StateSpace, spec: &CircuitSpec) -> Self {
        Self::point(space.len(), space.initial_index(spec))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Entries within `[-tol, 1 + tol]` and total within `tol` of one.
    pub fn check(&self, tol: f64) -> Result<()> {
        if let Some((i, p)) = self.0.iter().enumerate().find(|(_, p)| !(**p >= -tol && **p <= 1.0 + tol)) {
            return Err(Error::Input(format!("probability entry {i} = {p} outside [0, 1]")));
        }
        let total = self.total();
        if (total - 1.0).abs() > tol {
            return Err(Error::Input(format!("probabilities sum to {total}, not 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTrajectory {
    pub times: Vec<f64>,
    pub probabilities: Vec<ProbabilityVector>,
    pub source_values: Vec<f64>,
}

impl ProbabilityTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&ProbabilityVector> {
        self.probabilities.last()
    }

    /// Time series of a single state's probability.
    pub fn series(&self, state: usize) -> Vec<f64> {
        self.probabilities.iter().map(|p| p.0[state]).collect()
    }
}

/// Clamp entries within `tol` below zero and rescale to unit total.
pub(crate) fn clamp_and_renormalize(p: &mut [f64]) {
    for x in p.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let total: f64 = p.iter().sum();
    if total > 0.0 {
        p.iter_mut().for_each(|x| *x /= total);
    }
}

/// `n` evenly spaced sample times on `[0, t_stop]`.
pub fn linspace(t_stop: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|i| t_stop * i as f64 / (n - 1) as f64).collect()
}
