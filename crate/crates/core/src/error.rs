use thiserror::Error;

/// Location of a diagnostic inside a `.mn` circuit file (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Location {
    pub line: usize,
    pub column: usize,
}

impl std::fmt::Display for Location {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("state index {index} out of range for a {states}-state model")]
    StateIndex { index: usize, states: usize },

    #[error("{location}: {message}")]
    Parse { location: Location, message: String },

    #[error("malformed numeric literal `{0}`")]
    Literal(String),

    #[error("state space of {states} configurations exceeds the cap of {cap}; enable lumping or raise the cap")]
    Capacity { states: u128, cap: usize },

    #[error("integration failed at t = {time:e} s: step size underflow (dominant rate {rate:e} 1/s)")]
    StepUnderflow { time: f64, rate: f64 },

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("trajectory too short: absorbing mass reached {achieved} (need > {required})")]
    Truncation { achieved: f64, required: f64 },

    #[error("netlist emission failed: {0}")]
    Emission(String),

    #[error("cannot write output: {0}")]
    Output(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Input errors map to exit code 1, everything raised while computing to 2.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Input(_) | Error::StateIndex { .. } | Error::Parse { .. } | Error::Literal(_) | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
