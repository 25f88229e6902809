use thiserror::Error;

/// Errors raised by the simulation framework.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid protocol parameters: {0}")]
    InvalidParams(String),

    #[error("corruption budget of {budget} exceeded")]
    BudgetExceeded { budget: usize },

    #[error("schedule violation: party P{} already spoke in round {}", party + 1, round + 1)]
    ScheduleViolation { round: usize, party: usize },

    #[error("illegal adversary action: {0}")]
    IllegalAction(String),

    #[error("{what}: {required} states required, cap is {cap}")]
    CapExceeded {
        what: String,
        required: f64,
        cap: u128,
    },

    #[error("invalid target set: {0}")]
    InvalidTargetSet(String),

    #[error("majority coin requires an odd number of parties, got {0}")]
    EvenParties(usize),

    #[error("output width {output_bits} exceeds message width {message_bits}")]
    WidthMismatch {
        output_bits: usize,
        message_bits: usize,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("empty family")]
    EmptyFamily,

    #[error("consistent set became empty")]
    EmptyConsistentSet,

    #[error("distributions are over different universes ({0} vs {1} bits)")]
    SupportMismatch(u32, u32),

    #[error(
        "KL divergence undefined: element {element:#x} has mass under the first distribution only"
    )]
    AbsoluteContinuityViolated { element: u64 },

    #[error("operation requires an exact distribution")]
    RequiresExact,

    #[error("malformed input: {0}")]
    Malformed(String),
}

impl Error {
    pub fn cap(what: impl Into<String>, required: f64, cap: u128) -> Self {
        Error::CapExceeded {
            what: what.into(),
            required,
            cap,
        }
    }

    /// True for errors caused by a size cap rather than invalid input.
    pub fn is_cap(&self) -> bool {
        matches!(self, Error::CapExceeded { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
