use thiserror::Error;

/// A constraint violated by a candidate parameter set.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("arrival probability must be positive, got {0}")]
    NonPositiveAlpha(f64),
    #[error("arrival probability must be at most 1, got {0}")]
    AlphaAboveOne(f64),
    #[error("packet size A must be at least 1")]
    ZeroPacketSize,
    #[error("max transmit M = {m} is smaller than packet size A = {a}")]
    MLessThanA { a: usize, m: usize },
    #[error("power table has {got} entries, expected M + 1 = {expected}")]
    PowerLength { expected: usize, got: usize },
    #[error("power table entry P_{index} = {value} is not finite")]
    PowerNotFinite { index: usize, value: f64 },
    #[error("transmitting 0 bits must cost 0 power, got P_0 = {0}")]
    PowerZeroNonzero(f64),
    #[error("per-bit power must strictly increase: P_{lo}/{lo} = {lo_ratio} >= P_{hi}/{hi} = {hi_ratio}")]
    PowerNotIncreasingPerBit {
        lo: usize,
        hi: usize,
        lo_ratio: f64,
        hi_ratio: f64,
    },
    #[error("missing parameter `{0}`")]
    Missing(&'static str),
    #[error("cannot parse parameter `{key}` from {value:?}")]
    Parse { key: String, value: String },
    #[error("unknown parameter `{0}`")]
    UnknownKey(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Params(#[from] ParamError),

    #[error("state {state} is outside 0..={max}")]
    StateOutOfRange { state: usize, max: usize },

    #[error("policy shape {rows}x{cols} does not match model ({expected_rows}x{expected_cols})")]
    PolicyShape {
        rows: usize,
        cols: usize,
        expected_rows: usize,
        expected_cols: usize,
    },

    #[error("policy row {row} is not a probability distribution: {reason}")]
    InvalidPolicyRow { row: usize, reason: String },

    #[error("thresholds {thresholds:?} assign infeasible action {action} to state {state}")]
    InfeasibleThresholds {
        thresholds: Vec<usize>,
        state: usize,
        action: usize,
    },

    #[error("malformed threshold vector {thresholds:?}: {reason}")]
    MalformedThresholds {
        thresholds: Vec<usize>,
        reason: String,
    },

    #[error("transition chain is singular (pivot {pivot:.3e} at column {column}); the policy has more than one recurrent class")]
    SingularChain { column: usize, pivot: f64 },

    #[error("power budget must be a nonnegative number, got {0}")]
    InvalidBudget(f64),

    #[error("threshold policy {thresholds:?} has a singular chain")]
    SingularThresholds { thresholds: Vec<usize> },

    #[error("stationary solve produced a negative probability {value:.3e} at state {state}")]
    NegativeStationary { state: usize, value: f64 },

    #[error("policies must differ in exactly one row, they differ in {0}")]
    RowDiffCountMismatch(usize),

    #[error("segment endpoints share the same power ({0:.3e} apart); slope undefined")]
    DegenerateSegment(f64),

    #[error("enumeration would visit {count} policies, cap is {cap}")]
    EnumerationTooLarge { count: u128, cap: u128 },

    #[error("simplex stopped after {0} pivots without converging")]
    IterationLimit(usize),

    #[error("LP solution does not yield a valid policy at state {state}: {reason}")]
    DegenerateSolution { state: usize, reason: String },

    #[error("LP solution failed its certificate: {reason} ({value:e})")]
    NotOptimal { reason: &'static str, value: f64 },

    #[error("{0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
