use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("allele configuration is empty")]
    EmptyConfig,

    #[error("allele {allele} outside 1..={k}")]
    AlleleOutOfRange { allele: u32, k: u32 },

    #[error("invalid backward event: {0}")]
    InvalidEvent(String),

    #[error("configurations are not one forward event apart")]
    UnreachableTransition,

    #[error("configuration already reduced to its most recent common ancestor")]
    MrcaReached,

    #[error("proposal assigns zero probability to the chosen event")]
    ZeroProposal,

    #[error("no finite bound on the event rate is available for thinning")]
    NoRateBound,

    #[error("at least one replicate is required")]
    NoReplicates,

    #[error("empty input")]
    EmptyInput,

    #[error("all resampling probabilities underflowed")]
    Underflow,

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("profile grid value {value} outside search range [{lo}, {hi}]")]
    GridOutsideRange { value: f64, lo: f64, hi: f64 },

    #[error("state space too large for the exact recursion ({states} states at one level, limit {limit})")]
    StateSpaceTooLarge { states: usize, limit: usize },

    #[error("reference estimate is not precise enough: {0}")]
    ImpreciseReference(String),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
