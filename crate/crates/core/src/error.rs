use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("frame mismatch between operands")]
    FrameMismatch,

    #[error("subset references element index {index} outside a frame of {size} elements")]
    SubsetOutOfFrame { index: usize, size: usize },

    #[error("unknown frame element '{0}'")]
    UnknownElement(String),

    #[error("empty focal set carries mass {0}")]
    EmptyFocalSet(f64),

    #[error("negative or non-finite mass {0}")]
    InvalidMass(f64),

    #[error("masses sum to {}", short(*.0))]
    MassSum(f64),

    #[error("total contradiction: conflict {conflict}")]
    TotalConflict { conflict: f64 },

    #[error("discount factor {0} outside [0, 1]")]
    InvalidDiscount(f64),

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid corpus: {0}")]
    InvalidCorpus(String),

    #[error("counting evidence has {blocks} subsets but the prior only supports up to {r_max}")]
    TooManySubsets { blocks: usize, r_max: usize },

    #[error("prior is incompatible with every supported subset count")]
    IncompatiblePrior,

    #[error("invalid track graph: {0}")]
    InvalidGraph(String),

    #[error("enumeration oracle refuses graphs with {n} vertices (limit {limit})")]
    OracleLimit { n: usize, limit: usize },

    #[error("invalid decision problem: {0}")]
    InvalidDecision(String),

    #[error("invalid scenario config: {0}")]
    InvalidScenario(String),
}

/// Renders a float with at most 12 decimals and no trailing zeros.
fn short(x: f64) -> String {
    let s = format!("{x:.12}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".into()
    } else {
        s.to_string()
    }
}
