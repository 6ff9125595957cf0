use thiserror::Error;

use crate::sampler::SampleSet;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("model has no inverse map")]
    InverseUnavailable,

    #[error("inverse map failed at the requested point: {0}")]
    InverseFailed(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("parameter {0:?} lies outside the declared parameter space")]
    OutsideParamSpace(Vec<f64>),

    #[error("subset count C({n}, {p}) = {count} exceeds the enumeration cap of {cap}")]
    TooManySubsets { n: usize, p: usize, count: u128, cap: u128 },

    #[error("model provides no likelihood; density tabulation is not possible")]
    LikelihoodUnavailable,

    #[error("density is not integrable on the grid: {0}")]
    NonIntegrable(String),

    #[error("cdf is not monotone in the parameter: {0}")]
    NotMonotone(String),

    #[error("invalid cdf: {0}")]
    InvalidCdf(String),

    #[error("requested quantile level {level} is not crossed by the cdf on the grid")]
    QuantileOutOfRange { level: f64 },

    #[error(
        "proposal budget of {budget} exhausted with {accepted} of {target} draws accepted"
    )]
    BudgetExhausted { budget: u64, accepted: usize, target: usize, partial: Box<SampleSet> },

    #[error("argmin refinement moved more than one grid cell (axis {axis}); the search grid is too coarse")]
    GridTooCoarse { axis: usize },

    #[error("exact-fit event has zero empirical mass: no acceptance in {proposals} proposals")]
    ZeroMassEvent { proposals: u64 },

    #[error("statistic is not ancillary: output varies with the parameter (max deviation {max_dev:.3e})")]
    NonAncillary { max_dev: f64 },

    #[error("root solve failed: {0}")]
    SolverFailure(String),

    #[error("jacobian vanishes on too much of the grid ({zero} of {total} nodes)")]
    ZeroJacobian { zero: usize, total: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("coverage run aborted: {failed} of {attempted} replications failed interval construction")]
    CoverageAborted { failed: usize, attempted: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
