use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("stacked design matrix is rank deficient (rank {rank} < {cols} columns)")]
    RankDeficient { rank: usize, cols: usize },

    #[error("cluster `{0}` has no known error variance (required for Fay-Herriot data)")]
    MissingErrorVariance(String),

    #[error("invalid variance components: {0}")]
    InvalidVariance(String),

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("REML did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("Cholesky factorization failed: {0}")]
    CholeskyFailure(String),

    #[error("alpha = {0} is out of range (must lie in (0, 1) with an attainable order statistic)")]
    AlphaOutOfRange(f64),

    #[error("Beran critical value carries no per-cluster vector")]
    MissingPerCluster,

    #[error(
        "step-down quantile provider is not monotone: c = {larger} on a subset exceeds c = {smaller} on its superset"
    )]
    ProviderInconsistent { larger: f64, smaller: f64 },

    #[error("bootstrap replicate {replicate} produced a non-finite statistic")]
    RefitFailure { replicate: usize },

    #[error("replicate count {0} exceeds the seed stream space")]
    SeedOverflow(usize),

    #[error("empty cluster subset")]
    EmptySubset,

    #[error("invalid tube constants: {0}")]
    InvalidConstants(String),

    #[error("tube bound stays above alpha = {alpha} on the whole search bracket")]
    BoundUnattainable { alpha: f64 },

    #[error("tube bound is not monotone on the search bracket near c = {0}")]
    NonMonotoneBound(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
