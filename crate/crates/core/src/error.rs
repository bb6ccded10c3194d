use thiserror::Error;

/// Errors raised by model validation and the estimators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("design matrix is not of full column rank (numerical rank {rank} < {cols})")]
    RankDeficient { rank: usize, cols: usize },
    #[error("{groups} covariate groups cannot identify {params} coefficients")]
    TooFewGroups { groups: usize, params: usize },
    #[error("group {group} has {count} replicate(s); weighted least squares needs at least 2")]
    NoReplicates { group: usize, count: usize },
    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },
    #[error("covariate rows have inconsistent dimensions ({expected} vs {found})")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("empty design or sample")]
    Empty,
    #[error("quantile level {0} is not in the open interval (0, 1)")]
    InvalidTau(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("linear system is numerically singular")]
    SingularSystem,
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex stopped after {0} pivots without reaching optimality")]
    MaxIterations(usize),
    #[error("covariate {index} is zero, so the reciprocal scale rule is undefined")]
    DegenerateCovariate { index: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures of the numerical routines as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularSystem
                | Error::NotPositiveDefinite
                | Error::Unbounded
                | Error::MaxIterations(_)
        )
    }
}
