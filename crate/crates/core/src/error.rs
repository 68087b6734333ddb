use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpikeError {
    #[error("derivative order {requested} exceeds the supported maximum {max}")]
    DerivOrderUnsupported { requested: usize, max: usize },

    #[error("{what} = {value} lies outside {domain}")]
    DomainViolation {
        what: &'static str,
        value: f64,
        domain: String,
    },

    #[error("closed-form correlation requires the Gaussian kernel with Lebesgue sampling")]
    UnsupportedClosedForm,

    #[error("Gram matrix is rank deficient: eigenvalue ratio {ratio:e} not above {threshold:e}")]
    RankDeficient { ratio: f64, threshold: f64 },

    #[error("{tuples} sample tuples exceed the enumeration budget of {budget}")]
    TooManySamples { tuples: u128, budget: u128 },

    #[error("Lebesgue sampling has infinite mass and cannot be normalized")]
    InfiniteMass,

    #[error("normalizer is not positive at x = {x}")]
    NonPositiveNormalizer { x: f64 },

    #[error("solver stopped after {iterations} iterations without meeting tolerance")]
    NotConverged { iterations: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, SpikeError>;

impl From<crate::linalg::RankDeficiency> for SpikeError {
    fn from(r: crate::linalg::RankDeficiency) -> Self {
        SpikeError::RankDeficient {
            ratio: r.min_ratio,
            threshold: r.threshold,
        }
    }
}
