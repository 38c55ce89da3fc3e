use thiserror::Error;

/// Errors raised by the separation, feedback and retrieval routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("all weights are zero")]
    AllZero,
    #[error("negative weight {value} at index {index}")]
    NegativeWeight { index: usize, value: f64 },
    #[error("vector has length {got}, vocabulary has {expected} terms")]
    LengthMismatch { expected: usize, got: usize },
    #[error("distributions are defined over different vocabularies")]
    VocabMismatch,
    #[error("vocabulary needs at least 2 terms, got {0}")]
    VocabularyTooSmall(usize),
    #[error("duplicate term `{0}` in vocabulary")]
    DuplicateTerm(String),
    #[error("lambda {0} is outside its legal range")]
    LambdaOutOfRange(f64),
    #[error("lambda {lambda} is below the lower bound {lower}")]
    LambdaBelowBound { lambda: f64, lower: f64 },
    #[error("infinite divergence: p > 0 where q = 0 at index {index}")]
    InfiniteDivergence { index: usize },
    #[error("negative entry {value} at index {index}")]
    NegativeEntry { index: usize, value: f64 },
    #[error("seed distribution has no positive entry")]
    DegenerateSeed,
    #[error("seed distribution is uniform, correlation is undefined")]
    UniformSeed,
    #[error("lambda grid is invalid: {0}")]
    InvalidGrid(String),
    #[error("feedback set has no counted terms")]
    EmptyFeedback,
    #[error("counted term at index {index} has zero mixture probability")]
    ZeroMixtureProbability { index: usize },
    #[error("M-step normalizer is zero")]
    ZeroDenominator,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("cannot place {zeros} zeros in a distribution over {m} terms")]
    ZerosTooLarge { m: usize, zeros: usize },
    #[error("duplicate document id `{0}`")]
    DuplicateDocId(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("line {line}: {message}")]
    MalformedRecord { line: usize, message: String },
    #[error("no relevance judgments for query `{0}`")]
    MissingQrels(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of the arithmetic itself, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::InfiniteDivergence { .. }
                | Error::NegativeEntry { .. }
                | Error::ZeroMixtureProbability { .. }
                | Error::ZeroDenominator
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
