use thiserror::Error;

use crate::PartyId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("matrix is rank deficient (smallest/largest singular value ratio {ratio:e})")]
    RankDeficient { ratio: f64 },

    #[error("invalid mask dimensions: k = {width} must exceed f = {features} >= 1")]
    InvalidMaskDims { features: usize, width: usize },

    #[error("all-zero rows are not allowed (rows {rows:?})")]
    ZeroRows { rows: Vec<usize> },

    #[error("invalid party id {0:?}: expected 1 to 8 printable ASCII bytes")]
    InvalidPartyId(String),

    #[error("unknown party {0}")]
    UnknownParty(PartyId),

    #[error("party {0} is already registered")]
    DuplicateParty(PartyId),

    #[error("masked width mismatch: {left} vs {right} (parties did not share the same seed and k)")]
    WidthMismatch { left: usize, right: usize },

    #[error("incomplete gram matrix, missing blocks {missing:?}")]
    IncompleteGram { missing: Vec<(usize, usize)> },

    #[error("payload store does not match gram segments: {0}")]
    StoreMismatch(String),

    #[error("invalid kernel parameters: {0}")]
    InvalidKernel(String),

    #[error("training data contains a single class")]
    SingleClass,

    #[error("invalid labels: {0}")]
    InvalidLabels(String),

    #[error("solver did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("degenerate input for roc auc: {0}")]
    DegenerateAuc(String),

    #[error("class {label} has {count} members, stratified {folds}-fold split needs at least {folds}")]
    Stratification { label: i64, count: usize, folds: usize },

    #[error("csv error: {0}")]
    Csv(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("frame error: {0}")]
    Frame(String),

    #[error("signature verification failed")]
    SignatureInvalid,

    #[error("decryption failed")]
    DecryptionFailed,

    #[error("registry error: {0}")]
    Registry(String),

    #[error("timed out waiting for {0}")]
    Timeout(String),

    #[error("remote party reported: {0}")]
    Remote(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Csv(err.to_string())
    }
}
