use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("inconsistent input: {0}")]
    Consistency(String),

    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: expected width {expected}, got {found}")]
    Shape { expected: usize, found: usize },

    #[error("training diverged at epoch {epoch} (learning rate {learning_rate})")]
    Divergence { epoch: usize, learning_rate: f64 },

    #[error("t-SNE gradient became non-finite at iteration {iteration}")]
    EmbeddingDivergence { iteration: usize },

    #[error("perplexity calibration did not converge for row {row} (entropy off by {gap:.3e} bits)")]
    Calibration { row: usize, gap: f64 },

    #[error("exact Shapley values need 2^{features} coalitions; limit is {limit} features, use mc_shapley instead")]
    TooManyFeatures { features: usize, limit: usize },

    #[error("class {class} has {count} sample(s); stratified split needs at least 2")]
    Stratification { class: usize, count: usize },

    #[error("sample {index} at ({x}, {y}) lies outside the grid bounds")]
    OutsideGrid { index: usize, x: f64, y: f64 },

    #[error("index {index} out of range for {len} samples")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("missing artifact {}: run the `{stage}` stage first", path.display())]
    MissingArtifact { path: PathBuf, stage: &'static str },

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
