use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid tableau: {0}")]
    InvalidTableau(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown scheme `{name}`; available: {}", available.join(", "))]
    UnknownScheme { name: String, available: Vec<String> },

    #[error("matrix is numerically singular (pivot {pivot:.3e} at index {index})")]
    Singular { index: usize, pivot: f64 },

    #[error("I - zeta*A is singular at zeta = {zeta}: pole of the stability function")]
    Pole { zeta: String },

    #[error("Newton iteration failed to converge in stage {stage} after {iterations} iterations (update norms: {history:?})")]
    NewtonDivergence {
        stage: usize,
        iterations: usize,
        history: Vec<f64>,
    },

    #[error("integration failed at step {step} (t = {time}): {source}")]
    Step {
        step: usize,
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("slope fit needs at least 3 points in the window, found {found}")]
    UnderfilledWindow { found: usize },

    #[error("study failed: every row errored ({0})")]
    StudyFailed(String),

    #[error("invalid search spec: {0}")]
    InvalidSearch(String),

    #[error("search found no verified scheme: {0}")]
    SearchFailed(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
