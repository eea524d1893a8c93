use crate::field::Point;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An invalid parameter. `field` is a dotted path such as `hough.r_min`.
    #[error("invalid configuration `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("point ({}, {}) lies outside the domain", .0.x, .0.y)]
    DomainViolation(Point),

    #[error("model has no training data")]
    EmptyModel,

    #[error("kernel matrix is not positive definite{}", describe_duplicates(.duplicates))]
    Singular { duplicates: Vec<Point> },

    #[error("diagnostic undefined: {0}")]
    UndefinedDiagnostic(&'static str),

    #[error("degenerate division: {0}")]
    Degenerate(&'static str),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("step {step}, agent {agent}: {source}")]
    Step {
        step: usize,
        agent: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("field table: {0}")]
    Table(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

fn describe_duplicates(points: &[Point]) -> String {
    if points.is_empty() {
        return String::new();
    }
    let list: Vec<String> = points
        .iter()
        .map(|p| format!("({}, {})", p.x, p.y))
        .collect();
    format!(" (duplicate training points: {})", list.join(", "))
}
