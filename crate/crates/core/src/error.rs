use thiserror::Error;

/// Errors raised while building or analysing a discretized manifold.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("non-manifold incidence: {0}")]
    NonManifold(String),

    #[error("non-orientable or inconsistently oriented mesh: {0}")]
    NonOrientable(String),

    #[error("mesh has empty boundary")]
    EmptyBoundary,

    #[error("degenerate simplex {index} in degree {degree} (volume {volume:e})")]
    DegenerateSimplex {
        degree: usize,
        index: usize,
        volume: f64,
    },

    #[error("unsupported dimension {0}; only n = 2 and n = 3 are supported")]
    UnsupportedDimension(usize),

    #[error("invalid degree {degree}: {msg}")]
    InvalidDegree { degree: usize, msg: String },

    #[error("cochain shape mismatch: {0}")]
    Shape(String),

    #[error("singular system in {context} (condition estimate {condition:e})")]
    SingularSystem { context: String, condition: f64 },

    #[error("representation mismatch composing {left} after {right}: {detail}")]
    Representation {
        left: String,
        right: String,
        detail: String,
    },

    #[error("input outside the image of {operator}: relative residual {residual:e} exceeds {tolerance:e}")]
    NotInImage {
        operator: String,
        residual: f64,
        tolerance: f64,
    },

    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),

    #[error("resolution {resolution} too small for {generator} (minimum {minimum})")]
    Resolution {
        generator: String,
        resolution: usize,
        minimum: usize,
    },

    #[error("unknown operator label `{0}`")]
    UnknownOperator(String),

    #[error("non-finite value at {0}")]
    NonFinite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Module the error originates from.
    pub fn module(&self) -> &'static str {
        match self {
            Error::Parse { .. } | Error::Io(_) | Error::Json(_) => "io",
            Error::NonManifold(_)
            | Error::NonOrientable(_)
            | Error::EmptyBoundary
            | Error::DegenerateSimplex { .. }
            | Error::UnsupportedDimension(_)
            | Error::Shape(_) => "mesh",
            Error::InvalidDegree { .. } | Error::SingularSystem { .. } => "dtn",
            Error::Representation { .. } | Error::NotInImage { .. } => "algebra",
            Error::UnknownGenerator(_) | Error::Resolution { .. } => "generators",
            Error::UnknownOperator(_) | Error::NonFinite(_) => "report",
        }
    }

    /// True for errors caused by the input rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::SingularSystem { .. } | Error::NonFinite(_) | Error::NotInImage { .. } | Error::Representation { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
