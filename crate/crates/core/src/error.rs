use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate triangle (signed area {area:e})")]
    DegenerateTriangle { area: f64 },

    #[error("invalid conic: {0}")]
    InvalidConic(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    /// A triangulation violates one of the admissibility conditions. `condition` is the
    /// condition letter ('a'..'g') or `"T"` for the basic triangulation requirements.
    #[error("mesh condition ({condition}) violated at {simplex}: {message}")]
    MeshCondition {
        condition: &'static str,
        simplex: String,
        message: String,
    },

    #[error("BB polynomials live on different triangles")]
    TriangleMismatch,

    #[error("degree {0} exceeds the supported maximum")]
    DegreeTooLarge(usize),

    #[error("spline space error: {0}")]
    Space(String),

    #[error("point ({x}, {y}) is outside the triangulation")]
    PointLocation { x: f64, y: f64 },

    #[error(
        "singular or ill-conditioned matrix: pivot {pivot:e} at row {row}, condition estimate {condition_estimate:e}"
    )]
    SingularMatrix {
        row: usize,
        pivot: f64,
        condition_estimate: f64,
    },

    #[error("solver error: {0}")]
    Solver(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
