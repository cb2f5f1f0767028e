use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("meshes are not nested: {coarse} cells vs {fine} cells")]
    NonNestedMeshes { coarse: usize, fine: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("function has no H1 seminorm available: {0}")]
    MissingSeminorm(String),

    #[error("quadrature produced a non-finite value on cell {cell}")]
    NonFiniteQuadrature { cell: usize },

    #[error("Newton iteration did not converge after {iters} iterations (residual {residual:e})")]
    NewtonDiverged { iters: usize, residual: f64 },

    #[error("singular state system: {0}")]
    SingularSystem(String),

    #[error("rate fit needs at least two positive points, got {0}")]
    InsufficientData(usize),

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown config key `{0}`")]
    UnknownKey(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
