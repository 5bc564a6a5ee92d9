use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point {value} outside domain [{lo}, {hi}] in dimension {dim}")]
    OutOfDomain {
        dim: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("degenerate conditional density: total mass {0} is below the tail floor")]
    DegenerateCdf(f64),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("maxvol did not converge after {0} swaps")]
    MaxVolNoConvergence(usize),

    #[error("non-finite function value {value} at point {point:?}")]
    NonFinite { value: f64, point: Vec<f64> },

    #[error("layer {layer} (beta = {beta}) failed: {source}")]
    Layer {
        layer: usize,
        beta: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("dimension cap exceeded: d = {d} > {cap}")]
    DimensionCap { d: usize, cap: usize },

    #[error("identically zero density")]
    ZeroDensity,

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
