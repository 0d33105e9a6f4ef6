use thiserror::Error;

/// Failures raised by the numerical layers.
///
/// Every variant is a domain problem with the inputs, never an internal
/// invariant violation; the CLI maps all of them to exit code 2.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("cell of length {length} is not shorter than pi")]
    CellTooLarge { length: f64 },
    #[error("centroid of cell {cell} is undefined (|m1| = {modulus:e})")]
    UndefinedCentroid { cell: usize, modulus: f64 },
    #[error("finite-difference step {eps:e} breaks the ordering (smallest gap {gap:e})")]
    PerturbationTooLarge { eps: f64, gap: f64 },
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("orbit failed at step {step}: {source}")]
    Orbit {
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_step(self, step: usize) -> Error {
        Error::Orbit {
            step,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
