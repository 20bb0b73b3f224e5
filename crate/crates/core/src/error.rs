use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("geometry error at site {site}: {reason}")]
    Geometry { site: usize, reason: String },

    #[error("singular operator: mass {mass} leaves a constant zero mode on a periodic leaf")]
    SingularOperator { mass: f64 },

    #[error("operator is not self-adjoint under the leaf measure (residual {residual:e})")]
    NotSelfAdjoint { residual: f64 },

    #[error("negative eigenvalue {eigenvalue:e} in spectral square root")]
    Spectrum { eigenvalue: f64 },

    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: usize, found: usize },

    #[error("objects built on different leaves (basis {expected:?} vs {found:?})")]
    BasisMismatch { expected: u64, found: u64 },

    #[error("wave functional node: |Psi/Psi0| = {magnitude:e}")]
    Node { magnitude: f64 },

    #[error("step size underflow after {halvings} halvings (max |dphi| = {max_dphi:e})")]
    StepUnderflow { halvings: u32, max_dphi: f64 },

    #[error("no time-like eigenvector: {reason}")]
    DegenerateFlow { reason: String },

    #[error("foliation collapse: leaf is not space-like between sites {site} and {next}")]
    FoliationCollapse { site: usize, next: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Shape { expected, found })
    }
}
