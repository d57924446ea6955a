use alloc::string::String;

/// Errors raised by the estimation core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DsseError {
    #[error("network structure: {0}")]
    Structure(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("correlation undefined for {0}: series has zero variance")]
    ZeroVariance(String),

    #[error("covariance is not positive semidefinite (min eigenvalue {min_eigenvalue:e}); repair the correlation matrix with nearest_pd_correlation")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("degenerate measurement set: measured-block covariance is singular at pivot {pivot}")]
    DegenerateMeasurements { pivot: usize },

    #[error("not observable: {0}")]
    NotObservable(String),

    #[error("did not converge: {0}")]
    NotConverged(String),

    #[error("angle variance undefined for state {0}: zero mean magnitude")]
    ZeroMagnitude(usize),

    #[error("impedance magnitude cannot be preserved on branch {from}->{to}: scaled resistance {scaled_r} exceeds |Z| = {magnitude}")]
    RxInfeasible {
        from: u32,
        to: u32,
        scaled_r: f64,
        magnitude: f64,
    },
}

pub type Result<T> = core::result::Result<T, DsseError>;
