//! Error type shared across the crate.

use crate::field::Point;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The conductivity evaluated non-positive somewhere, breaking uniform
    /// ellipticity.
    #[error("ellipticity violation: kappa({x}, {y}) = {value} <= 0")]
    EllipticityViolation { x: f64, y: f64, value: f64 },

    /// A point fell outside the closed domain.
    #[error("point ({x}, {y}) is outside the domain", x = .0[0], y = .0[1])]
    OutOfDomain(Point),

    /// A supposedly SPD system failed to factorize or solve accurately.
    #[error("singular system: {0}")]
    SingularSystem(String),

    /// Two Gaussian fields do not share a grid / weight layout.
    #[error("incompatible fields: {0}")]
    IncompatibleFields(String),

    /// A sensor location could not be resolved against the prior.
    #[error("sensor location ({x}, {y}) not resolvable against the prior", x = .0[0], y = .0[1])]
    SensorLocation(Point),

    /// Conditioning on observations failed numerically.
    #[error("conditioning failed: {0}")]
    Conditioning(String),

    /// An adaptive quadrature did not reach its accuracy goal.
    #[error("quadrature accuracy not reached: {0}")]
    QuadratureAccuracy(String),

    /// Generic numerical failure (non-PSD matrix, failed decomposition, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Configuration file / field validation failure.
    #[error("config error: {0}")]
    Config(String),

    /// A numerical failure tagged with the experiment coordinates at which
    /// it occurred.
    #[error("at h={h}{}: {source}", .epsilon.map(|e| format!(", epsilon={e}")).unwrap_or_default())]
    AtLevel {
        h: f64,
        epsilon: Option<f64>,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Wrap a downstream error with the (h, epsilon) coordinates of the
    /// experiment level that produced it.
    pub fn at_level(self, h: f64, epsilon: Option<f64>) -> Error {
        Error::AtLevel {
            h,
            epsilon,
            source: Box::new(self),
        }
    }

    /// True for errors that indicate a bad configuration rather than a
    /// numerical failure at run time.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::InvalidArgument(_))
    }
}
