use thiserror::Error;

/// Failure modes shared by every module in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("evaluation point lies on a conductor (distance {distance:.3e} m)")]
    EvaluationOnWire { distance: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("frequency {frequency} rad/s is not a rational multiple (denominator <= {max_denominator}) of base {base} rad/s")]
    IncommensurateFrequencies {
        frequency: f64,
        base: f64,
        max_denominator: u64,
    },

    #[error("{what} did not converge")]
    NoConvergence { what: String },

    #[error("search left the bounding domain at ({x:.4e}, {y:.4e}, {z:.4e}) m")]
    EscapedDomain { x: f64, y: f64, z: f64 },

    #[error("stationary point is not a minimum (eigenvalue {eigenvalue:.3e})")]
    NotAMinimum { eigenvalue: f64 },

    #[error("trap minimum lies outside the depth grid")]
    MinimumOutsideGrid,

    #[error("configuration is not trapping: escape at threshold {threshold:.3e} J")]
    UntrappedConfiguration { threshold: f64 },

    #[error("gravity cannot be supported: required sin(phi) = {required_sin:.4}")]
    Unsupportable { required_sin: f64 },

    #[error("least-squares fit is ill-conditioned (condition estimate {condition:.3e})")]
    IllConditionedFit { condition: f64 },

    #[error("integrator step size underflow at t = {t:.6e} s")]
    StepSizeUnderflow { t: f64 },

    #[error("no dominant spectral peak below the cutoff")]
    NoDominantPeak,

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn no_convergence(what: impl Into<String>) -> Self {
        Error::NoConvergence { what: what.into() }
    }

    /// True for errors that come from bad input rather than a numerical failure.
    pub fn is_configuration(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_) | Error::Config { .. } | Error::IncommensurateFrequencies { .. }
        )
    }
}
