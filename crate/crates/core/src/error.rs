use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter lies outside the domain where the model is defined.
    #[error("invalid value for `{field}`: {reason}")]
    Domain { field: &'static str, reason: String },

    /// The requested configuration is valid but has no closed form here
    /// (e.g. detuned photons on an analytic path).
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// Adaptive quadrature ran out of subdivisions before meeting tolerance.
    #[error("quadrature did not converge: estimate {estimate:.6e} with error {achieved:.3e} (requested {requested:.3e})")]
    Quadrature {
        estimate: f64,
        achieved: f64,
        requested: f64,
    },

    /// The asymptotic horizon search did not settle.
    #[error("transition probability did not converge after {horizons} horizons (last change {last_change:.3e}, last value {last_value:.9})")]
    Asymptote {
        horizons: usize,
        last_change: f64,
        last_value: f64,
    },

    /// The finite mode grid cannot represent the incident pulse.
    #[error("mode grid captures only {captured:.5} of the pulse energy (required {required:.5})")]
    GridCapture { captured: f64, required: f64 },

    /// Integrator produced a non-finite amplitude.
    #[error("non-finite amplitude encountered at t = {t}")]
    NonFinite { t: f64 },
}

impl Error {
    pub(crate) fn domain(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            field,
            reason: reason.into(),
        }
    }
}
