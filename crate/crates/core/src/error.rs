use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid interval [{a}, {b}]: lower bound must be strictly below upper bound")]
    InvalidInterval { a: f64, b: f64 },

    #[error("integrand is not finite at x = {x}")]
    NonFiniteSample { x: f64 },

    #[error("derivative is not finite at t = {t}")]
    NonFiniteDerivative { t: f64 },

    #[error(
        "{what}: quadrature did not converge (estimate {value}, last difference {error_estimate})"
    )]
    NotConverged {
        what: &'static str,
        value: f64,
        error_estimate: f64,
    },

    #[error("invalid {field} = {value}: {bound}")]
    InvalidParameter {
        field: &'static str,
        value: f64,
        bound: &'static str,
    },

    #[error("{what} = {value} is outside [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("E(z)^2 = {radicand} is not positive at z = {z}")]
    NegativeRadicand { z: f64, radicand: f64 },

    #[error("reservoir state is not finite at z = {z}")]
    NonFiniteState { z: f64 },

    #[error("reservoir went negative ({value}) at z = {z}; refine the grid")]
    NegativeReservoir { z: f64, value: f64 },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, value: f64, bound: &'static str) -> Self {
        Error::InvalidParameter {
            field,
            value,
            bound,
        }
    }
}
