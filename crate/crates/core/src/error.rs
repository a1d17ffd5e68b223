use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("gamma = {0} outside (1, 3): the force regularity omega0^(1/(gamma-1)-1) in L^2 requires 1 < gamma < 3")]
    GammaOutOfRange(f64),

    #[error("profile violates the physical vacuum condition: {0}")]
    VacuumViolation(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("mollified density lost positivity at x = {x} (value {value:e}); kappa too large for this profile")]
    PositivityLoss { x: f64, value: f64 },

    #[error("regularization scale kappa = {0} is not admissible (need 0 < kappa and 1/|ln kappa| < 1/2)")]
    InvalidKappa(f64),

    #[error("compatibility order {requested} above supported maximum {max}")]
    UnsupportedOrder { requested: usize, max: usize },

    #[error("field does not vanish at the endpoints (u(0) = {left:e}, u(1) = {right:e})")]
    EndpointContract { left: f64, right: f64 },

    #[error("frozen geometry leaves 1/2 < eta' < 3/2 at t = {t} (eta' = {value}); shrink the horizon below {t}")]
    GeometryBound { t: f64, value: f64 },

    #[error("flow map not strictly increasing at t = {t}")]
    NotInjective { t: f64 },

    #[error("singular weighted mass matrix (quadrature too coarse?)")]
    SingularMass,

    #[error("implicit step rejected at t = {t}: residual {residual:e} stagnates")]
    StepRejected { t: f64, residual: f64 },

    #[error("fixed-point iteration diverges (successive ratios >= 1: {ratios:?}); reduce the horizon T")]
    Divergence { ratios: Vec<f64> },

    #[error("fixed-point iteration did not reach tol {tol:e} in {iters} iterations (last residual {last:e})")]
    NotConverged { iters: usize, tol: f64, last: f64 },

    #[error("need at least {need} residuals, got {got}")]
    TooFewResiduals { need: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
