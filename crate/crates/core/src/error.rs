use alloc::string::String;

/// Errors raised by the solvers in this crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("potential has harmonics up to {harmonics} but the Fourier truncation is {n_fourier}")]
    HarmonicsExceedTruncation { harmonics: usize, n_fourier: usize },

    #[error("singular block at Hermite level {level}")]
    SingularBlock { level: usize },

    #[error("singular matrix")]
    SingularMatrix,

    #[error("null space of the reduced level-0 system is not one-dimensional ({0})")]
    NullSpace(&'static str),

    #[error("solvability residual {residual:e} exceeds tolerance {tolerance:e}")]
    Solvability { residual: f64, tolerance: f64 },

    #[error("right-hand side is not mean zero: <rhs, 1> = {mean:e}")]
    NotMeanZero { mean: f64 },

    #[error("quadrature too coarse: need at least {needed} nodes in {axis}, got {got}")]
    QuadratureTooCoarse {
        axis: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("order {order}: solvability of the cell-problem chain fails (residual {residual:e})")]
    ChainSolvability { order: usize, residual: f64 },

    #[error("order {order}: drift coefficient forms disagree ({f_form:e} vs {phi_form:e})")]
    VelocityFormsDisagree {
        order: usize,
        f_form: f64,
        phi_form: f64,
    },

    #[error("requested order {requested} exceeds available order {available}")]
    OrderTooHigh { requested: usize, available: usize },

    #[error("trajectory {trajectory} produced a non-finite state")]
    NonFiniteTrajectory { trajectory: u64 },

    #[error("critical force is only defined for a single-cosine potential")]
    CriticalForceUndefined,

    #[error("truncation did not converge: top-level ratio {ratio:e} at {n_hermite} Hermite levels")]
    Unconverged { n_hermite: usize, ratio: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;
