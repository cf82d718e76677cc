use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure modes shared by the integrator, the templates and the analysis tools.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("event location in mode {mode} near t = {time} did not converge (|guard| = {residual:e})")]
    NonconvergentEvent { mode: usize, time: f64, residual: f64 },

    #[error("step size underflow at t = {time} (h = {step:e})")]
    StepUnderflow { time: f64, step: f64 },

    #[error("degenerate execution in mode {mode} at t = {time}: {reason}")]
    Degenerate { mode: usize, time: f64, reason: String },

    #[error("invalid touchdown velocity ({vx}, {vz}): {reason}")]
    InvalidTouchdown { vx: f64, vz: f64, reason: String },

    #[error("inversion failed: {0}")]
    InversionFailure(String),

    #[error("fixed point not found: {0}")]
    FixedPointNotFound(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64 },

    #[error("attitude inertia block is singular (i_b = {i_b}, i_t = {i_t})")]
    SingularM2 { i_b: f64, i_t: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
