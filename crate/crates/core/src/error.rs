use thiserror::Error;

/// Errors surfaced by the library.
///
/// Precondition violations that indicate a programming bug (index out of
/// range, mismatched grid sizes) panic instead, like slice indexing does.
#[derive(Debug, Error)]
pub enum Error {
    #[error("piecewise drift needs breakpoints.len()+1 pieces, got {pieces} pieces for {breakpoints} breakpoints")]
    PieceCountMismatch { breakpoints: usize, pieces: usize },

    #[error("expected {breakpoints} breakpoint values, got {values}")]
    BreakpointValueCountMismatch { breakpoints: usize, values: usize },

    #[error("breakpoint index {index} out of range (k = {k})")]
    BreakpointIndexOutOfRange { index: usize, k: usize },

    #[error("problem is not admissible: {reason}")]
    InadmissibleProblem { reason: String },

    #[error(
        "inverse transform did not converge after {iterations} iterations (residual {residual:e})"
    )]
    InverseNoConvergence { iterations: usize, residual: f64 },

    #[error("closed-form reference requires a geometric Brownian motion problem (drift b*x, diffusion c*x, no breakpoints)")]
    NotGbm,

    #[error("rate fit needs at least 3 rows with positive error, got {usable}")]
    TooFewRatePoints { usable: usize },

    #[error("occupation study needs a drift with at least one breakpoint")]
    NoBreakpoints,

    #[error("invalid study configuration: {0}")]
    InvalidConfig(String),
}
