use thiserror::Error;

pub type Result<T> = std::result::Result<T, NpnsError>;

#[derive(Debug, Error)]
pub enum NpnsError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e})")]
    SolverDivergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("exponential overflow guard tripped: max |z*phi| = {max_abs:.3} exceeds {limit}")]
    Overflow { max_abs: f64, limit: f64 },

    #[error("Newton iteration failed: {message} (residual history: {history:?})")]
    Newton { message: String, history: Vec<f64> },

    #[error(
        "alpha bracket failure: integral {at_low:.6e} at alpha=1e-12 and {at_high:.6e} at alpha=1e6 do not bracket target {target:.6e}"
    )]
    Bracket {
        at_low: f64,
        at_high: f64,
        target: f64,
    },

    #[error("time step {dt:.3e} violates CFL limit; admissible dt = {admissible:.3e}")]
    Cfl { dt: f64, admissible: f64 },

    #[error("positivity failure: species {species} reached {min:.3e} at cell {cell}")]
    Positivity {
        species: usize,
        min: f64,
        cell: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("snapshot format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
