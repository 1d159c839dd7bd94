use thiserror::Error;

/// Errors produced by the model, counting and inference routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum BctError {
    #[error("invalid alphabet size {0}: at least 2 symbols are required")]
    InvalidAlphabet(usize),

    #[error("symbol {symbol} is out of range for an alphabet of size {m}")]
    SymbolOutOfRange { symbol: usize, m: usize },

    #[error("structural error: {0}")]
    Structure(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("refusing to enumerate {projected} models (cap is {cap})")]
    TooManyModels { projected: u128, cap: u128 },

    #[error("lifted chain has {states} states (cap is {cap})")]
    TooManyStates { states: u128, cap: u128 },

    #[error("chain is not ergodic: {0}")]
    NotErgodic(String),

    #[error("power iteration stopped after {iterations} iterations with residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("context {0} has zero stationary mass")]
    ZeroMass(String),

    #[error("sequence has zero probability: symbol {symbol} follows context {context}")]
    ZeroProbability { context: String, symbol: usize },
}

pub type Result<T> = std::result::Result<T, BctError>;

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(BctError::Parameter(format!(
            "beta must lie strictly between 0 and 1, got {beta}"
        )))
    }
}
