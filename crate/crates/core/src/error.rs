use thiserror::Error;

/// Errors raised by model construction, the mechanism and the checkers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MechError {
    #[error("dimension mismatch: {left} vs {right}")]
    Dimension { left: usize, right: usize },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("infeasible realization: gamma {gamma} exceeds {bound_name} {bound}")]
    Feasibility {
        gamma: f64,
        bound: f64,
        bound_name: &'static str,
    },

    #[error("need at least {required} bids, got {got}")]
    Arity { required: usize, got: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported payment scheme for this check: {0}")]
    UnsupportedScheme(String),
}

pub type Result<T> = std::result::Result<T, MechError>;

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(MechError::Validation(format!(
            "{name} must be finite, got {value}"
        )))
    }
}

pub(crate) fn ensure_nonneg(name: &str, value: f64) -> Result<()> {
    ensure_finite(name, value)?;
    if value < 0.0 {
        return Err(MechError::Validation(format!(
            "{name} must be nonnegative, got {value}"
        )));
    }
    Ok(())
}
