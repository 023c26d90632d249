use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates its documented domain.
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Mode order beyond what the log-factorial tables support.
    #[error("mode order p+l = {order} exceeds the supported maximum {max}")]
    ModeOrderOutOfRange { order: usize, max: usize },

    /// The requested transmission scheme cannot be realized on this channel.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// A user receives no line-of-sight power from any access point.
    #[error("user {user} is not covered by any access point")]
    UncoveredUser { user: usize },

    /// Inter-group leakage is too large for the high-SNR simplification.
    #[error("outer precoder leakage {residual:.3e} exceeds {threshold:.1e}; inter-group interference cannot be dropped")]
    Leakage { residual: f64, threshold: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors that describe an unrealizable configuration rather
    /// than bad input.
    pub fn is_infeasibility(&self) -> bool {
        matches!(
            self,
            Error::Infeasible(_) | Error::UncoveredUser { .. } | Error::Leakage { .. }
        )
    }
}
