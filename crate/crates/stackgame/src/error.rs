//! Error types shared across the crate.

use std::fmt;

use thiserror::Error;

use crate::equilibrium::CaseDiagnostics;

/// One failed structural condition found while validating a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

/// Every condition that failed during validation, in the order checked.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn push(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            field: field.into(),
            message: message.into(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn mentions(&self, field: &str) -> bool {
        self.violations.iter().any(|v| v.field == field)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} validation failure(s):", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  {}: {}", v.field, v.message)?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario\n{0}")]
    Validation(ValidationReport),

    #[error("invalid delay spec (h={h}, alpha={alpha}, eta={eta}): {reason}")]
    InvalidDelaySpec {
        h: f64,
        alpha: f64,
        eta: f64,
        reason: &'static str,
    },

    #[error("derived eta2 = {eta2} lies outside (0, 1)")]
    EtaOutOfRange { eta2: f64 },

    #[error("degenerate premium band: c_F = {c_f} >= c_bar = {c_bar}")]
    DegenerateBand { c_f: f64, c_bar: f64 },

    #[error("premium fraction undefined at t={t}: P_D = {p_d}")]
    NonPositivePremiumDenominator { t: f64, p_d: f64 },

    #[error("no equilibrium case matched at t={t}: {0}", t = .0.t)]
    NoCaseMatched(Box<CaseDiagnostics>),

    #[error("quadrature did not reach tolerance on [{a}, {b}] (error estimate {estimate:e})")]
    QuadratureFailure { a: f64, b: f64, estimate: f64 },

    #[error("fixed-point iteration did not converge after {iterations} iterations (last step {last_step:e})")]
    NoConvergence { iterations: usize, last_step: f64 },

    #[error("scenario file: {0}")]
    ScenarioFile(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid simulation config: {0}")]
    SimConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
