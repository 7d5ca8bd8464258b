use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Ambient and immersion constants: holomorphic sectional curvature `4 rho`
/// and mean curvature length `|H| = 2b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub rho: f64,
    pub b: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamsError {
    #[error("b must be a positive finite number, got {0}")]
    NonpositiveB(f64),
    #[error("rho must be finite, got {0}")]
    NonfiniteRho(f64),
    #[error("the ambient space must be nonflat (rho = 0)")]
    FlatAmbient,
}

impl ModelParams {
    pub const fn new(rho: f64, b: f64) -> Self {
        ModelParams { rho, b }
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        if !self.rho.is_finite() {
            return Err(ParamsError::NonfiniteRho(self.rho));
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(ParamsError::NonpositiveB(self.b));
        }
        Ok(())
    }

    /// Validation for the surface pipeline, which needs `rho != 0`.
    pub fn validate_nonflat(&self) -> Result<(), ParamsError> {
        self.validate()?;
        if self.rho == 0.0 {
            return Err(ParamsError::FlatAmbient);
        }
        Ok(())
    }

    /// `rho/2 (-2 + 3 sin^2 alpha)`, the offset between `|c|^2` and `|a|^2`.
    pub fn ricci_offset(&self, alpha: f64) -> f64 {
        let s = alpha.sin();
        0.5 * self.rho * (-2.0 + 3.0 * s * s)
    }
}
