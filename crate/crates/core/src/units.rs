//! Physical constants for a run. Natural units (hbar = mass = 1) by default;
//! both particles of a pair share the single mass parameter.

use serde::{Deserialize, Serialize};

use crate::error::FieldError;
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitSystem<R> {
    pub hbar: R,
    pub mass: R,
}

impl<R: Real> UnitSystem<R> {
    pub fn new(hbar: R, mass: R) -> Result<Self, FieldError> {
        if !(hbar > R::zero()) || !(mass > R::zero()) || !hbar.is_finite() || !mass.is_finite() {
            return Err(FieldError::InvalidGrid(format!(
                "hbar and mass must be finite and positive, got hbar={}, mass={}",
                hbar.as_f64(),
                mass.as_f64()
            )));
        }
        Ok(Self { hbar, mass })
    }

    pub fn natural() -> Self {
        Self { hbar: R::one(), mass: R::one() }
    }
}

impl<R: Real> Default for UnitSystem<R> {
    fn default() -> Self {
        Self::natural()
    }
}
