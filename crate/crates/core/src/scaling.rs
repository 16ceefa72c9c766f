//! Nondimensionalization of states, controls and dilation factors.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reference units. Derived units: velocity `length/time`, force
/// `mass·length/time²`, angular rate `angle/time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleUnits {
    pub length: f64,
    pub mass: f64,
    pub time: f64,
    pub angle: f64,
}

impl Default for ScaleUnits {
    fn default() -> Self {
        Self { length: 1000.0, mass: 100_000.0, time: 2.0, angle: 1.0 }
    }
}

impl ScaleUnits {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("length", self.length), ("mass", self.mass), ("time", self.time), ("angle", self.angle)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("scale unit {name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

/// Diagonal map `physical = scale ⊙ scaled` for every variable class.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableScaling {
    pub state: DVector<f64>,
    pub control: DVector<f64>,
    pub dilation: f64,
}

impl VariableScaling {
    pub fn new(state: DVector<f64>, control: DVector<f64>, dilation: f64) -> Result<Self> {
        let all_positive = state.iter().chain(control.iter()).chain(std::iter::once(&dilation)).all(|v| *v > 0.0 && v.is_finite());
        if !all_positive {
            return Err(Error::config("scale constants must be positive and finite"));
        }
        Ok(Self { state, control, dilation })
    }

    /// Unit scaling.
    pub fn identity(nx: usize, nu: usize) -> Self {
        Self { state: DVector::from_element(nx, 1.0), control: DVector::from_element(nu, 1.0), dilation: 1.0 }
    }

    pub fn scale_state(&self, x: &DVector<f64>) -> DVector<f64> {
        x.component_div(&self.state)
    }

    pub fn unscale_state(&self, x: &DVector<f64>) -> DVector<f64> {
        x.component_mul(&self.state)
    }

    pub fn scale_control(&self, u: &DVector<f64>) -> DVector<f64> {
        u.component_div(&self.control)
    }

    pub fn unscale_control(&self, u: &DVector<f64>) -> DVector<f64> {
        u.component_mul(&self.control)
    }

    pub fn scale_dilation(&self, s: f64) -> f64 {
        s / self.dilation
    }

    pub fn unscale_dilation(&self, s: f64) -> f64 {
        s * self.dilation
    }
}
