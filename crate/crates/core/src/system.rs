//! Continuous-time dynamics interface consumed by the discretizer.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Value and first-order sensitivities of `f(x, u)` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Linearization {
    pub f: DVector<f64>,
    /// `∂f/∂x`
    pub a: DMatrix<f64>,
    /// `∂f/∂u`
    pub b: DMatrix<f64>,
}

/// Time-dilated linearization: `F = s f`, `A = s ∂f/∂x`, `B = s ∂f/∂u`, `S = ∂F/∂s = f`.
#[derive(Debug, Clone, PartialEq)]
pub struct DilatedLinearization {
    pub f: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub s: DVector<f64>,
}

impl Linearization {
    pub fn dilate(self, s: f64) -> Result<DilatedLinearization> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::domain(format!("dilation factor must be positive, got {s}")));
        }
        Ok(DilatedLinearization {
            f: &self.f * s,
            a: self.a * s,
            b: self.b * s,
            s: self.f,
        })
    }
}

/// Autonomous dynamics `ẋ = f(x, u)` with analytic Jacobians.
pub trait ContinuousSystem {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    fn derivative(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>>;
    fn linearize(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<Linearization>;
}

/// Affine time-invariant system `ẋ = A x + B u + c`.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DVector<f64>,
}

impl LinearSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Self {
        let n = a.nrows();
        Self { a, b, c: DVector::zeros(n) }
    }

    pub fn with_drift(mut self, c: DVector<f64>) -> Self {
        self.c = c;
        self
    }

    /// Position/velocity double integrator with unit-mass force input, `n` axes.
    pub fn double_integrator(axes: usize) -> Self {
        let n = 2 * axes;
        let mut a = DMatrix::zeros(n, n);
        let mut b = DMatrix::zeros(n, axes);
        for i in 0..axes {
            a[(i, axes + i)] = 1.0;
            b[(axes + i, i)] = 1.0;
        }
        Self::new(a, b)
    }
}

impl ContinuousSystem for LinearSystem {
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    fn control_dim(&self) -> usize {
        self.b.ncols()
    }

    fn derivative(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(&self.a * x + &self.b * u + &self.c)
    }

    fn linearize(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<Linearization> {
        Ok(Linearization {
            f: self.derivative(x, u)?,
            a: self.a.clone(),
            b: self.b.clone(),
        })
    }
}
