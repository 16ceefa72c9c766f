//! Exact discretization of time-dilated dynamics linearized about a
//! propagated reference.
//!
//! Over one interval the reference state is propagated from the left node
//! with the interpolated reference control, and the variational equations
//!
//! ```text
//! Ψ_A'  = A Ψ_A                     Ψ_A(0)  = I
//! Ψ_B-' = A Ψ_B- + B (1 - τ)        Ψ_B-(0) = 0   (ZOH: + B)
//! Ψ_B+' = A Ψ_B+ + B τ              Ψ_B+(0) = 0   (ZOH: 0)
//! Ψ_S'  = A Ψ_S  + S                Ψ_S(0)  = 0
//! ```
//!
//! are integrated jointly with it, so every Jacobian is evaluated on the same
//! path. At `τ = 1⁻` the blocks give `A_k, B_k⁻, B_k⁺, S_k` and the propagated
//! endpoint `x_prop`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::ContinuousSystem;

pub const DEFAULT_SUBSTEPS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HoldKind {
    /// Piecewise-affine control between nodes.
    Foh,
    /// Control held at the left node value.
    Zoh,
}

/// Linearization point of one interval.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalReference {
    /// Interval number, used only to label errors.
    pub interval: usize,
    pub x_bar: DVector<f64>,
    pub u_bar_k: DVector<f64>,
    pub u_bar_k1: DVector<f64>,
    pub s_bar: f64,
    pub hold: HoldKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteUpdate {
    pub a: DMatrix<f64>,
    pub b_minus: DMatrix<f64>,
    pub b_plus: DMatrix<f64>,
    pub s: DVector<f64>,
    pub x_prop: DVector<f64>,
    /// `x_prop - (A x̄_k + B⁻ ū_k + B⁺ ū_{k+1} + S s̄)`
    pub residual: DVector<f64>,
}

impl DiscreteUpdate {
    /// Right-hand side of the absolute-variable update for arbitrary
    /// `(x_k, u_k, u_{k+1}, s)`.
    pub fn apply(&self, x: &DVector<f64>, u_k: &DVector<f64>, u_k1: &DVector<f64>, s: f64) -> DVector<f64> {
        &self.a * x + &self.b_minus * u_k + &self.b_plus * u_k1 + &self.s * s + &self.residual
    }
}

/// Control at dilated time `tau ∈ [0, 1)`.
pub fn interp_control(reference: &IntervalReference, tau: f64) -> Result<DVector<f64>> {
    if !(0.0..1.0).contains(&tau) {
        return Err(Error::domain(format!("dilated time must lie in [0, 1), got {tau}")));
    }
    Ok(control_at(reference, tau))
}

// Also valid at the closed end τ = 1, which the last RK4 stage needs.
fn control_at(reference: &IntervalReference, tau: f64) -> DVector<f64> {
    match reference.hold {
        HoldKind::Foh => &reference.u_bar_k * (1.0 - tau) + &reference.u_bar_k1 * tau,
        HoldKind::Zoh => reference.u_bar_k.clone(),
    }
}

fn check_reference(sys: &dyn ContinuousSystem, reference: &IntervalReference, substeps: usize) -> Result<()> {
    if substeps == 0 {
        return Err(Error::config("substeps must be at least 1"));
    }
    let (n, m) = (sys.state_dim(), sys.control_dim());
    if reference.x_bar.len() != n || reference.u_bar_k.len() != m || reference.u_bar_k1.len() != m {
        return Err(Error::Dimension(format!(
            "interval {}: reference sized ({}, {}, {}), system is ({n}, {m})",
            reference.interval,
            reference.x_bar.len(),
            reference.u_bar_k.len(),
            reference.u_bar_k1.len()
        )));
    }
    if !(reference.s_bar > 0.0) || !reference.s_bar.is_finite() {
        return Err(Error::domain(format!(
            "interval {}: dilation factor must be positive, got {}",
            reference.interval, reference.s_bar
        )));
    }
    Ok(())
}

fn diverged(reference: &IntervalReference, err: Error) -> Error {
    match err {
        Error::DivergedReference { .. } => err,
        other => Error::DivergedReference { interval: reference.interval, reason: other.to_string() },
    }
}

fn rk4<F>(y0: DVector<f64>, substeps: usize, mut rhs: F) -> Result<DVector<f64>>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let h = 1.0 / substeps as f64;
    let mut y = y0;
    for i in 0..substeps {
        let t = i as f64 * h;
        let k1 = rhs(t, &y)?;
        let k2 = rhs(t + 0.5 * h, &(&y + &k1 * (0.5 * h)))?;
        let k3 = rhs(t + 0.5 * h, &(&y + &k2 * (0.5 * h)))?;
        let k4 = rhs(t + h, &(&y + &k3 * h))?;
        y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    Ok(y)
}

/// RK4 propagation of the dilated nonlinear dynamics over `τ ∈ [0, 1)`,
/// starting from `reference.x_bar`.
pub fn propagate_nonlinear(
    sys: &dyn ContinuousSystem,
    reference: &IntervalReference,
    substeps: usize,
) -> Result<DVector<f64>> {
    check_reference(sys, reference, substeps)?;
    let s = reference.s_bar;
    let x = rk4(reference.x_bar.clone(), substeps, |tau, x| {
        let u = control_at(reference, tau);
        Ok(sys.derivative(x, &u)? * s)
    })
    .map_err(|e| diverged(reference, e))?;
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::DivergedReference {
            interval: reference.interval,
            reason: "non-finite propagated state".into(),
        });
    }
    Ok(x)
}

/// Layout of the augmented state `(x̄, Ψ_A, Ψ_B-, Ψ_B+, Ψ_S)`, column-major blocks.
struct Layout {
    n: usize,
    m: usize,
}

impl Layout {
    fn len(&self) -> usize {
        self.n + self.n * self.n + 2 * self.n * self.m + self.n
    }
    fn x(&self) -> std::ops::Range<usize> {
        0..self.n
    }
    fn phi_a(&self) -> std::ops::Range<usize> {
        let start = self.n;
        start..start + self.n * self.n
    }
    fn phi_bm(&self) -> std::ops::Range<usize> {
        let start = self.phi_a().end;
        start..start + self.n * self.m
    }
    fn phi_bp(&self) -> std::ops::Range<usize> {
        let start = self.phi_bm().end;
        start..start + self.n * self.m
    }
    fn phi_s(&self) -> std::ops::Range<usize> {
        let start = self.phi_bp().end;
        start..start + self.n
    }
}

/// Discretize one interval about its reference.
pub fn discretize_interval(
    sys: &dyn ContinuousSystem,
    reference: &IntervalReference,
    substeps: usize,
) -> Result<DiscreteUpdate> {
    check_reference(sys, reference, substeps)?;
    let (n, m) = (sys.state_dim(), sys.control_dim());
    let lay = Layout { n, m };
    let s_bar = reference.s_bar;
    let hold = reference.hold;

    let mut y0 = DVector::zeros(lay.len());
    y0.rows_mut(0, n).copy_from(&reference.x_bar);
    for i in 0..n {
        y0[lay.phi_a().start + i * n + i] = 1.0;
    }

    let y = rk4(y0, substeps, |tau, y| {
        let x = DVector::from_column_slice(&y.as_slice()[lay.x()]);
        let u = control_at(reference, tau);
        let lin = sys.linearize(&x, &u)?.dilate(s_bar)?;
        let phi_a = DMatrix::from_column_slice(n, n, &y.as_slice()[lay.phi_a()]);
        let phi_bm = DMatrix::from_column_slice(n, m, &y.as_slice()[lay.phi_bm()]);
        let phi_bp = DMatrix::from_column_slice(n, m, &y.as_slice()[lay.phi_bp()]);
        let phi_s = DVector::from_column_slice(&y.as_slice()[lay.phi_s()]);

        let (w_minus, w_plus) = match hold {
            HoldKind::Foh => (1.0 - tau, tau),
            HoldKind::Zoh => (1.0, 0.0),
        };
        let d_a = &lin.a * phi_a;
        let d_bm = &lin.a * phi_bm + &lin.b * w_minus;
        let d_bp = &lin.a * phi_bp + &lin.b * w_plus;
        let d_s = &lin.a * phi_s + &lin.s;

        let mut dy = DVector::zeros(lay.len());
        dy.as_mut_slice()[lay.x()].copy_from_slice(lin.f.as_slice());
        dy.as_mut_slice()[lay.phi_a()].copy_from_slice(d_a.as_slice());
        dy.as_mut_slice()[lay.phi_bm()].copy_from_slice(d_bm.as_slice());
        dy.as_mut_slice()[lay.phi_bp()].copy_from_slice(d_bp.as_slice());
        dy.as_mut_slice()[lay.phi_s()].copy_from_slice(d_s.as_slice());
        Ok(dy)
    })
    .map_err(|e| diverged(reference, e))?;

    if !y.iter().all(|v| v.is_finite()) {
        return Err(Error::DivergedReference {
            interval: reference.interval,
            reason: "non-finite discretization".into(),
        });
    }

    let x_prop = DVector::from_column_slice(&y.as_slice()[lay.x()]);
    let a = DMatrix::from_column_slice(n, n, &y.as_slice()[lay.phi_a()]);
    let b_minus = DMatrix::from_column_slice(n, m, &y.as_slice()[lay.phi_bm()]);
    let b_plus = match hold {
        HoldKind::Foh => DMatrix::from_column_slice(n, m, &y.as_slice()[lay.phi_bp()]),
        HoldKind::Zoh => DMatrix::zeros(n, m),
    };
    let s = DVector::from_column_slice(&y.as_slice()[lay.phi_s()]);
    let residual = &x_prop
        - (&a * &reference.x_bar + &b_minus * &reference.u_bar_k + &b_plus * &reference.u_bar_k1 + &s * s_bar);

    Ok(DiscreteUpdate { a, b_minus, b_plus, s, x_prop, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::LinearSystem;

    fn reference(hold: HoldKind, x: &[f64], uk: &[f64], uk1: &[f64], s: f64) -> IntervalReference {
        IntervalReference {
            interval: 1,
            x_bar: DVector::from_column_slice(x),
            u_bar_k: DVector::from_column_slice(uk),
            u_bar_k1: DVector::from_column_slice(uk1),
            s_bar: s,
            hold,
        }
    }

    #[test]
    fn foh_interpolation() {
        let r = reference(HoldKind::Foh, &[0.0], &[100.0, 0.1], &[200.0, -0.1], 1.0);
        assert_eq!(interp_control(&r, 0.0).unwrap().as_slice(), &[100.0, 0.1]);
        let mid = interp_control(&r, 0.5).unwrap();
        assert!((mid[0] - 150.0).abs() < 1e-12 && mid[1].abs() < 1e-12);
    }

    #[test]
    fn zoh_interpolation_holds_left_value() {
        let r = reference(HoldKind::Zoh, &[0.0], &[100.0, 0.1], &[200.0, -0.1], 1.0);
        for tau in [0.0, 0.3, 0.999] {
            assert_eq!(interp_control(&r, tau).unwrap().as_slice(), &[100.0, 0.1]);
        }
    }

    #[test]
    fn interpolation_rejects_out_of_range_tau() {
        let r = reference(HoldKind::Foh, &[0.0], &[1.0], &[2.0], 1.0);
        assert!(interp_control(&r, 1.0).is_err());
        assert!(interp_control(&r, -0.1).is_err());
    }

    #[test]
    fn zero_dynamics_give_identity() {
        let sys = LinearSystem::new(DMatrix::zeros(3, 3), DMatrix::zeros(3, 2));
        let r = reference(HoldKind::Foh, &[1.0, -2.0, 3.0], &[0.5, 0.1], &[0.2, 0.3], 2.0);
        let d = discretize_interval(&sys, &r, 4).unwrap();
        assert_eq!(d.a, DMatrix::identity(3, 3));
        assert!(d.b_minus.iter().chain(d.b_plus.iter()).all(|&v| v == 0.0));
        assert!(d.s.iter().all(|&v| v == 0.0));
        assert_eq!(d.x_prop, r.x_bar);
        assert_eq!(propagate_nonlinear(&sys, &r, 4).unwrap(), r.x_bar);
    }

    #[test]
    fn zoh_plus_block_is_exactly_zero() {
        let sys = LinearSystem::double_integrator(1);
        let r = reference(HoldKind::Zoh, &[0.3, -0.2], &[1.5], &[-4.0], 1.7);
        let d = discretize_interval(&sys, &r, 8).unwrap();
        assert!(d.b_plus.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_zero_substeps_and_bad_dilation() {
        let sys = LinearSystem::double_integrator(1);
        let r = reference(HoldKind::Foh, &[0.0, 0.0], &[1.0], &[1.0], 1.0);
        assert!(discretize_interval(&sys, &r, 0).is_err());
        let r = reference(HoldKind::Foh, &[0.0, 0.0], &[1.0], &[1.0], 0.0);
        assert!(discretize_interval(&sys, &r, 4).is_err());
    }

    #[test]
    fn stitching_reproduces_propagated_endpoint() {
        let sys = LinearSystem::double_integrator(1).with_drift(DVector::from_column_slice(&[0.0, -1.0]));
        let r = reference(HoldKind::Foh, &[2.0, 0.5], &[3.0], &[-1.0], 1.3);
        let d = discretize_interval(&sys, &r, 16).unwrap();
        let rebuilt = d.apply(&r.x_bar, &r.u_bar_k, &r.u_bar_k1, r.s_bar);
        assert!((rebuilt - &d.x_prop).amax() < 1e-14);
    }
}
