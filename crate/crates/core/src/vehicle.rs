//! Planar rocket model: point-mass translation plus pitch rotation, with a
//! drag-style aerodynamic force and a phase-dependent center of pressure.
//!
//! State `x = (m, r_x, r_z, v_x, v_z, θ, ω)` with `x̂` vertical and `ẑ`
//! horizontal; control `u = (T, δ)`.

use nalgebra::{DMatrix, DVector, Matrix2, SMatrix, SVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::{ContinuousSystem, DilatedLinearization, Linearization};

pub const STATE_DIM: usize = 7;
pub const CONTROL_DIM: usize = 2;

pub type StateVector = SVector<f64, STATE_DIM>;
pub type ControlVector = SVector<f64, CONTROL_DIM>;
pub type StateJacobian = SMatrix<f64, STATE_DIM, STATE_DIM>;
pub type ControlJacobian = SMatrix<f64, STATE_DIM, CONTROL_DIM>;

/// Below this speed the aerodynamic force and its derivatives are taken as zero.
pub const AERO_SPEED_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocketState {
    pub m: f64,
    pub r: Vector2<f64>,
    pub v: Vector2<f64>,
    pub theta: f64,
    pub omega: f64,
}

impl RocketState {
    pub fn to_vector(&self) -> StateVector {
        StateVector::from_column_slice(&[
            self.m, self.r.x, self.r.y, self.v.x, self.v.y, self.theta, self.omega,
        ])
    }

    pub fn from_slice(x: &[f64]) -> Self {
        assert_eq!(x.len(), STATE_DIM, "rocket state has {STATE_DIM} components");
        Self {
            m: x[0],
            r: Vector2::new(x[1], x[2]),
            v: Vector2::new(x[3], x[4]),
            theta: x[5],
            omega: x[6],
        }
    }

    fn check(&self) -> Result<()> {
        if !self.to_vector().iter().all(|v| v.is_finite()) {
            return Err(Error::domain("non-finite rocket state"));
        }
        if self.m <= 0.0 {
            return Err(Error::domain(format!("mass must be positive, got {}", self.m)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocketControl {
    /// Thrust magnitude (N).
    pub thrust: f64,
    /// Gimbal deflection (rad).
    pub delta: f64,
}

impl RocketControl {
    pub fn to_vector(&self) -> ControlVector {
        ControlVector::new(self.thrust, self.delta)
    }

    pub fn from_slice(u: &[f64]) -> Self {
        assert_eq!(u.len(), CONTROL_DIM, "rocket control has {CONTROL_DIM} components");
        Self { thrust: u[0], delta: u[1] }
    }
}

/// Flight phase. The coast phase has the center of pressure at the mass
/// center; every powered phase uses the shifted moment arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PhaseTag {
    Coast,
    HighThrust,
    LowThrust,
    TerminalDescent,
}

impl PhaseTag {
    pub const ALL: [PhaseTag; 4] = [
        PhaseTag::Coast,
        PhaseTag::HighThrust,
        PhaseTag::LowThrust,
        PhaseTag::TerminalDescent,
    ];

    pub fn index(self) -> usize {
        match self {
            PhaseTag::Coast => 0,
            PhaseTag::HighThrust => 1,
            PhaseTag::LowThrust => 2,
            PhaseTag::TerminalDescent => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PhaseTag::Coast => "coast",
            PhaseTag::HighThrust => "high_thrust",
            PhaseTag::LowThrust => "low_thrust",
            PhaseTag::TerminalDescent => "terminal_descent",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    pub fn is_powered(self) -> bool {
        self != PhaseTag::Coast
    }
}

/// Vehicle, environment and mission constants. Angles are radians; grid
/// indices are 1-based node numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocketParams {
    pub g0: f64,
    pub isp: f64,
    pub l_r: f64,
    pub l_h: f64,
    pub l_cm: f64,
    pub l_cp_coast: f64,
    pub l_cp_powered: f64,
    pub rho_air: f64,
    pub s_area: f64,
    pub c_x: f64,
    pub c_z: f64,
    /// Single-engine thrust bounds (N).
    pub t_min: f64,
    pub t_max: f64,
    pub delta_max: f64,
    pub delta_max_td: f64,
    pub delta_dot_max: f64,
    pub h_trigger: f64,
    pub gamma_gs: f64,
    pub v_max: f64,
    pub theta_max: f64,
    pub omega_max: f64,
    pub m_dry: f64,
    pub m_i: f64,
    pub r_i: [f64; 2],
    pub v_i: [f64; 2],
    pub r_f: [f64; 2],
    pub v_f: [f64; 2],
    pub theta_i: f64,
    pub theta_f: f64,
    pub omega_i: f64,
    pub omega_f: f64,
    pub s_min: f64,
    pub s_max: f64,
    /// Informational only; not used by the dynamics.
    pub v_terminal: f64,
    pub n_nodes: usize,
    pub k_ignition: usize,
    pub k_switch: usize,
    pub k_trigger: usize,
}

impl Default for RocketParams {
    fn default() -> Self {
        let l_h = 50.0;
        let deg = std::f64::consts::PI / 180.0;
        Self {
            g0: 9.81,
            isp: 330.0,
            l_r: 4.5,
            l_h,
            l_cm: 0.4 * l_h,
            l_cp_coast: 0.0,
            l_cp_powered: 0.2 * l_h,
            rho_air: 1.225,
            s_area: 545.0,
            c_x: 0.0522,
            c_z: 0.4068,
            t_min: 880e3,
            t_max: 2200e3,
            delta_max: 10.0 * deg,
            delta_max_td: 1.0 * deg,
            delta_dot_max: 15.0 * deg,
            h_trigger: 100.0,
            gamma_gs: 5.0 * deg,
            v_max: 20.0,
            theta_max: 5.0 * deg,
            omega_max: 2.5 * deg,
            m_dry: 85_000.0,
            m_i: 100_000.0,
            r_i: [1000.0, 100.0],
            v_i: [-90.0, 0.0],
            r_f: [0.0, 0.0],
            v_f: [0.0, 0.0],
            theta_i: 90.0 * deg,
            theta_f: 0.0,
            omega_i: 0.0,
            omega_f: 0.0,
            s_min: 0.6,
            s_max: 10.0,
            v_terminal: 85.0,
            n_nodes: 16,
            k_ignition: 2,
            k_switch: 7,
            k_trigger: 12,
        }
    }
}

impl RocketParams {
    /// Thrust-specific fuel consumption `1 / (Isp g0)`.
    pub fn alpha_e(&self) -> f64 {
        1.0 / (self.isp * self.g0)
    }

    /// `J / m` for a uniform solid cylinder about its central diameter.
    pub fn inertia_per_mass(&self) -> f64 {
        self.l_r * self.l_r / 4.0 + self.l_h * self.l_h / 12.0
    }

    pub fn l_cp(&self, phase: PhaseTag) -> f64 {
        if phase.is_powered() {
            self.l_cp_powered
        } else {
            self.l_cp_coast
        }
    }

    pub fn initial_state(&self) -> RocketState {
        RocketState {
            m: self.m_i,
            r: Vector2::from(self.r_i),
            v: Vector2::from(self.v_i),
            theta: self.theta_i,
            omega: self.omega_i,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("g0", self.g0),
            ("isp", self.isp),
            ("l_r", self.l_r),
            ("l_h", self.l_h),
            ("l_cm", self.l_cm),
            ("rho_air", self.rho_air),
            ("s_area", self.s_area),
            ("c_x", self.c_x),
            ("c_z", self.c_z),
            ("t_min", self.t_min),
            ("t_max", self.t_max),
            ("delta_max", self.delta_max),
            ("delta_max_td", self.delta_max_td),
            ("delta_dot_max", self.delta_dot_max),
            ("h_trigger", self.h_trigger),
            ("gamma_gs", self.gamma_gs),
            ("v_max", self.v_max),
            ("theta_max", self.theta_max),
            ("omega_max", self.omega_max),
            ("m_dry", self.m_dry),
            ("m_i", self.m_i),
            ("s_min", self.s_min),
            ("s_max", self.s_max),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::config(format!("{name} must be positive and finite, got {value}")));
            }
        }
        if self.l_cp_coast < 0.0 || self.l_cp_powered < 0.0 {
            return Err(Error::config("center-of-pressure arms must be non-negative"));
        }
        if self.m_dry >= self.m_i {
            return Err(Error::config("m_dry < m_i violated"));
        }
        if self.s_min >= self.s_max {
            return Err(Error::config("s_min < s_max violated"));
        }
        if self.t_min >= self.t_max {
            return Err(Error::config("t_min < t_max violated"));
        }
        if self.delta_max_td >= self.delta_max {
            return Err(Error::config("delta_max_td < delta_max violated"));
        }
        if !(1 <= self.k_ignition
            && self.k_ignition < self.k_switch
            && self.k_switch < self.k_trigger
            && self.k_trigger <= self.n_nodes)
        {
            return Err(Error::config(format!(
                "grid ordering 1 <= k_ignition < k_switch < k_trigger <= N violated \
                 (k_ignition={}, k_switch={}, k_trigger={}, N={})",
                self.k_ignition, self.k_switch, self.k_trigger, self.n_nodes
            )));
        }
        Ok(())
    }
}

fn rotation(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, s, -s, c)
}

fn rotation_derivative(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(-s, c, -c, -s)
}

/// Aerodynamic force in body and inertial frames.
struct Aero {
    body: Vector2<f64>,
    inertial: Vector2<f64>,
}

fn aero_force(p: &RocketParams, v: &Vector2<f64>, theta: f64) -> Aero {
    let speed = v.norm();
    if speed < AERO_SPEED_FLOOR {
        return Aero { body: Vector2::zeros(), inertial: Vector2::zeros() };
    }
    let k = 0.5 * p.rho_air * p.s_area;
    let rot = rotation(theta);
    let c_aero = Matrix2::new(p.c_x, 0.0, 0.0, p.c_z);
    let body = -k * speed * (c_aero * rot.transpose() * v);
    Aero { body, inertial: rot * body }
}

/// Nonlinear dynamics `f(x, u)`.
pub fn eval_dynamics(
    x: &RocketState,
    u: &RocketControl,
    p: &RocketParams,
    phase: PhaseTag,
) -> Result<StateVector> {
    x.check()?;
    if !(u.thrust.is_finite() && u.delta.is_finite()) {
        return Err(Error::domain("non-finite rocket control"));
    }
    let aero = aero_force(p, &x.v, x.theta);
    let (s_td, c_td) = (x.theta + u.delta).sin_cos();
    let thrust_inertial = u.thrust * Vector2::new(c_td, -s_td);
    let thrust_body_z = -u.thrust * u.delta.sin();
    let accel = (thrust_inertial + aero.inertial) / x.m + Vector2::new(-p.g0, 0.0);
    let inertia = x.m * p.inertia_per_mass();
    let omega_dot = (thrust_body_z * p.l_cm - aero.body.y * p.l_cp(phase)) / inertia;

    Ok(StateVector::from_column_slice(&[
        -p.alpha_e() * u.thrust,
        x.v.x,
        x.v.y,
        accel.x,
        accel.y,
        x.omega,
        omega_dot,
    ]))
}

/// Analytic `∂f/∂x` and `∂f/∂u`.
pub fn eval_jacobians(
    x: &RocketState,
    u: &RocketControl,
    p: &RocketParams,
    phase: PhaseTag,
) -> Result<(StateJacobian, ControlJacobian)> {
    x.check()?;
    if !(u.thrust.is_finite() && u.delta.is_finite()) {
        return Err(Error::domain("non-finite rocket control"));
    }
    let mut a = StateJacobian::zeros();
    let mut b = ControlJacobian::zeros();

    let m = x.m;
    let v = x.v;
    let l_cp = p.l_cp(phase);
    let j_per_m = p.inertia_per_mass();
    let inertia = m * j_per_m;

    // aerodynamic force and its sensitivities to v and θ
    let speed = v.norm();
    let (aero_body, aero_inertial, d_ab_dv, d_ab_dth, d_ai_dv, d_ai_dth) = if speed < AERO_SPEED_FLOOR {
        (
            Vector2::zeros(),
            Vector2::zeros(),
            Matrix2::zeros(),
            Vector2::zeros(),
            Matrix2::zeros(),
            Vector2::zeros(),
        )
    } else {
        let k = 0.5 * p.rho_air * p.s_area;
        let rot = rotation(x.theta);
        let drot = rotation_derivative(x.theta);
        let c_aero = Matrix2::new(p.c_x, 0.0, 0.0, p.c_z);
        let v_body = rot.transpose() * v;
        let unit = v / speed;
        let ab = -k * speed * (c_aero * v_body);
        let d_ab_dv = -k * (c_aero * v_body * unit.transpose() + speed * c_aero * rot.transpose());
        let d_ab_dth = -k * speed * (c_aero * drot.transpose() * v);
        let ai = rot * ab;
        let d_ai_dv = rot * d_ab_dv;
        let d_ai_dth = drot * ab + rot * d_ab_dth;
        (ab, ai, d_ab_dv, d_ab_dth, d_ai_dv, d_ai_dth)
    };

    let (s_td, c_td) = (x.theta + u.delta).sin_cos();
    let thrust_inertial = u.thrust * Vector2::new(c_td, -s_td);
    let d_fi_dangle = u.thrust * Vector2::new(-s_td, -c_td);

    // ṁ
    b[(0, 0)] = -p.alpha_e();
    // ṙ = v
    a[(1, 3)] = 1.0;
    a[(2, 4)] = 1.0;
    // v̇
    let force = thrust_inertial + aero_inertial;
    for i in 0..2 {
        let row = 3 + i;
        a[(row, 0)] = -force[i] / (m * m);
        a[(row, 3)] = d_ai_dv[(i, 0)] / m;
        a[(row, 4)] = d_ai_dv[(i, 1)] / m;
        a[(row, 5)] = (d_fi_dangle[i] + d_ai_dth[i]) / m;
        b[(row, 0)] = [c_td, -s_td][i] / m;
        b[(row, 1)] = d_fi_dangle[i] / m;
    }
    // θ̇ = ω
    a[(5, 6)] = 1.0;
    // ω̇
    let (s_d, c_d) = u.delta.sin_cos();
    let torque = -u.thrust * s_d * p.l_cm - aero_body.y * l_cp;
    a[(6, 0)] = -torque / (m * m * j_per_m);
    a[(6, 3)] = -l_cp * d_ab_dv[(1, 0)] / inertia;
    a[(6, 4)] = -l_cp * d_ab_dv[(1, 1)] / inertia;
    a[(6, 5)] = -l_cp * d_ab_dth.y / inertia;
    b[(6, 0)] = -s_d * p.l_cm / inertia;
    b[(6, 1)] = -u.thrust * c_d * p.l_cm / inertia;

    Ok((a, b))
}

/// Dilated dynamics: `(s f, s ∂f/∂x, s ∂f/∂u, f)`.
pub fn eval_dilated(
    x: &RocketState,
    u: &RocketControl,
    s: f64,
    p: &RocketParams,
    phase: PhaseTag,
) -> Result<(StateVector, StateJacobian, ControlJacobian, StateVector)> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::domain(format!("dilation factor must be positive, got {s}")));
    }
    let f = eval_dynamics(x, u, p, phase)?;
    let (a, b) = eval_jacobians(x, u, p, phase)?;
    Ok((f * s, a * s, b * s, f))
}

/// The rocket dynamics of one phase, as a [`ContinuousSystem`].
#[derive(Debug, Clone, Copy)]
pub struct RocketModel<'a> {
    pub params: &'a RocketParams,
    pub phase: PhaseTag,
}

impl<'a> RocketModel<'a> {
    pub fn new(params: &'a RocketParams, phase: PhaseTag) -> Self {
        Self { params, phase }
    }

    pub fn dilated(&self, x: &RocketState, u: &RocketControl, s: f64) -> Result<DilatedLinearization> {
        let (f, a, b, s_col) = eval_dilated(x, u, s, self.params, self.phase)?;
        Ok(DilatedLinearization {
            f: DVector::from_column_slice(f.as_slice()),
            a: DMatrix::from_column_slice(STATE_DIM, STATE_DIM, a.as_slice()),
            b: DMatrix::from_column_slice(STATE_DIM, CONTROL_DIM, b.as_slice()),
            s: DVector::from_column_slice(s_col.as_slice()),
        })
    }
}

impl ContinuousSystem for RocketModel<'_> {
    fn state_dim(&self) -> usize {
        STATE_DIM
    }

    fn control_dim(&self) -> usize {
        CONTROL_DIM
    }

    fn derivative(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        let f = eval_dynamics(
            &RocketState::from_slice(x.as_slice()),
            &RocketControl::from_slice(u.as_slice()),
            self.params,
            self.phase,
        )?;
        Ok(DVector::from_column_slice(f.as_slice()))
    }

    fn linearize(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<Linearization> {
        let xs = RocketState::from_slice(x.as_slice());
        let us = RocketControl::from_slice(u.as_slice());
        let f = eval_dynamics(&xs, &us, self.params, self.phase)?;
        let (a, b) = eval_jacobians(&xs, &us, self.params, self.phase)?;
        Ok(Linearization {
            f: DVector::from_column_slice(f.as_slice()),
            a: DMatrix::from_column_slice(STATE_DIM, STATE_DIM, a.as_slice()),
            b: DMatrix::from_column_slice(STATE_DIM, CONTROL_DIM, b.as_slice()),
        })
    }
}
