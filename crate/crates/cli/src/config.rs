//! Flat TOML run configuration. Every key is optional; missing keys take the
//! built-in landing scenario values. Angles are given in degrees.

use std::path::Path;

use anyhow::{Context, Result};
use seco_core::{GimbalRateForm, RocketProblem, PipgSettings, RocketParams, ScaleUnits, ScpSettings};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
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
    pub t_min: f64,
    pub t_max: f64,
    pub delta_max_deg: f64,
    pub delta_max_td_deg: f64,
    pub delta_dot_max_deg: f64,
    pub h_trigger: f64,
    pub gamma_gs_deg: f64,
    pub v_max: f64,
    pub theta_max_deg: f64,
    pub omega_max_deg: f64,
    pub m_dry: f64,
    pub m_i: f64,
    pub r_i: [f64; 2],
    pub v_i: [f64; 2],
    pub r_f: [f64; 2],
    pub v_f: [f64; 2],
    pub theta_i_deg: f64,
    pub theta_f_deg: f64,
    pub omega_i_deg: f64,
    pub omega_f_deg: f64,
    pub s_min: f64,
    pub s_max: f64,
    pub v_terminal: f64,
    pub n_nodes: usize,
    pub k_ignition: usize,
    pub k_switch: usize,
    pub k_trigger: usize,
    /// `exact` (slack rows) or `lagged` (box about the previous iterate).
    pub gimbal_rate: GimbalRateForm,

    pub w_c: f64,
    pub w_tr: f64,
    pub w_vse: f64,
    pub max_scp_iters: usize,
    pub eps_tr: f64,
    pub eps_vse: f64,
    pub substeps: usize,
    pub check_substeps_factor: usize,
    pub scale_length: f64,
    pub scale_mass: f64,
    pub scale_time: f64,
    pub scale_angle: f64,

    pub pipg_rho: f64,
    pub pipg_omega: f64,
    pub pipg_max_iters: usize,
    pub pipg_eps_fixed_point: f64,
    pub pipg_eps_equality: f64,
    pub pipg_check_every: usize,
    pub pipg_power_iters: usize,

    /// Scaled tolerance used by `verify` and the summary.
    pub verify_tol: f64,
    /// Scaled tolerance on the per-interval propagation defect.
    pub defect_tol: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::from_parts(&RocketParams::default(), &ScpSettings::default(), &PipgSettings::default())
    }
}

impl RunConfig {
    pub fn from_parts(p: &RocketParams, scp: &ScpSettings, pipg: &PipgSettings) -> Self {
        let deg = f64::to_degrees;
        Self {
            g0: p.g0,
            isp: p.isp,
            l_r: p.l_r,
            l_h: p.l_h,
            l_cm: p.l_cm,
            l_cp_coast: p.l_cp_coast,
            l_cp_powered: p.l_cp_powered,
            rho_air: p.rho_air,
            s_area: p.s_area,
            c_x: p.c_x,
            c_z: p.c_z,
            t_min: p.t_min,
            t_max: p.t_max,
            delta_max_deg: deg(p.delta_max),
            delta_max_td_deg: deg(p.delta_max_td),
            delta_dot_max_deg: deg(p.delta_dot_max),
            h_trigger: p.h_trigger,
            gamma_gs_deg: deg(p.gamma_gs),
            v_max: p.v_max,
            theta_max_deg: deg(p.theta_max),
            omega_max_deg: deg(p.omega_max),
            m_dry: p.m_dry,
            m_i: p.m_i,
            r_i: p.r_i,
            v_i: p.v_i,
            r_f: p.r_f,
            v_f: p.v_f,
            theta_i_deg: deg(p.theta_i),
            theta_f_deg: deg(p.theta_f),
            omega_i_deg: deg(p.omega_i),
            omega_f_deg: deg(p.omega_f),
            s_min: p.s_min,
            s_max: p.s_max,
            v_terminal: p.v_terminal,
            n_nodes: p.n_nodes,
            k_ignition: p.k_ignition,
            k_switch: p.k_switch,
            k_trigger: p.k_trigger,
            gimbal_rate: GimbalRateForm::default(),
            w_c: scp.w_c,
            w_tr: scp.w_tr,
            w_vse: scp.w_vse,
            max_scp_iters: scp.max_scp_iters,
            eps_tr: scp.eps_tr,
            eps_vse: scp.eps_vse,
            substeps: scp.substeps,
            check_substeps_factor: scp.check_substeps_factor,
            scale_length: scp.scale.length,
            scale_mass: scp.scale.mass,
            scale_time: scp.scale.time,
            scale_angle: scp.scale.angle,
            pipg_rho: pipg.rho,
            pipg_omega: pipg.omega,
            pipg_max_iters: pipg.max_iters,
            pipg_eps_fixed_point: pipg.eps_fixed_point,
            pipg_eps_equality: pipg.eps_equality,
            pipg_check_every: pipg.check_every,
            pipg_power_iters: pipg.power_iters,
            verify_tol: 1e-6,
            defect_tol: 1e-3,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn params(&self) -> RocketParams {
        let rad = f64::to_radians;
        RocketParams {
            g0: self.g0,
            isp: self.isp,
            l_r: self.l_r,
            l_h: self.l_h,
            l_cm: self.l_cm,
            l_cp_coast: self.l_cp_coast,
            l_cp_powered: self.l_cp_powered,
            rho_air: self.rho_air,
            s_area: self.s_area,
            c_x: self.c_x,
            c_z: self.c_z,
            t_min: self.t_min,
            t_max: self.t_max,
            delta_max: rad(self.delta_max_deg),
            delta_max_td: rad(self.delta_max_td_deg),
            delta_dot_max: rad(self.delta_dot_max_deg),
            h_trigger: self.h_trigger,
            gamma_gs: rad(self.gamma_gs_deg),
            v_max: self.v_max,
            theta_max: rad(self.theta_max_deg),
            omega_max: rad(self.omega_max_deg),
            m_dry: self.m_dry,
            m_i: self.m_i,
            r_i: self.r_i,
            v_i: self.v_i,
            r_f: self.r_f,
            v_f: self.v_f,
            theta_i: rad(self.theta_i_deg),
            theta_f: rad(self.theta_f_deg),
            omega_i: rad(self.omega_i_deg),
            omega_f: rad(self.omega_f_deg),
            s_min: self.s_min,
            s_max: self.s_max,
            v_terminal: self.v_terminal,
            n_nodes: self.n_nodes,
            k_ignition: self.k_ignition,
            k_switch: self.k_switch,
            k_trigger: self.k_trigger,
        }
    }

    pub fn scp(&self) -> ScpSettings {
        ScpSettings {
            w_c: self.w_c,
            w_tr: self.w_tr,
            w_vse: self.w_vse,
            max_scp_iters: self.max_scp_iters,
            eps_tr: self.eps_tr,
            eps_vse: self.eps_vse,
            substeps: self.substeps,
            check_substeps_factor: self.check_substeps_factor,
            scale: ScaleUnits {
                length: self.scale_length,
                mass: self.scale_mass,
                time: self.scale_time,
                angle: self.scale_angle,
            },
        }
    }

    pub fn pipg(&self) -> PipgSettings {
        PipgSettings {
            rho: self.pipg_rho,
            omega: self.pipg_omega,
            max_iters: self.pipg_max_iters,
            eps_fixed_point: self.pipg_eps_fixed_point,
            eps_equality: self.pipg_eps_equality,
            check_every: self.pipg_check_every,
            power_iters: self.pipg_power_iters,
        }
    }

    pub fn problem(&self) -> Result<RocketProblem> {
        Ok(RocketProblem::new(self.params(), &self.scp().scale)?.with_gimbal_rate(self.gimbal_rate))
    }

    /// Check every parameter group before any work is done.
    pub fn validate(&self) -> Result<()> {
        self.params().validate()?;
        self.scp().validate()?;
        self.pipg().validate()?;
        Ok(())
    }
}
