//! Four-phase planar landing problem: coast, three-engine burn, one-engine
//! burn, and a terminal descent that starts when the vehicle crosses the
//! trigger altitude.

use log::warn;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::conic::SetBlock;
use crate::discretize::HoldKind;
use crate::error::Result;
use crate::pipg::PipgSettings;
use crate::scaling::{ScaleUnits, VariableScaling};
use crate::scp::{solve_scp, ProblemSpec, RateLimit, ScpReport, ScpSettings, SeqProblem, Trajectory};
use crate::system::ContinuousSystem;
use crate::vehicle::{PhaseTag, RocketModel, RocketParams, CONTROL_DIM, STATE_DIM};

pub const NUM_PHASES: usize = 4;

/// State component indices.
pub mod idx {
    pub const M: usize = 0;
    pub const RX: usize = 1;
    pub const RZ: usize = 2;
    pub const VX: usize = 3;
    pub const VZ: usize = 4;
    pub const THETA: usize = 5;
    pub const OMEGA: usize = 6;
    pub const T: usize = 0;
    pub const DELTA: usize = 1;
}

/// Phase of every node and hold of every interval. Node and interval numbers
/// are 1-based in the public accessors; the vectors are 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhasePlan {
    pub n: usize,
    pub k_ignition: usize,
    pub k_switch: usize,
    pub k_trigger: usize,
    pub node_phase: Vec<PhaseTag>,
    pub interval_hold: Vec<HoldKind>,
}

impl PhasePlan {
    pub fn new(params: &RocketParams) -> Result<Self> {
        params.validate()?;
        let (n, ki, ks, kt) = (params.n_nodes, params.k_ignition, params.k_switch, params.k_trigger);
        let node_phase = (1..=n)
            .map(|k| {
                if k < ki {
                    PhaseTag::Coast
                } else if k < ks {
                    PhaseTag::HighThrust
                } else if k < kt {
                    PhaseTag::LowThrust
                } else {
                    PhaseTag::TerminalDescent
                }
            })
            .collect::<Vec<_>>();
        // Coast intervals hold zero thrust up to ignition; the last
        // three-engine interval holds its thrust up to the engine switch.
        let interval_hold = (1..n)
            .map(|k| if k < ki || k == ks - 1 { HoldKind::Zoh } else { HoldKind::Foh })
            .collect();
        Ok(Self { n, k_ignition: ki, k_switch: ks, k_trigger: kt, node_phase, interval_hold })
    }

    /// Phase of node `k` (1-based).
    pub fn phase_of_node(&self, k: usize) -> PhaseTag {
        self.node_phase[k - 1]
    }

    /// Phase owning interval `k` (1-based): that of its left node.
    pub fn phase_of_interval(&self, k: usize) -> PhaseTag {
        self.node_phase[k - 1]
    }

    pub fn interval_counts(&self) -> [usize; NUM_PHASES] {
        let mut c = [0; NUM_PHASES];
        for k in 1..self.n {
            c[self.phase_of_interval(k).index()] += 1;
        }
        c
    }

    pub fn zoh_intervals(&self) -> Vec<usize> {
        self.interval_hold.iter().enumerate().filter(|(_, h)| **h == HoldKind::Zoh).map(|(i, _)| i + 1).collect()
    }
}

pub fn rocket_scaling(units: &ScaleUnits) -> Result<VariableScaling> {
    units.validate()?;
    let (l, m, t, a) = (units.length, units.mass, units.time, units.angle);
    VariableScaling::new(
        DVector::from_vec(vec![m, l, l, l / t, l / t, a, a / t]),
        DVector::from_vec(vec![m * l / (t * t), a]),
        t,
    )
}

/// How the gimbal-rate limit enters each subproblem.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GimbalRateForm {
    /// `|δ_k − δ_{k−1}| ≤ δ̇_max s` as linear rows with slack variables.
    #[default]
    Exact,
    /// Box on `δ_k` centred on the reference `δ̄_{k−1}` and intersected with
    /// the angle box; exact only at convergence.
    Lagged,
}

/// The landing problem as seen by the SCP loop.
#[derive(Debug, Clone)]
pub struct RocketProblem {
    pub params: RocketParams,
    pub plan: PhasePlan,
    pub gimbal_rate: GimbalRateForm,
    scaling: VariableScaling,
}

impl RocketProblem {
    pub fn new(params: RocketParams, units: &ScaleUnits) -> Result<Self> {
        let plan = PhasePlan::new(&params)?;
        let scaling = rocket_scaling(units)?;
        Ok(Self { params, plan, gimbal_rate: GimbalRateForm::default(), scaling })
    }

    pub fn with_gimbal_rate(mut self, form: GimbalRateForm) -> Self {
        self.gimbal_rate = form;
        self
    }

    /// Thrust bounds of node `k` (1-based); `None` for coast nodes.
    pub fn thrust_bounds(&self, k: usize) -> Option<(f64, f64)> {
        let p = &self.params;
        match self.plan.phase_of_node(k) {
            PhaseTag::Coast => None,
            PhaseTag::HighThrust => Some((3.0 * p.t_min, 3.0 * p.t_max)),
            PhaseTag::LowThrust | PhaseTag::TerminalDescent => Some((p.t_min, p.t_max)),
        }
    }

    /// Gimbal-angle limit of node `k` (1-based).
    pub fn gimbal_limit(&self, k: usize) -> f64 {
        if self.plan.phase_of_node(k) == PhaseTag::TerminalDescent {
            self.params.delta_max_td
        } else {
            self.params.delta_max
        }
    }

    /// Intersection of the gimbal-angle box with the gimbal-rate box about
    /// `delta_prev`. An empty intersection is clamped to the nearest bound of
    /// the angle box.
    pub fn merged_gimbal_box(&self, k: usize, delta_prev: f64, s_prev: f64) -> (f64, f64) {
        let limit = self.gimbal_limit(k);
        let reach = self.params.delta_dot_max * s_prev;
        let lo = (-limit).max(delta_prev - reach);
        let hi = limit.min(delta_prev + reach);
        if lo <= hi {
            return (lo, hi);
        }
        let v = if delta_prev > 0.0 { limit } else { -limit };
        warn!("node {k}: gimbal angle and rate boxes do not intersect (reference δ = {delta_prev:.4}); clamping to {v:.4}");
        (v, v)
    }

    fn state_blocks(&self, k: usize, xi_ref: &DVector<f64>) -> Vec<SetBlock> {
        let p = &self.params;
        let (n, kt) = (self.plan.n, self.plan.k_trigger);
        if k == 1 {
            let x0 = p.initial_state().to_vector();
            return vec![SetBlock::singleton(0, x0.iter().copied().collect())];
        }
        if k == n {
            return vec![
                SetBlock::half_line_above(idx::M, p.m_dry),
                SetBlock::singleton(idx::RX, vec![p.r_f[0], p.r_f[1], p.v_f[0], p.v_f[1], p.theta_f, p.omega_f]),
            ];
        }
        if k < kt {
            return vec![SetBlock::half_line_above(idx::RX, p.h_trigger)];
        }
        let tan_gs = p.gamma_gs.tan();
        let (altitude, half_width) = if k == kt {
            (SetBlock::singleton(idx::RX, vec![p.h_trigger]), tan_gs * p.h_trigger)
        } else {
            (SetBlock::half_line_below(idx::RX, p.h_trigger), tan_gs * xi_ref[idx::RX].max(0.0))
        };
        vec![
            altitude,
            SetBlock::boxed(idx::RZ, vec![-half_width], vec![half_width]),
            SetBlock::ball(idx::VX, vec![0.0, 0.0], p.v_max),
            SetBlock::boxed(idx::THETA, vec![-p.theta_max], vec![p.theta_max]),
            SetBlock::boxed(idx::OMEGA, vec![-p.omega_max], vec![p.omega_max]),
        ]
    }

    fn control_blocks(&self, k: usize, reference: &Trajectory) -> Vec<SetBlock> {
        let (n, ks) = (self.plan.n, self.plan.k_switch);
        let Some((t_lo, t_hi)) = self.thrust_bounds(k) else {
            return vec![SetBlock::singleton(0, vec![0.0, 0.0])];
        };
        let delta_prev = reference.u[k - 2][idx::DELTA];
        let limit = self.gimbal_limit(k);
        let (d_lo, d_hi) = if k == n {
            (0.0, 0.0)
        } else if self.gimbal_rate == GimbalRateForm::Exact {
            (-limit, limit)
        } else if k == ks {
            let v = delta_prev.clamp(-limit, limit);
            (v, v)
        } else {
            self.merged_gimbal_box(k, delta_prev, reference.interval_dilation(k - 2))
        };
        vec![SetBlock::boxed(0, vec![t_lo, d_lo], vec![t_hi, d_hi])]
    }

    /// Gimbal-rate rows of the exact form: every powered node against its
    /// predecessor, with the rate forced to zero across the engine switch.
    fn rate_limits(&self) -> Vec<RateLimit> {
        if self.gimbal_rate == GimbalRateForm::Lagged {
            return Vec::new();
        }
        let (n, ki, ks) = (self.plan.n, self.plan.k_ignition, self.plan.k_switch);
        (ki.max(2)..=n)
            .map(|k| RateLimit {
                node: k - 1,
                component: idx::DELTA,
                phase: self.plan.phase_of_interval(k - 1).index(),
                rate: if k == ks { 0.0 } else { self.params.delta_dot_max },
            })
            .collect()
    }

    /// Initial reference: straight-line kinematics, linear mass depletion to
    /// the midpoint between wet and dry mass, mid-range thrust, zero gimbal.
    pub fn initial_guess(&self) -> Trajectory {
        let p = &self.params;
        let n = self.plan.n;
        let x0 = p.initial_state().to_vector();
        let mut xf = x0;
        xf[idx::M] = 0.5 * (p.m_i + p.m_dry);
        xf[idx::RX] = p.r_f[0];
        xf[idx::RZ] = p.r_f[1];
        xf[idx::VX] = p.v_f[0];
        xf[idx::VZ] = p.v_f[1];
        xf[idx::THETA] = p.theta_f;
        xf[idx::OMEGA] = p.omega_f;
        let x: Vec<DVector<f64>> = (0..n)
            .map(|j| {
                let a = j as f64 / (n - 1) as f64;
                DVector::from_iterator(STATE_DIM, x0.iter().zip(xf.iter()).map(|(s, e)| s + a * (e - s)))
            })
            .collect();
        let u = (1..=n)
            .map(|k| {
                let thrust = self.thrust_bounds(k).map_or(0.0, |(lo, hi)| 0.5 * (lo + hi));
                DVector::from_vec(vec![thrust, 0.0])
            })
            .collect();
        let counts = self.plan.interval_counts();
        let durations = [p.s_min * counts[0] as f64, 20.0, 20.0, 15.0];
        let s = (0..NUM_PHASES)
            .map(|i| {
                let per = if counts[i] == 0 { p.s_min } else { durations[i] / counts[i] as f64 };
                per.clamp(p.s_min, p.s_max)
            })
            .collect();
        Trajectory {
            xi: x.clone(),
            x,
            u,
            s,
            interval_phase: (1..n).map(|k| self.plan.phase_of_interval(k).index()).collect(),
            interval_hold: self.plan.interval_hold.clone(),
        }
    }

    /// Max violation of every constraint family evaluated on the actual
    /// state `x`, in physical and nondimensional units.
    pub fn check_feasibility(&self, traj: &Trajectory, tol: f64) -> FeasibilityReport {
        let p = &self.params;
        let sc = &self.scaling;
        let (n, ks, kt) = (self.plan.n, self.plan.k_switch, self.plan.k_trigger);
        let mut fam = Families::default();
        let (len, mass, vel, ang, rate) = (sc.state[idx::RX], sc.state[idx::M], sc.state[idx::VX], sc.state[idx::THETA], sc.state[idx::OMEGA]);
        let (force, gimbal) = (sc.control[idx::T], sc.control[idx::DELTA]);
        let x = |k: usize, i: usize| traj.x[k - 1][i];
        let u = |k: usize, i: usize| traj.u[k - 1][i];

        let x0 = p.initial_state().to_vector();
        let units = [mass, len, len, vel, vel, ang, rate];
        for i in 0..STATE_DIM {
            fam.add("initial_state", 1, (x(1, i) - x0[i]).abs(), units[i]);
        }
        let xf = [p.r_f[0], p.r_f[1], p.v_f[0], p.v_f[1], p.theta_f, p.omega_f];
        for i in 1..STATE_DIM {
            fam.add("final_state", n, (x(n, i) - xf[i - 1]).abs(), units[i]);
        }
        fam.add("final_mass", n, p.m_dry - x(n, idx::M), mass);

        let tan_gs = p.gamma_gs.tan();
        for k in 1..=n {
            let rx = x(k, idx::RX);
            if k < kt {
                fam.add("altitude_floor", k, p.h_trigger - rx, len);
            } else if k == kt {
                fam.add("trigger_altitude", k, (rx - p.h_trigger).abs(), len);
            } else {
                fam.add("altitude_ceiling", k, rx - p.h_trigger, len);
            }
            if (kt..n).contains(&k) {
                fam.add("glideslope", k, x(k, idx::RZ).abs() - tan_gs * rx, len);
                let speed = (x(k, idx::VX).powi(2) + x(k, idx::VZ).powi(2)).sqrt();
                fam.add("speed", k, speed - p.v_max, vel);
                fam.add("tilt", k, x(k, idx::THETA).abs() - p.theta_max, ang);
                fam.add("angular_rate", k, x(k, idx::OMEGA).abs() - p.omega_max, rate);
            }

            let (thrust, delta) = (u(k, idx::T), u(k, idx::DELTA));
            match self.thrust_bounds(k) {
                None => {
                    fam.add("coast_controls", k, thrust.abs(), force);
                    fam.add("coast_controls", k, delta.abs(), gimbal);
                }
                Some((lo, hi)) => {
                    fam.add("thrust", k, (lo - thrust).max(thrust - hi), force);
                    fam.add("gimbal_angle", k, delta.abs() - self.gimbal_limit(k), gimbal);
                    if k > 1 {
                        let reach = p.delta_dot_max * traj.interval_dilation(k - 2);
                        fam.add("gimbal_rate", k, (delta - u(k - 1, idx::DELTA)).abs() - reach, gimbal);
                    }
                }
            }
        }
        fam.add("gimbal_hold", ks, (u(ks, idx::DELTA) - u(ks - 1, idx::DELTA)).abs(), gimbal);
        fam.add("final_gimbal", n, u(n, idx::DELTA).abs(), gimbal);
        for (i, &s) in traj.s.iter().enumerate() {
            fam.add("dilation", i + 1, (p.s_min - s).max(s - p.s_max), sc.dilation);
        }

        let single_crossing = (1..=n).all(|k| {
            let rx = x(k, idx::RX);
            if k < kt {
                rx >= p.h_trigger - tol * len
            } else if k == kt {
                (rx - p.h_trigger).abs() <= tol * len
            } else {
                rx <= p.h_trigger + tol * len
            }
        });
        FeasibilityReport { families: fam.0, single_crossing }
    }

    /// Altitude and speed at ignition.
    pub fn pdi_state(&self, traj: &Trajectory) -> (f64, f64) {
        let x = &traj.x[self.plan.k_ignition - 1];
        (x[idx::RX], (x[idx::VX].powi(2) + x[idx::VZ].powi(2)).sqrt())
    }

    /// Wall-clock duration of each phase.
    pub fn phase_durations(&self, traj: &Trajectory) -> [f64; NUM_PHASES] {
        let counts = self.plan.interval_counts();
        std::array::from_fn(|i| counts[i] as f64 * traj.s[i])
    }
}

impl SeqProblem for RocketProblem {
    fn state_dim(&self) -> usize {
        STATE_DIM
    }

    fn control_dim(&self) -> usize {
        CONTROL_DIM
    }

    fn num_nodes(&self) -> usize {
        self.plan.n
    }

    fn num_phases(&self) -> usize {
        NUM_PHASES
    }

    fn interval_phase(&self, k: usize) -> usize {
        self.plan.node_phase[k].index()
    }

    fn interval_hold(&self, k: usize) -> HoldKind {
        self.plan.interval_hold[k]
    }

    fn interval_system(&self, k: usize) -> Box<dyn ContinuousSystem + '_> {
        Box::new(RocketModel::new(&self.params, self.plan.node_phase[k]))
    }

    fn scaling(&self) -> &VariableScaling {
        &self.scaling
    }

    fn problem_spec(&self, reference: &Trajectory) -> Result<ProblemSpec> {
        let n = self.plan.n;
        let mut terminal_cost = DVector::zeros(STATE_DIM);
        terminal_cost[idx::M] = -1.0;
        Ok(ProblemSpec {
            state_sets: (1..=n).map(|k| self.state_blocks(k, &reference.xi[k - 1])).collect(),
            control_sets: (1..=n).map(|k| self.control_blocks(k, reference)).collect(),
            dilation_bounds: vec![(self.params.s_min, self.params.s_max); NUM_PHASES],
            rate_limits: self.rate_limits(),
            terminal_cost,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyViolation {
    pub family: String,
    /// Largest violation in physical units (non-positive when satisfied).
    pub max_violation: f64,
    pub max_violation_scaled: f64,
    /// 1-based node (or phase, for dilations) where the maximum occurs.
    pub worst_index: usize,
}

#[derive(Default)]
struct Families(Vec<FamilyViolation>);

impl Families {
    fn add(&mut self, family: &str, index: usize, violation: f64, unit: f64) {
        let scaled = violation / unit;
        match self.0.iter_mut().find(|f| f.family == family) {
            Some(f) => {
                if scaled > f.max_violation_scaled {
                    f.max_violation = violation;
                    f.max_violation_scaled = scaled;
                    f.worst_index = index;
                }
            }
            None => self.0.push(FamilyViolation {
                family: family.to_string(),
                max_violation: violation,
                max_violation_scaled: scaled,
                worst_index: index,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub families: Vec<FamilyViolation>,
    pub single_crossing: bool,
}

impl FeasibilityReport {
    /// Largest nondimensional violation over all families (zero if none).
    pub fn max_scaled(&self) -> f64 {
        self.families.iter().map(|f| f.max_violation_scaled).fold(0.0, f64::max)
    }

    pub fn family(&self, name: &str) -> Option<&FamilyViolation> {
        self.families.iter().find(|f| f.family == name)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.single_crossing && self.max_scaled() <= tol
    }
}

/// Solve the landing problem from the default initial guess.
pub fn solve_seco(params: &RocketParams, scp: &ScpSettings, pipg: &PipgSettings) -> Result<(RocketProblem, ScpReport)> {
    let problem = RocketProblem::new(params.clone(), &scp.scale)?;
    let report = solve_problem(&problem, scp, pipg)?;
    Ok((problem, report))
}

/// Solve an already configured problem from its default initial guess.
pub fn solve_problem(problem: &RocketProblem, scp: &ScpSettings, pipg: &PipgSettings) -> Result<ScpReport> {
    solve_scp(problem, problem.initial_guess(), scp, pipg)
}
