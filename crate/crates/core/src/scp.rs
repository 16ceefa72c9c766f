//! Penalized-trust-region sequential convex programming with virtual states.
//!
//! Each iteration discretizes the dilated dynamics about the current
//! reference, assembles a strongly convex subproblem over
//!
//! ```text
//! z = (x_1..x_N, ξ_1..ξ_N, u_1..u_N, s_1..s_P, d_1..d_N, e_1..e_2R)
//! ```
//!
//! and solves it with PIPG. The dynamics rows act on `x, u, s`; every state
//! set acts on the virtual state `ξ`; `d_k` is an auxiliary free variable tied
//! to `x_k − ξ_k` by equality rows so the virtual-state penalty stays diagonal.
//! Each of the `R` control rate limits owns two nonnegative slacks `e`.
//! All quantities inside the subproblem are nondimensional.

use std::time::Instant;

use log::{debug, info, warn};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::conic::{ConicProgram, SetBlock, SetKind, SparseMatrix};
use crate::discretize::{discretize_interval, propagate_nonlinear, DiscreteUpdate, HoldKind, IntervalReference, DEFAULT_SUBSTEPS};
use crate::error::{Error, Result};
use crate::pipg::{solve_preconditioned, PipgSettings, PipgStats};
use crate::scaling::{ScaleUnits, VariableScaling};
use crate::system::ContinuousSystem;

/// An SCP iterate in physical units.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub x: Vec<DVector<f64>>,
    pub xi: Vec<DVector<f64>>,
    pub u: Vec<DVector<f64>>,
    /// One dilation factor per phase.
    pub s: Vec<f64>,
    /// Owning phase of each interval.
    pub interval_phase: Vec<usize>,
    pub interval_hold: Vec<HoldKind>,
}

impl Trajectory {
    pub fn num_nodes(&self) -> usize {
        self.x.len()
    }

    /// Dilation factor of interval `k` (0-based).
    pub fn interval_dilation(&self, k: usize) -> f64 {
        self.s[self.interval_phase[k]]
    }

    /// Wall-clock time of every node, starting at zero.
    pub fn node_times(&self) -> Vec<f64> {
        let mut t = vec![0.0; self.num_nodes()];
        for k in 1..t.len() {
            t[k] = t[k - 1] + self.interval_dilation(k - 1);
        }
        t
    }

    pub fn final_time(&self) -> f64 {
        (0..self.interval_phase.len()).map(|k| self.interval_dilation(k)).sum()
    }

    /// Intervals owned by each phase.
    pub fn phase_interval_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.s.len()];
        for &p in &self.interval_phase {
            counts[p] += 1;
        }
        counts
    }

    /// Map to nondimensional units.
    pub fn nondimensionalize(&self, sc: &VariableScaling) -> Trajectory {
        Trajectory {
            x: self.x.iter().map(|v| sc.scale_state(v)).collect(),
            xi: self.xi.iter().map(|v| sc.scale_state(v)).collect(),
            u: self.u.iter().map(|v| sc.scale_control(v)).collect(),
            s: self.s.iter().map(|&s| sc.scale_dilation(s)).collect(),
            ..self.clone()
        }
    }

    /// Inverse of [`Trajectory::nondimensionalize`].
    pub fn redimensionalize(&self, sc: &VariableScaling) -> Trajectory {
        Trajectory {
            x: self.x.iter().map(|v| sc.unscale_state(v)).collect(),
            xi: self.xi.iter().map(|v| sc.unscale_state(v)).collect(),
            u: self.u.iter().map(|v| sc.unscale_control(v)).collect(),
            s: self.s.iter().map(|&s| sc.unscale_dilation(s)).collect(),
            ..self.clone()
        }
    }
}

/// `|u_k[component] − u_{k−1}[component]| ≤ rate · s[phase]`, physical units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateLimit {
    /// 0-based node `k ≥ 1`.
    pub node: usize,
    pub component: usize,
    pub phase: usize,
    pub rate: f64,
}

/// Constraint sets and objective of one subproblem, in physical units.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    /// Per node, blocks over the node's virtual-state components (local indices).
    pub state_sets: Vec<Vec<SetBlock>>,
    /// Per node, blocks over the node's control components (local indices).
    pub control_sets: Vec<Vec<SetBlock>>,
    /// Per phase, `(lo, hi)` on the dilation factor.
    pub dilation_bounds: Vec<(f64, f64)>,
    /// Rate limits between consecutive controls. Must not change between
    /// iterations, since the slack count fixes the subproblem size.
    pub rate_limits: Vec<RateLimit>,
    /// Gradient of the terminal cost `J(x_N)` with respect to the
    /// nondimensional final state.
    pub terminal_cost: DVector<f64>,
}

/// A multi-phase problem the SCP loop can drive.
pub trait SeqProblem {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    fn num_nodes(&self) -> usize;
    fn num_phases(&self) -> usize;
    /// Owning phase of interval `k` (0-based).
    fn interval_phase(&self, k: usize) -> usize;
    fn interval_hold(&self, k: usize) -> HoldKind;
    /// Dynamics active on interval `k`.
    fn interval_system(&self, k: usize) -> Box<dyn ContinuousSystem + '_>;
    fn scaling(&self) -> &VariableScaling;
    /// Constraint sets, possibly depending on the reference.
    fn problem_spec(&self, reference: &Trajectory) -> Result<ProblemSpec>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScpSettings {
    pub w_c: f64,
    pub w_tr: f64,
    pub w_vse: f64,
    pub max_scp_iters: usize,
    pub eps_tr: f64,
    pub eps_vse: f64,
    pub substeps: usize,
    /// Substeps multiplier for the post-solve propagation check.
    pub check_substeps_factor: usize,
    pub scale: ScaleUnits,
}

impl Default for ScpSettings {
    fn default() -> Self {
        Self {
            w_c: 1.0,
            w_tr: 0.002,
            w_vse: 1e8,
            max_scp_iters: 30,
            eps_tr: 1e-6,
            eps_vse: 1e-8,
            substeps: DEFAULT_SUBSTEPS,
            check_substeps_factor: 4,
            scale: ScaleUnits::default(),
        }
    }
}

impl ScpSettings {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("w_c", self.w_c), ("w_tr", self.w_tr), ("w_vse", self.w_vse), ("eps_tr", self.eps_tr), ("eps_vse", self.eps_vse)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.substeps == 0 || self.check_substeps_factor == 0 || self.max_scp_iters == 0 {
            return Err(Error::config("substeps, check_substeps_factor and max_scp_iters must be at least 1"));
        }
        self.scale.validate()
    }
}

/// Index map of the stacked decision vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub nx: usize,
    pub nu: usize,
    pub nodes: usize,
    pub phases: usize,
    pub rates: usize,
}

impl Layout {
    pub fn x(&self, k: usize) -> usize {
        k * self.nx
    }
    pub fn xi(&self, k: usize) -> usize {
        (self.nodes + k) * self.nx
    }
    pub fn u(&self, k: usize) -> usize {
        2 * self.nodes * self.nx + k * self.nu
    }
    pub fn s(&self, p: usize) -> usize {
        self.nodes * (2 * self.nx + self.nu) + p
    }
    pub fn d(&self, k: usize) -> usize {
        self.s(self.phases) + k * self.nx
    }
    /// The two slacks of rate limit `r`.
    pub fn slack(&self, r: usize) -> usize {
        self.d(self.nodes) + 2 * r
    }
    pub fn dim(&self) -> usize {
        self.slack(self.rates)
    }
    pub fn dynamics_rows(&self) -> usize {
        (self.nodes - 1) * self.nx
    }
    pub fn rows(&self) -> usize {
        self.rate_row(self.rates)
    }
    /// First row of the `x_k − ξ_k − c d_k = 0` coupling rows of node `k`.
    pub fn coupling_row(&self, k: usize) -> usize {
        self.dynamics_rows() + k * self.nx
    }
    /// Rows `c s − Δu − e⁻ = 0` and `c s + Δu − e⁺ = 0` of rate limit `r`.
    pub fn rate_row(&self, r: usize) -> usize {
        self.coupling_row(self.nodes) + 2 * r
    }
}

/// A rate limit in nondimensional form: `|Δu| ≤ coef · s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledRateLimit {
    pub node: usize,
    pub component: usize,
    pub phase: usize,
    pub coef: f64,
}

impl ScaledRateLimit {
    /// Slacks `(e⁻, e⁺)` of a nondimensional trajectory, clipped at zero.
    pub fn slacks(&self, traj: &Trajectory) -> (f64, f64) {
        let du = traj.u[self.node][self.component] - traj.u[self.node - 1][self.component];
        let reach = self.coef * traj.s[self.phase];
        ((reach - du).max(0.0), (reach + du).max(0.0))
    }
}

/// Assembled subproblem plus what is needed to read its solution.
#[derive(Debug, Clone)]
pub struct Subproblem {
    pub program: ConicProgram,
    pub layout: Layout,
    /// `d_k = (x_k − ξ_k) / coupling`.
    pub coupling: f64,
    pub rate_limits: Vec<ScaledRateLimit>,
    /// Reference in nondimensional units.
    pub reference: Trajectory,
}

impl Subproblem {
    /// Decision vector of the (nondimensional) reference itself.
    pub fn reference_vector(&self) -> Vec<f64> {
        self.pack(&self.reference)
    }

    /// Stack a nondimensional trajectory into `z`.
    pub fn pack(&self, traj: &Trajectory) -> Vec<f64> {
        let l = self.layout;
        let mut z = vec![0.0; l.dim()];
        for k in 0..l.nodes {
            z[l.x(k)..l.x(k) + l.nx].copy_from_slice(traj.x[k].as_slice());
            z[l.xi(k)..l.xi(k) + l.nx].copy_from_slice(traj.xi[k].as_slice());
            z[l.u(k)..l.u(k) + l.nu].copy_from_slice(traj.u[k].as_slice());
            for i in 0..l.nx {
                z[l.d(k) + i] = (traj.x[k][i] - traj.xi[k][i]) / self.coupling;
            }
        }
        for p in 0..l.phases {
            z[l.s(p)] = traj.s[p];
        }
        for (r, lim) in self.rate_limits.iter().enumerate() {
            let (lo, hi) = lim.slacks(traj);
            z[l.slack(r)] = lo;
            z[l.slack(r) + 1] = hi;
        }
        z
    }

    /// Read a nondimensional trajectory out of `z`.
    pub fn unpack(&self, z: &[f64]) -> Trajectory {
        let l = self.layout;
        let seg = |start: usize, len: usize| DVector::from_column_slice(&z[start..start + len]);
        Trajectory {
            x: (0..l.nodes).map(|k| seg(l.x(k), l.nx)).collect(),
            xi: (0..l.nodes).map(|k| seg(l.xi(k), l.nx)).collect(),
            u: (0..l.nodes).map(|k| seg(l.u(k), l.nu)).collect(),
            s: (0..l.phases).map(|p| z[l.s(p)]).collect(),
            ..self.reference.clone()
        }
    }
}

fn scaled_block(block: &SetBlock, scales: &[f64]) -> Result<SetBlock> {
    let s = &scales[block.range()];
    let kind = match &block.kind {
        SetKind::Free => SetKind::Free,
        SetKind::Singleton { value } => SetKind::Singleton { value: value.iter().zip(s).map(|(v, s)| v / s).collect() },
        SetKind::Box { lo, hi } => SetKind::Box {
            lo: lo.iter().zip(s).map(|(v, s)| v / s).collect(),
            hi: hi.iter().zip(s).map(|(v, s)| v / s).collect(),
        },
        SetKind::Ball { center, radius } => {
            if s.iter().any(|&v| v != s[0]) {
                return Err(Error::build("ball block spans components with different scales"));
            }
            SetKind::Ball { center: center.iter().map(|c| c / s[0]).collect(), radius: radius / s[0] }
        }
    };
    Ok(SetBlock { kind, ..block.clone() })
}

/// Sort local blocks, fill gaps with free blocks, reject overlaps.
fn complete_partition(blocks: &[SetBlock], len: usize, what: &str) -> Result<Vec<SetBlock>> {
    let mut sorted = blocks.to_vec();
    sorted.sort_by_key(|b| b.start);
    let mut out = Vec::with_capacity(sorted.len() + 2);
    let mut next = 0;
    for b in sorted {
        if b.start < next {
            return Err(Error::build(format!("{what}: overlapping constraints on component {}", b.start)));
        }
        if b.start > next {
            out.push(SetBlock::free(next, b.start - next));
        }
        next = b.end();
        out.push(b);
    }
    if next > len {
        return Err(Error::build(format!("{what}: block extends past component {len}")));
    }
    if next < len {
        out.push(SetBlock::free(next, len - next));
    }
    Ok(out)
}

/// Express a physical-unit update in nondimensional coordinates.
pub fn scale_update(update: &DiscreteUpdate, sc: &VariableScaling) -> DiscreteUpdate {
    let inv_x = sc.state.map(|v| 1.0 / v);
    let mut a = update.a.clone();
    let mut b_minus = update.b_minus.clone();
    let mut b_plus = update.b_plus.clone();
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            a[(i, j)] *= inv_x[i] * sc.state[j];
        }
        for j in 0..b_minus.ncols() {
            b_minus[(i, j)] *= inv_x[i] * sc.control[j];
            b_plus[(i, j)] *= inv_x[i] * sc.control[j];
        }
    }
    DiscreteUpdate {
        a,
        b_minus,
        b_plus,
        s: update.s.component_mul(&inv_x) * sc.dilation,
        x_prop: update.x_prop.component_mul(&inv_x),
        residual: update.residual.component_mul(&inv_x),
    }
}

/// Build the nondimensional subproblem about `reference` (physical units).
pub fn assemble_subproblem(
    problem: &dyn SeqProblem,
    reference: &Trajectory,
    updates: &[DiscreteUpdate],
    spec: &ProblemSpec,
    settings: &ScpSettings,
) -> Result<Subproblem> {
    let layout = Layout {
        nx: problem.state_dim(),
        nu: problem.control_dim(),
        nodes: problem.num_nodes(),
        phases: problem.num_phases(),
        rates: spec.rate_limits.len(),
    };
    let (nx, nu, nodes, phases) = (layout.nx, layout.nu, layout.nodes, layout.phases);
    if nodes < 2 {
        return Err(Error::build("at least two nodes are required"));
    }
    if updates.len() != nodes - 1 {
        return Err(Error::build(format!("expected {} interval updates, got {}", nodes - 1, updates.len())));
    }
    for (k, up) in updates.iter().enumerate() {
        if up.a.shape() != (nx, nx) || up.b_minus.shape() != (nx, nu) || up.b_plus.shape() != (nx, nu) || up.s.len() != nx {
            return Err(Error::build(format!("interval {}: update has inconsistent dimensions", k + 1)));
        }
    }
    if reference.x.len() != nodes || reference.xi.len() != nodes || reference.u.len() != nodes || reference.s.len() != phases {
        return Err(Error::build("reference trajectory does not match the grid"));
    }
    for k in 0..nodes {
        if reference.x[k].len() != nx || reference.xi[k].len() != nx || reference.u[k].len() != nu {
            return Err(Error::build(format!("node {}: reference has inconsistent dimensions", k + 1)));
        }
    }
    if spec.state_sets.len() != nodes || spec.control_sets.len() != nodes || spec.dilation_bounds.len() != phases {
        return Err(Error::build("problem spec does not match the grid"));
    }
    if spec.terminal_cost.len() != nx {
        return Err(Error::build("terminal cost has wrong dimension"));
    }
    for lim in &spec.rate_limits {
        if lim.node == 0 || lim.node >= nodes || lim.component >= nu || lim.phase >= phases || !(lim.rate >= 0.0 && lim.rate.is_finite()) {
            return Err(Error::build(format!("invalid rate limit {lim:?}")));
        }
    }

    let sc = problem.scaling();
    let reference_nd = reference.nondimensionalize(sc);
    let w_tr = settings.w_tr;
    // d_k carries the virtual-state error with the same curvature as the
    // trust region: ½ w_tr ‖d‖² = ½ w_vse ‖x − ξ‖² when x − ξ = c d.
    let coupling = (settings.w_tr / settings.w_vse).sqrt();
    let rate_limits: Vec<ScaledRateLimit> = spec
        .rate_limits
        .iter()
        .map(|lim| ScaledRateLimit {
            node: lim.node,
            component: lim.component,
            phase: lim.phase,
            coef: lim.rate * sc.dilation / sc.control[lim.component],
        })
        .collect();

    let dim = layout.dim();
    let q_diag = vec![w_tr; dim];
    let mut q_lin = vec![0.0; dim];
    for k in 0..nodes {
        for i in 0..nx {
            q_lin[layout.x(k) + i] = -w_tr * reference_nd.x[k][i];
            q_lin[layout.xi(k) + i] = -w_tr * reference_nd.xi[k][i];
        }
        for j in 0..nu {
            q_lin[layout.u(k) + j] = -w_tr * reference_nd.u[k][j];
        }
    }
    for p in 0..phases {
        q_lin[layout.s(p)] = -w_tr * reference_nd.s[p];
    }
    for i in 0..nx {
        q_lin[layout.x(nodes - 1) + i] += settings.w_c * spec.terminal_cost[i];
    }
    for (r, lim) in rate_limits.iter().enumerate() {
        let (lo, hi) = lim.slacks(&reference_nd);
        q_lin[layout.slack(r)] = -w_tr * lo;
        q_lin[layout.slack(r) + 1] = -w_tr * hi;
    }

    let mut triplets = Vec::new();
    let mut h_rhs = vec![0.0; layout.rows()];
    for (k, up) in updates.iter().enumerate() {
        let up = scale_update(up, sc);
        let p = problem.interval_phase(k);
        for i in 0..nx {
            let row = k * nx + i;
            triplets.push((row, layout.x(k + 1) + i, 1.0));
            for j in 0..nx {
                triplets.push((row, layout.x(k) + j, -up.a[(i, j)]));
            }
            for j in 0..nu {
                triplets.push((row, layout.u(k) + j, -up.b_minus[(i, j)]));
                triplets.push((row, layout.u(k + 1) + j, -up.b_plus[(i, j)]));
            }
            triplets.push((row, layout.s(p), -up.s[i]));
            h_rhs[row] = up.residual[i];
        }
    }
    for k in 0..nodes {
        for i in 0..nx {
            let row = layout.coupling_row(k) + i;
            triplets.push((row, layout.x(k) + i, 1.0));
            triplets.push((row, layout.xi(k) + i, -1.0));
            triplets.push((row, layout.d(k) + i, -coupling));
        }
    }
    for (r, lim) in rate_limits.iter().enumerate() {
        let (cur, prev) = (layout.u(lim.node) + lim.component, layout.u(lim.node - 1) + lim.component);
        for (side, sign) in [(0, -1.0), (1, 1.0)] {
            let row = layout.rate_row(r) + side;
            triplets.push((row, layout.s(lim.phase), lim.coef));
            triplets.push((row, cur, sign));
            triplets.push((row, prev, -sign));
            triplets.push((row, layout.slack(r) + side, -1.0));
        }
    }
    let h_mat = SparseMatrix::from_triplets(layout.rows(), dim, &triplets)?;

    let state_scale: Vec<f64> = sc.state.iter().copied().collect();
    let control_scale: Vec<f64> = sc.control.iter().copied().collect();
    let mut blocks = vec![SetBlock::free(0, nodes * nx)];
    for k in 0..nodes {
        let node = complete_partition(&spec.state_sets[k], nx, &format!("node {} state", k + 1))?;
        for b in node {
            blocks.push(scaled_block(&b, &state_scale)?.shifted(layout.xi(k)));
        }
    }
    for k in 0..nodes {
        let node = complete_partition(&spec.control_sets[k], nu, &format!("node {} control", k + 1))?;
        for b in node {
            blocks.push(scaled_block(&b, &control_scale)?.shifted(layout.u(k)));
        }
    }
    for (p, &(lo, hi)) in spec.dilation_bounds.iter().enumerate() {
        blocks.push(SetBlock::boxed(layout.s(p), vec![sc.scale_dilation(lo)], vec![sc.scale_dilation(hi)]));
    }
    blocks.push(SetBlock::free(layout.d(0), nodes * nx));
    if !rate_limits.is_empty() {
        let n = 2 * rate_limits.len();
        blocks.push(SetBlock::boxed(layout.slack(0), vec![0.0; n], vec![f64::INFINITY; n]));
    }

    let program = ConicProgram::new(q_diag, q_lin, h_mat, h_rhs, blocks)
        .map_err(|e| Error::build(format!("assembling subproblem: {e}")))?;
    Ok(Subproblem { program, layout, coupling, rate_limits, reference: reference_nd })
}

/// Discretize every interval about `reference` (physical units).
pub fn discretize_all(problem: &dyn SeqProblem, reference: &Trajectory, substeps: usize) -> Result<Vec<DiscreteUpdate>> {
    (0..problem.num_nodes() - 1)
        .map(|k| {
            let r = IntervalReference {
                interval: k + 1,
                x_bar: reference.x[k].clone(),
                u_bar_k: reference.u[k].clone(),
                u_bar_k1: reference.u[k + 1].clone(),
                s_bar: reference.s[problem.interval_phase(k)],
                hold: problem.interval_hold(k),
            };
            discretize_interval(problem.interval_system(k).as_ref(), &r, substeps)
        })
        .collect()
}

/// `(J_tr, J_vse)` of `next` relative to `reference`, nondimensional.
/// The trust-region term covers `x`, `u` and `s`.
pub fn penalty_terms(reference_nd: &Trajectory, next_nd: &Trajectory) -> (f64, f64) {
    let sq = |a: &DVector<f64>, b: &DVector<f64>| (a - b).norm_squared();
    let mut j_tr = 0.0;
    let mut j_vse = 0.0;
    for k in 0..next_nd.x.len() {
        j_tr += sq(&next_nd.x[k], &reference_nd.x[k]) + sq(&next_nd.u[k], &reference_nd.u[k]);
        j_vse += sq(&next_nd.x[k], &next_nd.xi[k]);
    }
    j_tr += next_nd.s.iter().zip(&reference_nd.s).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    (j_tr, j_vse)
}

/// Per-interval defect `‖x_{k+1} − prop(x_k)‖∞` in nondimensional units.
pub fn propagation_defects(problem: &dyn SeqProblem, traj: &Trajectory, substeps: usize) -> Result<Vec<f64>> {
    let sc = problem.scaling();
    (0..problem.num_nodes() - 1)
        .map(|k| {
            let r = IntervalReference {
                interval: k + 1,
                x_bar: traj.x[k].clone(),
                u_bar_k: traj.u[k].clone(),
                u_bar_k1: traj.u[k + 1].clone(),
                s_bar: traj.s[problem.interval_phase(k)],
                hold: problem.interval_hold(k),
            };
            let end = propagate_nonlinear(problem.interval_system(k).as_ref(), &r, substeps)?;
            Ok(sc.scale_state(&(&traj.x[k + 1] - end)).amax())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScpIteration {
    pub iteration: usize,
    pub j_tr: f64,
    pub j_vse: f64,
    /// `w_c J + ½(w_tr J_tr + w_vse J_vse)` at the subproblem solution.
    pub objective: f64,
    /// Terminal cost `J(x_N)` alone.
    pub terminal_cost: f64,
    pub pipg: PipgStats,
    pub discretize_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct ScpReport {
    pub iterations: Vec<ScpIteration>,
    pub converged: bool,
    /// Final iterate, physical units.
    pub trajectory: Trajectory,
    /// Nondimensional propagation defect per interval of the final iterate.
    pub defects: Vec<f64>,
    pub wall_time_s: f64,
}

impl ScpReport {
    pub fn max_defect(&self) -> f64 {
        self.defects.iter().copied().fold(0.0, f64::max)
    }
}

/// Run the SCP loop from `initial` (physical units).
pub fn solve_scp(
    problem: &dyn SeqProblem,
    initial: Trajectory,
    settings: &ScpSettings,
    pipg_settings: &PipgSettings,
) -> Result<ScpReport> {
    settings.validate()?;
    pipg_settings.validate()?;
    let start = Instant::now();
    let sc = problem.scaling().clone();
    let mut reference = initial;
    let mut warm: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut iterations = Vec::new();
    let mut converged = false;

    for iteration in 1..=settings.max_scp_iters {
        let wrap = |e: Error| Error::Scp { iteration, source: Box::new(e) };
        let t0 = Instant::now();
        let updates = discretize_all(problem, &reference, settings.substeps).map_err(wrap)?;
        let discretize_time_s = t0.elapsed().as_secs_f64();
        let spec = problem.problem_spec(&reference).map_err(wrap)?;
        let sub = assemble_subproblem(problem, &reference, &updates, &spec, settings).map_err(wrap)?;

        let z0 = match &warm {
            Some((z, _)) => z.clone(),
            None => sub.reference_vector(),
        };
        let eta0 = match &warm {
            Some((_, eta)) => eta.clone(),
            None => vec![0.0; sub.program.num_rows()],
        };
        let sol = solve_preconditioned(&sub.program, Some((&z0, &eta0)), pipg_settings).map_err(wrap)?;
        if !sol.stats.converged {
            info!(
                "SCP iteration {iteration}: PIPG stopped after {} iterations (fixed point {:.2e}, equality {:.2e})",
                sol.stats.iterations, sol.stats.fixed_point_residual, sol.stats.equality_residual
            );
        }

        let sol_converged = sol.stats.converged;
        let next_nd = sub.unpack(&sol.z);
        let (j_tr, j_vse) = penalty_terms(&sub.reference, &next_nd);
        let terminal_cost = spec.terminal_cost.dot(&next_nd.x[sub.layout.nodes - 1]);
        let objective = settings.w_c * terminal_cost + 0.5 * (settings.w_tr * j_tr + settings.w_vse * j_vse);
        info!(
            "SCP {iteration:>2}: J_tr {j_tr:.3e}  J_vse {j_vse:.3e}  J {terminal_cost:.6}  PIPG {} its",
            sol.stats.iterations
        );
        iterations.push(ScpIteration {
            iteration,
            j_tr,
            j_vse,
            objective,
            terminal_cost,
            pipg: sol.stats.clone(),
            discretize_time_s,
        });

        reference = next_nd.redimensionalize(&sc);
        warm = Some((sol.z, sol.eta));
        if j_tr <= settings.eps_tr && j_vse <= settings.eps_vse && sol_converged {
            converged = true;
            break;
        }
    }

    if let Some(last) = iterations.last().filter(|it| !it.pipg.converged) {
        warn!(
            "final subproblem solved inexactly: PIPG stopped after {} iterations (fixed point {:.2e}, equality {:.2e})",
            last.pipg.iterations, last.pipg.fixed_point_residual, last.pipg.equality_residual
        );
    }
    if iterations.len() >= 3 {
        let tail: Vec<f64> = iterations[iterations.len() - 3..].iter().map(|it| it.j_tr).collect();
        if tail.windows(2).any(|w| w[1] > w[0]) {
            debug!("J_tr not monotone over the last three iterations: {tail:?}");
        }
    }

    let defects = propagation_defects(problem, &reference, settings.substeps * settings.check_substeps_factor)?;
    Ok(ScpReport { iterations, converged, trajectory: reference, defects, wall_time_s: start.elapsed().as_secs_f64() })
}
