//! Output files: `trajectory.csv`, `diagnostics.json`, `summary.txt`.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use nalgebra::DVector;
use seco_core::rocket::{FeasibilityReport, RocketProblem, NUM_PHASES};
use seco_core::scp::{ScpIteration, ScpReport, Trajectory};
use seco_core::vehicle::{PhaseTag, CONTROL_DIM, STATE_DIM};
use serde::Serialize;

pub const STATE_COLUMNS: [&str; STATE_DIM] = ["m", "r_x", "r_z", "v_x", "v_z", "theta", "omega"];
pub const CONTROL_COLUMNS: [&str; CONTROL_DIM] = ["T", "delta"];

/// `k, t, <state>, <control>, xi_<state>, phase`.
pub fn csv_header() -> Vec<String> {
    let mut h = vec!["k".to_string(), "t".to_string()];
    h.extend(STATE_COLUMNS.iter().map(|s| s.to_string()));
    h.extend(CONTROL_COLUMNS.iter().map(|s| s.to_string()));
    h.extend(STATE_COLUMNS.iter().map(|s| format!("xi_{s}")));
    h.push("phase".to_string());
    h
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_trajectory_csv(path: &Path, problem: &RocketProblem, traj: &Trajectory) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(csv_header())?;
    let times = traj.node_times();
    for k in 0..traj.num_nodes() {
        let mut row = vec![(k + 1).to_string(), num(times[k])];
        row.extend(traj.x[k].iter().map(|v| num(*v)));
        row.extend(traj.u[k].iter().map(|v| num(*v)));
        row.extend(traj.xi[k].iter().map(|v| num(*v)));
        row.push(problem.plan.phase_of_node(k + 1).name().to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a trajectory written by [`write_trajectory_csv`]. Dilation factors
/// are recovered from the time column; the returned spread is the largest
/// disagreement between an interval's duration and its phase's factor.
pub fn read_trajectory_csv(path: &Path, problem: &RocketProblem) -> Result<(Trajectory, f64)> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != csv_header() {
        bail!("column mismatch in {}: expected [{}], found [{}]", path.display(), csv_header().join(","), header.join(","));
    }
    let n = problem.plan.n;
    let mut t = Vec::with_capacity(n);
    let (mut x, mut u, mut xi) = (Vec::new(), Vec::new(), Vec::new());
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = row + 2;
        let field = |i: usize| -> Result<f64> {
            rec[i].trim().parse::<f64>().with_context(|| format!("line {line}: column {} is not a number", header[i]))
        };
        let k: usize = rec[0].parse().with_context(|| format!("line {line}: bad node index"))?;
        ensure!(k == row + 1, "line {line}: expected node {}, found {k}", row + 1);
        t.push(field(1)?);
        x.push(DVector::from_iterator(STATE_DIM, (0..STATE_DIM).map(|i| field(2 + i)).collect::<Result<Vec<_>>>()?));
        u.push(DVector::from_iterator(CONTROL_DIM, (0..CONTROL_DIM).map(|i| field(2 + STATE_DIM + i)).collect::<Result<Vec<_>>>()?));
        xi.push(DVector::from_iterator(
            STATE_DIM,
            (0..STATE_DIM).map(|i| field(2 + STATE_DIM + CONTROL_DIM + i)).collect::<Result<Vec<_>>>()?,
        ));
        let tag = &rec[header.len() - 1];
        let expected = problem.plan.phase_of_node(k.min(n).max(1));
        ensure!(
            PhaseTag::from_name(tag) == Some(expected),
            "line {line}: phase '{tag}' does not match the configured grid ({})",
            expected.name()
        );
    }
    ensure!(x.len() == n, "{} has {} nodes, configuration expects {n}", path.display(), x.len());

    let mut sums = [0.0; NUM_PHASES];
    let counts = problem.plan.interval_counts();
    for k in 1..n {
        sums[problem.plan.phase_of_interval(k).index()] += t[k] - t[k - 1];
    }
    let s: Vec<f64> = (0..NUM_PHASES).map(|p| if counts[p] > 0 { sums[p] / counts[p] as f64 } else { 0.0 }).collect();
    let spread = (1..n)
        .map(|k| ((t[k] - t[k - 1]) - s[problem.plan.phase_of_interval(k).index()]).abs())
        .fold(0.0, f64::max);
    let traj = Trajectory {
        x,
        xi,
        u,
        s,
        interval_phase: (1..n).map(|k| problem.plan.phase_of_interval(k).index()).collect(),
        interval_hold: problem.plan.interval_hold.clone(),
    };
    Ok((traj, spread))
}

#[derive(Debug, Serialize)]
pub struct PhaseSummary {
    pub phase: &'static str,
    pub intervals: usize,
    pub dilation: f64,
    pub duration: f64,
}

#[derive(Debug, Serialize)]
pub struct Diagnostics<'a> {
    pub converged: bool,
    pub scp_iterations: usize,
    pub wall_time_s: f64,
    pub pipg_mean_time_s: f64,
    pub final_mass: f64,
    pub propellant_used: f64,
    pub flight_time: f64,
    pub pdi_altitude: f64,
    pub pdi_speed: f64,
    pub grid: Grid,
    pub phases: Vec<PhaseSummary>,
    pub max_defect: f64,
    pub defects: &'a [f64],
    pub max_violation_scaled: f64,
    pub single_crossing: bool,
    pub feasibility: &'a FeasibilityReport,
    pub iterations: &'a [ScpIteration],
}

#[derive(Debug, Serialize)]
pub struct Grid {
    pub n: usize,
    pub k_ignition: usize,
    pub k_switch: usize,
    pub k_trigger: usize,
}

pub fn diagnostics<'a>(problem: &RocketProblem, report: &'a ScpReport, feas: &'a FeasibilityReport) -> Diagnostics<'a> {
    let traj = &report.trajectory;
    let (pdi_altitude, pdi_speed) = problem.pdi_state(traj);
    let counts = problem.plan.interval_counts();
    let durations = problem.phase_durations(traj);
    let final_mass = traj.x[traj.num_nodes() - 1][0];
    let n_it = report.iterations.len().max(1) as f64;
    Diagnostics {
        converged: report.converged,
        scp_iterations: report.iterations.len(),
        wall_time_s: report.wall_time_s,
        pipg_mean_time_s: report.iterations.iter().map(|it| it.pipg.wall_time_s).sum::<f64>() / n_it,
        final_mass,
        propellant_used: traj.x[0][0] - final_mass,
        flight_time: traj.final_time(),
        pdi_altitude,
        pdi_speed,
        grid: Grid {
            n: problem.plan.n,
            k_ignition: problem.plan.k_ignition,
            k_switch: problem.plan.k_switch,
            k_trigger: problem.plan.k_trigger,
        },
        phases: PhaseTag::ALL
            .iter()
            .map(|tag| PhaseSummary {
                phase: tag.name(),
                intervals: counts[tag.index()],
                dilation: traj.s[tag.index()],
                duration: durations[tag.index()],
            })
            .collect(),
        max_defect: report.max_defect(),
        defects: &report.defects,
        max_violation_scaled: feas.max_scaled(),
        single_crossing: feas.single_crossing,
        feasibility: feas,
        iterations: &report.iterations,
    }
}

pub fn summary_text(d: &Diagnostics) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "converged:          {}", if d.converged { "yes" } else { "no" });
    let _ = writeln!(s, "SCP iterations:     {}", d.scp_iterations);
    let _ = writeln!(s, "flight time:        {:.3} s", d.flight_time);
    let _ = writeln!(s, "final mass:         {:.3} kg", d.final_mass);
    let _ = writeln!(s, "propellant used:    {:.3} kg", d.propellant_used);
    let _ = writeln!(s, "PDI altitude:       {:.2} m", d.pdi_altitude);
    let _ = writeln!(s, "PDI speed:          {:.2} m/s", d.pdi_speed);
    for p in &d.phases {
        let _ = writeln!(s, "  {:<17} {:>2} intervals x {:.4} s = {:.3} s", p.phase, p.intervals, p.dilation, p.duration);
    }
    let _ = writeln!(s, "max violation:      {:.3e} (scaled)", d.max_violation_scaled);
    let _ = writeln!(s, "single crossing:    {}", if d.single_crossing { "yes" } else { "no" });
    let _ = writeln!(s, "max defect:         {:.3e} (scaled)", d.max_defect);
    let _ = writeln!(s, "wall time:          {:.3} s (mean PIPG {:.2} ms)", d.wall_time_s, d.pipg_mean_time_s * 1e3);
    s
}

/// Per-family table printed by `verify`.
pub fn feasibility_table(feas: &FeasibilityReport, defect: f64, spread: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<18} {:>14} {:>14} {:>5}", "family", "max_violation", "scaled", "at");
    for f in &feas.families {
        let _ = writeln!(s, "{:<18} {:>14.6e} {:>14.6e} {:>5}", f.family, f.max_violation, f.max_violation_scaled, f.worst_index);
    }
    let _ = writeln!(s, "{:<18} {:>14} {:>14.6e}", "defect", "", defect);
    let _ = writeln!(s, "{:<18} {:>14.6e}", "time_grid", spread);
    let _ = writeln!(s, "single_crossing    {}", feas.single_crossing);
    s
}
