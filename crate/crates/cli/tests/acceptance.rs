//! Acceptance gates, one line per criterion. Run with `cargo test --test acceptance`.
//!
//! Soft and informational criteria are reported but do not fail the run.

use std::process::{Command, ExitCode};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use seco_core::conic::project_all;
use seco_core::rocket::idx;
use seco_core::scp::discretize_all;
use seco_core::{
    discretize_interval, pipg, solve_seco, ConicProgram, ContinuousSystem, HoldKind, IntervalReference, LinearSystem,
    PhaseTag, PipgSettings, RocketModel, RocketParams, ScpSettings, SeqProblem, SetBlock, SparseMatrix,
};
use seco_testkit::fd::{central_jacobian, column_relative_error};
use seco_testkit::grid::project_2d;
use seco_testkit::qp::{random_qp, solve_oracle, RandomQp, Set};

#[derive(Clone, Copy, PartialEq)]
enum Gate {
    Hard,
    Soft,
    Info,
}

struct Outcome {
    name: &'static str,
    gate: Gate,
    pass: bool,
    detail: String,
}

fn check(name: &'static str, gate: Gate, limit_s: f64, body: impl FnOnce() -> (bool, String)) -> Outcome {
    let t0 = Instant::now();
    let (pass, detail) = body();
    let seconds = t0.elapsed().as_secs_f64();
    let pass = pass && seconds < limit_s;
    Outcome { name, gate, pass, detail: format!("{detail}; {seconds:.2} s (limit {limit_s} s)") }
}

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

fn discretization() -> (bool, String) {
    let sys = LinearSystem::double_integrator(1);
    let foh = discretize_interval(&sys, &reference(HoldKind::Foh, &[0.0, 0.0], &[0.0], &[0.0], 1.0), 16).unwrap();
    let zoh = discretize_interval(&sys, &reference(HoldKind::Zoh, &[0.0, 0.0], &[0.0], &[0.0], 1.0), 16).unwrap();
    let col = |v: [f64; 2]| DMatrix::from_column_slice(2, 1, &v);
    let err = [
        (&foh.a - DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0])).amax(),
        (&foh.b_minus - col([1.0 / 3.0, 0.5])).amax(),
        (&foh.b_plus - col([1.0 / 6.0, 0.5])).amax(),
        (&zoh.b_minus - col([0.5, 1.0])).amax(),
        zoh.b_plus.amax(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    (err <= 1e-9, format!("max abs error {err:.2e} (tol 1e-9)"))
}

fn jacobians() -> (bool, String) {
    let p = RocketParams::default();
    let mut rng = StdRng::seed_from_u64(7);
    let x_scale = [1e5, 1e3, 1e3, 100.0, 100.0, 1.0, 0.1];
    let u_scale = [1e6, 0.1];
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x = [
            rng.random_range(85_000.0..100_000.0),
            rng.random_range(0.0..1000.0),
            rng.random_range(-100.0..100.0),
            rng.random_range(-100.0..10.0),
            rng.random_range(-20.0..20.0),
            rng.random_range(-1.6..1.6),
            rng.random_range(-0.1..0.1),
        ];
        let u = [rng.random_range(0.0..6.6e6), rng.random_range(-0.18..0.18)];
        let model = RocketModel::new(&p, PhaseTag::ALL[rng.random_range(0..4)]);
        let (xv, uv) = (DVector::from_column_slice(&x), DVector::from_column_slice(&u));
        let lin = model.linearize(&xv, &uv).unwrap();
        let fx = |y: &[f64]| model.derivative(&DVector::from_column_slice(y), &uv).unwrap().as_slice().to_vec();
        let fu = |v: &[f64]| model.derivative(&xv, &DVector::from_column_slice(v)).unwrap().as_slice().to_vec();
        let hx: Vec<f64> = (0..7).map(|j| 1e-5 * x[j].abs().max(x_scale[j])).collect();
        let hu: Vec<f64> = (0..2).map(|j| 1e-5 * u[j].abs().max(u_scale[j])).collect();
        worst = worst.max(column_relative_error(&lin.a, &central_jacobian(fx, &x, &hx)));
        worst = worst.max(column_relative_error(&lin.b, &central_jacobian(fu, &u, &hu)));
    }
    (worst < 1e-5, format!("100 points, max relative error {worst:.2e} (tol 1e-5)"))
}

/// `min_extent` bounds box widths and ball radii from below.
fn random_block(rng: &mut StdRng, kind: usize, len: usize, min_extent: f64) -> SetBlock {
    let mut vals = || (0..len).map(|_| rng.random_range(-3.0..3.0)).collect::<Vec<f64>>();
    match kind {
        0 => SetBlock::free(0, len),
        1 => SetBlock::singleton(0, vals()),
        2 => {
            let lo = vals();
            let hi = lo.iter().map(|l| l + rng.random_range(min_extent..3.0)).collect();
            SetBlock::boxed(0, lo, hi)
        }
        _ => {
            let c = vals();
            SetBlock::ball(0, c, rng.random_range(min_extent..3.0))
        }
    }
}

fn projections() -> (bool, String) {
    let mut rng = StdRng::seed_from_u64(1);
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let mut failures = Vec::new();
    for kind in 0..4 {
        for _ in 0..1000 {
            let len = rng.random_range(1..6);
            let b = random_block(&mut rng, kind, len, 0.0);
            let y1: Vec<f64> = (0..len).map(|_| rng.random_range(-100.0..100.0)).collect();
            let y2: Vec<f64> = (0..len).map(|_| rng.random_range(-100.0..100.0)).collect();
            let (p1, p2) = (b.project(&y1), b.project(&y2));
            if b.project(&p1) != p1 {
                failures.push(format!("idempotence kind {kind}"));
            }
            if dist(&p1, &p2) > dist(&y1, &y2) * (1.0 + 1e-12) {
                failures.push(format!("nonexpansive kind {kind}"));
            }
        }
        for _ in 0..25 {
            let b = random_block(&mut rng, kind, 2, 0.25);
            let y = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
            if let Some(g) = project_2d(y, -6.0, 6.0, 1201, |p| b.contains(&p, 1e-12)) {
                let p = b.project(&y);
                let gap = dist(&g, &y) - dist(&p, &y);
                if !(-1e-12..=0.01 * 2f64.sqrt()).contains(&gap) || !b.contains(&p, 0.0) {
                    failures.push(format!("grid oracle kind {kind}"));
                }
            }
        }
    }
    let blocks = vec![SetBlock::ball(0, vec![0.0, 0.0], 1.0), SetBlock::boxed(2, vec![0.0], vec![1.0])];
    let mut z = vec![3.0, 4.0, 2.0];
    project_all(&blocks, &mut z);
    if (z[0] - 0.6).abs() > 1e-15 || (z[1] - 0.8).abs() > 1e-15 || z[2] != 1.0 {
        failures.push("separable example".into());
    }
    let summary = if failures.is_empty() { "all hold".to_string() } else { format!("failures: {failures:?}") };
    (failures.is_empty(), format!("4 block types x 1000 pairs, 2-D grid 1201^2; {summary}"))
}

fn to_program(qp: &RandomQp) -> ConicProgram {
    let h = SparseMatrix::from_triplets(qp.h_mat.nrows(), qp.dim(), &qp.h_triplets()).unwrap();
    let blocks = qp
        .blocks
        .iter()
        .map(|b| match &b.set {
            Set::Free => SetBlock::free(b.start, b.len),
            Set::Singleton(v) => SetBlock::singleton(b.start, v.clone()),
            Set::Box { lo, hi } => SetBlock::boxed(b.start, lo.clone(), hi.clone()),
            Set::Ball { center, radius } => SetBlock::ball(b.start, center.clone(), *radius),
        })
        .collect();
    ConicProgram::new(qp.q_diag.clone(), qp.q_lin.clone(), h, qp.h_rhs.clone(), blocks).unwrap()
}

fn pipg_oracle() -> (bool, String) {
    let settings = PipgSettings {
        omega: 1.0,
        max_iters: 2_000_000,
        eps_fixed_point: 1e-10,
        eps_equality: 1e-10,
        ..PipgSettings::default()
    };
    let mut rng = StdRng::seed_from_u64(2024);
    let (mut obj_err, mut residual) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let qp = random_qp(&mut rng, 60, 30);
        let oracle = solve_oracle(&qp);
        let prog = to_program(&qp);
        let sol = pipg::solve_preconditioned(&prog, None, &settings).unwrap();
        let (fp, eq) = prog.kkt_residual(&sol.z, &sol.eta, sol.stats.alpha);
        residual = residual.max(fp).max(eq);
        obj_err = obj_err.max((prog.objective(&sol.z) - oracle.objective).abs() / oracle.objective.abs().max(1.0));
    }
    (
        obj_err <= 1e-6 && residual <= 1e-8,
        format!("50 programs, objective rel error {obj_err:.2e} (tol 1e-6), residual {residual:.2e} (tol 1e-8)"),
    )
}

fn main() -> ExitCode {
    let mut outcomes = vec![
        check("discretization oracle", Gate::Hard, 1.0, discretization),
        check("jacobian check", Gate::Hard, 5.0, jacobians),
        check("projection suite", Gate::Hard, 10.0, projections),
        check("pipg oracle equivalence", Gate::Hard, 60.0, pipg_oracle),
    ];

    let t0 = Instant::now();
    let solved = solve_seco(&RocketParams::default(), &ScpSettings::default(), &PipgSettings::default());
    let solve_s = t0.elapsed().as_secs_f64();
    let (problem, report) = match solved {
        Ok(r) => r,
        Err(e) => {
            println!("FAIL  end-to-end solve: {e}");
            return ExitCode::FAILURE;
        }
    };

    outcomes.push(check("end-to-end rocket solve", Gate::Hard, 60.0, || {
        let feas = problem.check_feasibility(&report.trajectory, 1e-6);
        let trig = report.trajectory.x[problem.plan.k_trigger - 1][idx::RX] - problem.params.h_trigger;
        let its = report.iterations.len();
        let ok = report.converged
            && its <= 15
            && feas.max_scaled() <= 1e-6
            && trig.abs() <= 1e-3
            && feas.single_crossing
            && report.max_defect() <= 1e-3
            && solve_s < 60.0;
        (
            ok,
            format!(
                "converged {}, {its} SCP iterations (max 15), max violation {:.2e} (tol 1e-6), trigger error {:.2e} m \
                 (tol 1e-3), single crossing {}, max defect {:.2e} (tol 1e-3), solve {solve_s:.2} s (limit 60 s)",
                report.converged,
                feas.max_scaled(),
                trig.abs(),
                feas.single_crossing,
                report.max_defect()
            ),
        )
    }));

    outcomes.push(check("PDI calibration", Gate::Soft, f64::INFINITY, || {
        let (alt, speed) = problem.pdi_state(&report.trajectory);
        let (da, dv) = (alt / 490.34 - 1.0, speed / 86.28 - 1.0);
        (
            da.abs() <= 0.2 && dv.abs() <= 0.2,
            format!("altitude {alt:.2} m ({:+.1}%), speed {speed:.2} m/s ({:+.1}%), band ±20%", da * 100.0, dv * 100.0),
        )
    }));

    outcomes.push(check("ZOH structural check", Gate::Hard, 5.0, || {
        let zoh = [1, problem.plan.k_switch - 1];
        let updates = discretize_all(&problem, &report.trajectory, ScpSettings::default().substeps).unwrap();
        let ok = zoh.iter().all(|&k| {
            problem.interval_hold(k - 1) == HoldKind::Zoh && updates[k - 1].b_plus.iter().all(|&v| v == 0.0)
        }) && problem.plan.zoh_intervals() == zoh;
        (ok, format!("B+ identically zero on intervals {zoh:?}"))
    }));

    outcomes.push(check("determinism", Gate::Hard, 60.0, || {
        let dirs = [tempfile::TempDir::new().unwrap(), tempfile::TempDir::new().unwrap()];
        let mut csvs = Vec::new();
        for d in &dirs {
            let status = Command::new(env!("CARGO_BIN_EXE_seco"))
                .args(["run", "--default", "--seed-free", "--format", "csv", "--out"])
                .arg(d.path())
                .output()
                .expect("binary runs")
                .status;
            csvs.push((status.success(), std::fs::read(d.path().join("trajectory.csv")).unwrap_or_default()));
        }
        let ok = csvs.iter().all(|(s, b)| *s && !b.is_empty()) && csvs[0].1 == csvs[1].1;
        (ok, format!("two default runs, trajectory.csv {} bytes each, identical {}", csvs[0].1.len(), csvs[0].1 == csvs[1].1))
    }));

    let pipg_mean = report.iterations.iter().map(|it| it.pipg.wall_time_s).sum::<f64>() / report.iterations.len() as f64;
    outcomes.push(check("performance envelope", Gate::Info, f64::INFINITY, || {
        (
            report.wall_time_s < 1.0,
            format!("full solve {:.3} s (target < 1 s), mean PIPG {:.2} ms per subproblem", report.wall_time_s, pipg_mean * 1e3),
        )
    }));

    let mut hard_fail = false;
    for o in &outcomes {
        let tag = match (o.pass, o.gate) {
            (true, _) => "PASS",
            (false, Gate::Hard) => "FAIL",
            (false, Gate::Soft) => "FAIL (soft, not gated)",
            (false, Gate::Info) => "FAIL (informational)",
        };
        let kind = match o.gate {
            Gate::Hard => "",
            Gate::Soft => " [soft]",
            Gate::Info => " [info]",
        };
        println!("{tag}  {}{kind}: {}", o.name, o.detail);
        hard_fail |= o.gate == Gate::Hard && !o.pass;
    }
    if hard_fail {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
