use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use serde_json::Value;
use tempfile::TempDir;

fn seco(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seco")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// One default run shared by every test in this file.
fn default_run() -> &'static (TempDir, Output) {
    static RUN: OnceLock<(TempDir, Output)> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = TempDir::new().unwrap();
        let out = seco(&["run", "--default", "--out", dir.path().to_str().unwrap()]);
        (dir, out)
    })
}

fn out_file(name: &str) -> PathBuf {
    default_run().0.path().join(name)
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path
}

fn default_config_with(overrides: &[(&str, &str)]) -> String {
    let text = stdout(&seco(&["default-config"]));
    text.lines()
        .map(|line| {
            let key = line.split('=').next().unwrap_or("").trim();
            match overrides.iter().find(|(k, _)| *k == key) {
                Some((k, v)) => format!("{k} = {v}"),
                None => line.to_string(),
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect();
    (header, rows)
}

#[test]
fn default_run_writes_all_outputs() {
    let (dir, out) = default_run();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(out));
    for f in ["trajectory.csv", "diagnostics.json", "summary.txt"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    let summary = fs::read_to_string(out_file("summary.txt")).unwrap();
    assert!(summary.contains("converged:          yes"));
    assert!(summary.contains("PDI altitude:"));
    assert!(summary.contains("PDI speed:"));
    assert_eq!(stdout(out), summary);
}

#[test]
fn csv_schema_and_time_column() {
    default_run();
    let (header, rows) = read_csv(&out_file("trajectory.csv"));
    let want: Vec<&str> = vec![
        "k", "t", "m", "r_x", "r_z", "v_x", "v_z", "theta", "omega", "T", "delta", "xi_m", "xi_r_x", "xi_r_z", "xi_v_x",
        "xi_v_z", "xi_theta", "xi_omega", "phase",
    ];
    assert_eq!(header, want);
    assert_eq!(rows.len(), 16);

    let diag: Value = serde_json::from_str(&fs::read_to_string(out_file("diagnostics.json")).unwrap()).unwrap();
    let dilation = |tag: &str| {
        diag["phases"].as_array().unwrap().iter().find(|p| p["phase"] == tag).unwrap()["dilation"].as_f64().unwrap()
    };
    let t: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(t[0], 0.0);
    for k in 1..rows.len() {
        let s = dilation(&rows[k - 1][18]);
        assert!(((t[k] - t[k - 1]) - s).abs() <= 1e-12 * s.max(1.0), "interval {k}");
    }
    // Full double precision: 17 significant digits.
    assert!(rows[3][2].split('e').next().unwrap().replace(['-', '.'], "").len() == 17, "{}", rows[3][2]);
}

#[test]
fn phase_tags_mark_grid_boundaries() {
    default_run();
    let (_, rows) = read_csv(&out_file("trajectory.csv"));
    let tags: Vec<&str> = rows.iter().map(|r| r[18].as_str()).collect();
    let starts: Vec<usize> = (1..tags.len()).filter(|&i| tags[i] != tags[i - 1]).map(|i| i + 1).collect();
    assert_eq!(starts, vec![2, 7, 12]);
}

#[test]
fn diagnostics_schema_matches_plot_contract() {
    default_run();
    let diag: Value = serde_json::from_str(&fs::read_to_string(out_file("diagnostics.json")).unwrap()).unwrap();
    for key in [
        "converged", "scp_iterations", "wall_time_s", "pipg_mean_time_s", "final_mass", "propellant_used", "flight_time",
        "pdi_altitude", "pdi_speed", "grid", "phases", "max_defect", "defects", "max_violation_scaled",
        "single_crossing", "feasibility", "iterations",
    ] {
        assert!(diag.get(key).is_some(), "missing {key}");
    }
    let iterations = diag["iterations"].as_array().unwrap();
    assert_eq!(iterations.len() as u64, diag["scp_iterations"].as_u64().unwrap());
    for (i, it) in iterations.iter().enumerate() {
        assert_eq!(it["iteration"].as_u64(), Some(i as u64 + 1));
        for key in ["j_tr", "j_vse", "objective", "terminal_cost"] {
            assert!(it[key].is_f64(), "{key}");
        }
        for key in ["iterations", "fixed_point_residual", "equality_residual", "wall_time_s", "converged"] {
            assert!(it["pipg"].get(key).is_some(), "pipg.{key}");
        }
    }
    assert_eq!(diag["grid"]["k_ignition"], 2);
    assert_eq!(diag["grid"]["k_switch"], 7);
    assert_eq!(diag["grid"]["k_trigger"], 12);
    assert_eq!(diag["defects"].as_array().unwrap().len(), 15);
    assert_eq!(diag["converged"], true);
}

#[test]
fn verify_accepts_produced_trajectory() {
    default_run();
    let out = seco(&["verify", "--trajectory", out_file("trajectory.csv").to_str().unwrap(), "--default"]);
    assert_eq!(out.status.code(), Some(0), "{}{}", stdout(&out), stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("trigger_altitude"));
    assert!(text.trim_end().ends_with("PASS"));
}

#[test]
fn verify_rejects_perturbed_altitude() {
    default_run();
    let dir = TempDir::new().unwrap();
    let (header, mut rows) = read_csv(&out_file("trajectory.csv"));
    let rx: f64 = rows[11][3].parse().unwrap();
    rows[11][3] = format!("{:.16e}", rx + 1.0);
    let path = dir.path().join("perturbed.csv");
    let mut w = csv::Writer::from_path(&path).unwrap();
    w.write_record(&header).unwrap();
    for r in &rows {
        w.write_record(r).unwrap();
    }
    w.flush().unwrap();

    let out = seco(&["verify", "--trajectory", path.to_str().unwrap(), "--default"]);
    assert_eq!(out.status.code(), Some(2));
    let text = stdout(&out);
    assert!(text.trim_end().ends_with("FAIL"));
    let line = text.lines().find(|l| l.starts_with("trigger_altitude")).unwrap();
    let reported: f64 = line.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!((reported - 1.0).abs() < 1e-3, "{line}");
}

#[test]
fn verify_reports_missing_file_and_bad_columns() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.csv");
    let out = seco(&["verify", "--trajectory", missing.to_str().unwrap(), "--default"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("nope.csv"));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "k,t,m\n1,0,1\n").unwrap();
    let out = seco(&["verify", "--trajectory", bad.to_str().unwrap(), "--default"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("column mismatch"));
}

#[test]
fn bad_grid_is_a_configuration_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &default_config_with(&[("n_nodes", "10")]));
    let out = seco(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("k_trigger <= N"), "{}", stderr(&out));
}

#[test]
fn malformed_config_names_the_line() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "g0 = 9.81\nisp = \"fast\"\n");
    let out = seco(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("line 2") && err.contains("isp"), "{err}");

    let cfg = write_config(dir.path(), "warp_factor = 9\n");
    let out = seco(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("warp_factor"));
}

#[test]
fn unconverged_run_exits_with_two() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &default_config_with(&[("max_scp_iters", "1")]));
    let out_dir = dir.path().join("o");
    let out = seco(&["run", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(out_dir.join("trajectory.csv").is_file());
    assert!(!out_dir.join("diagnostics.json").exists());
    assert!(stdout(&out).contains("converged:          no"));
}

#[test]
fn default_config_round_trips_to_identical_output() {
    default_run();
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &stdout(&seco(&["default-config"])));
    let out_dir = dir.path().join("o");
    let out = seco(&["run", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "--seed-free"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(fs::read(out_dir.join("trajectory.csv")).unwrap(), fs::read(out_file("trajectory.csv")).unwrap());
}
