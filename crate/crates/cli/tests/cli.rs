use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn rasmc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rasmc"))
        .args(args)
        .current_dir(dir)
        .env_remove("RASMC_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn scenario(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name).display().to_string()
}

/// Writes the shipped scenario with one line replaced.
fn variant(dir: &Path, from: &str, to: &str) -> PathBuf {
    let text = std::fs::read_to_string(scenario("default.toml")).unwrap();
    assert!(text.contains(from), "{from}");
    let path = dir.join("variant.toml");
    std::fs::write(&path, text.replacen(from, to, 1)).unwrap();
    path
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_telemetry_header_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = rasmc(&["run", "--t-end", "2", "--out", out.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("ticks                 101"));

    let mut reader = csv::Reader::from_path(out.join("telemetry.csv")).unwrap();
    let header = reader.headers().unwrap().clone();
    assert_eq!(&header[0], "t_s");
    let times: Vec<f64> = reader.records().map(|r| r.unwrap()[0].parse().unwrap()).collect();
    assert_eq!(times.len(), 101);
    assert!(times.iter().enumerate().all(|(n, t)| (t - n as f64 * 0.02).abs() < 1e-9));

    let run_header: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("run_header.json")).unwrap()).unwrap();
    assert_eq!(run_header["telemetry_version"], "1.0");
    assert_eq!(run_header["f_ctrl"], 50.0);
    assert_eq!(run_header["k_d"].as_array().unwrap().len(), 3);
    assert!(run_header["overrides"][0].as_str().unwrap().contains("t_end"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["ticks"], 101);
}

#[test]
fn output_directory_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_rasmc"))
        .args(["run", "--t-end", "0.1"])
        .current_dir(dir.path())
        .env("RASMC_OUT_DIR", &out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("telemetry.csv").exists());
}

#[test]
fn inadmissible_bounds_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = rasmc(&["gains", "--scenario", &scenario("inadmissible.toml")], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("spectral radius"), "{}", stderr(&o));
    let o = rasmc(&["run", "--scenario", &scenario("inadmissible.toml"), "--out", "x"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(!dir.path().join("x/telemetry.csv").exists());
}

#[test]
fn schema_problems_exit_two_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let path = variant(dir.path(), "D_l_xi = 0.5", "D_l_xi = 1.5");
    let o = rasmc(&["trim", "--scenario", path.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("damage.D_l_xi"), "{}", stderr(&o));
}

#[test]
fn missing_scenario_file_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = rasmc(&["trim", "--scenario", "nowhere.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn infeasible_trim_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let path = variant(dir.path(), "C_L_max = 1.2", "C_L_max = 0.25");
    let o = rasmc(&["trim", "--scenario", path.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn divergence_exits_five_and_keeps_partial_telemetry() {
    let dir = tempfile::tempdir().unwrap();
    let path = variant(dir.path(), "course0_deg = 0.0", "course0_deg = 0.0\ndivergence_limit = 100.0");
    let o = rasmc(&["run", "--scenario", path.to_str().unwrap(), "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("out/telemetry.csv")).unwrap();
    assert!(text.lines().count() >= 2);
}

#[test]
fn trim_prints_the_operating_point() {
    let dir = tempfile::tempdir().unwrap();
    let o = rasmc(&["trim"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    for key in ["airspeed  55.0000 m/s", "alpha", "elevator", "throttle"] {
        assert!(text.contains(key), "{key} in {text}");
    }
}

#[test]
fn gains_prints_radius_and_caps() {
    let dir = tempfile::tempdir().unwrap();
    let o = rasmc(&["gains"], dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("rho(D) = 0.561"), "{}", stdout(&o));
}

#[test]
fn plotdata_splits_columns() {
    let dir = tempfile::tempdir().unwrap();
    assert!(rasmc(&["run", "--t-end", "1", "--out", "run"], dir.path()).status.success());
    let o = rasmc(&["plotdata", "--telemetry", "run/telemetry.csv", "--out", "plots"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let gains = std::fs::read_to_string(dir.path().join("plots/gains.csv")).unwrap();
    let mut lines = gains.lines();
    assert_eq!(lines.next(), Some("t_s,k1,k2,k3"));
    assert_eq!(lines.count(), 51);
    for name in ["attitude", "outer_loop", "inputs", "sliding"] {
        assert!(dir.path().join(format!("plots/{name}.csv")).exists(), "{name}");
    }
}

#[test]
fn verify_prints_one_line_per_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let o = rasmc(&["verify", "--draws", "2"], dir.path());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().filter(|l| l.starts_with("[PASS]") || l.starts_with("[FAIL]")).collect();
    assert_eq!(lines.len(), 8, "{text}");
    assert_eq!(o.status.success(), lines.iter().all(|l| l.starts_with("[PASS]")));
}

#[test]
fn batch_reports_each_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let short = variant(dir.path(), "t_end = 120.0", "t_end = 1.0");
    let o = rasmc(&["batch", short.to_str().unwrap(), &scenario("inadmissible.toml"), "--out", "batch"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let text = stdout(&o);
    assert!(text.contains("ok    ") && text.contains("FAIL  "), "{text}");
    assert!(dir.path().join("batch/000-variant/telemetry.csv").exists());
}
