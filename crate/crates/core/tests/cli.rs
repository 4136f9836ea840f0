use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kvfrac::energy::{EnergyLedger, LEDGER_HEADER};
use kvfrac::scenario::parse_scenario;
use kvfrac::stepper::run;

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn kvfrac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kvfrac"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn zero_scenario_gives_zero_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = scenarios().join("zero.json");
    let out = kvfrac(&["run", scenario.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("ledger.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(LEDGER_HEADER));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 9);
    for row in rows {
        let values: Vec<f64> = row.split(',').skip(2).map(|v| v.parse().unwrap()).collect();
        assert!(values.iter().all(|&v| v == 0.0), "{row}");
    }
    // stride ⌈8/10⌉ = 1
    assert_eq!(fs::read_dir(dir.path().join("snapshots")).unwrap().count(), 9);
    assert!(dir.path().join("summary.txt").exists());
}

#[test]
fn summary_residual_matches_library_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = scenarios().join("linear_p2.json");
    let out = kvfrac(&["run", scenario.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let prepared = parse_scenario(&scenario).unwrap();
    let traj = run(&prepared.model, &prepared.scenario.solver_config(64)).unwrap();
    let ledger = EnergyLedger::from_trajectory(&prepared.model.space, &prepared.model.loads, &traj);
    let expected = format!("max |residual_kv|: {:.10e}", ledger.max_abs_residual_kv());
    assert!(stdout(&out).contains(&expected), "{}", stdout(&out));
    let mut csv = Vec::new();
    ledger.write_csv(&mut csv).unwrap();
    assert_eq!(fs::read(dir.path().join("ledger.csv")).unwrap(), csv);
}

#[test]
fn solver_failure_keeps_partial_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(scenarios().join("smooth_static_crack.json"))
        .unwrap()
        .replace("\"time\": { \"T\": 1, \"n\": [32, 64, 128, 256] }", "\"time\": { \"T\": 1, \"n\": 8 }")
        .replace("\"loads\"", "\"solver\": { \"newton_max_iter\": 1, \"newton_tol\": 1e-14 },\n  \"loads\"");
    let scenario = write(dir.path(), "fail.json", &text);
    let out = kvfrac(&["run", &scenario, "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("did not converge"));
    let csv = fs::read_to_string(dir.path().join("ledger.csv")).unwrap();
    assert!(csv.starts_with(LEDGER_HEADER));
    assert!(csv.lines().count() >= 2);
}

#[test]
fn outputs_are_deterministic_across_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let scenario = scenarios().join("paradox_demo.json");
    let s = scenario.to_str().unwrap();
    let one = kvfrac(&["run", s, "--n", "32", "--threads", "1", "--out-dir", a.path().to_str().unwrap()]);
    let four = kvfrac(&["run", s, "--n", "32", "--threads", "4", "--out-dir", b.path().to_str().unwrap()]);
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(four.status.code(), Some(0));
    for name in ["ledger.csv", "snapshots/snap_32.txt", "summary.txt"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name} differs"
        );
    }
}

#[test]
fn sweep_needs_three_step_counts() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(scenarios().join("zero.json"))
        .unwrap()
        .replace("\"n\": 8", "\"n\": [32, 64]");
    let scenario = write(dir.path(), "two.json", &text);
    let out = kvfrac(&["sweep", &scenario, "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("at least 3"));
}

#[test]
fn sweep_writes_table_and_orders() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(scenarios().join("linear_p2.json"))
        .unwrap()
        .replace("\"n\": 64", "\"n\": [16, 32, 64]");
    let scenario = write(dir.path(), "sweep.json", &text);
    let out = kvfrac(&["sweep", &scenario, "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "n,max_residual_kv,max_residual_general,estM_q1,estM_q2,estM_q3,estM_q4,estM_q5");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("16,"));
    assert!(stdout(&out).contains("order of max |residual_kv|"));
    assert!(stdout(&out).contains("BOUNDED"));
    assert!(dir.path().join("ledger_n32.csv").exists());
}

#[test]
fn paradox_demo_is_confirmed() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(scenarios().join("paradox_demo.json"))
        .unwrap()
        .replace("[64, 128, 256]", "[32, 64, 128]");
    let scenario = write(dir.path(), "demo.json", &text);
    let out = kvfrac(&["paradox", &scenario, "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("verdict: PARADOX CONFIRMED"));
    assert!(dir.path().join("ledger.csv").exists());
    let report = fs::read_to_string(dir.path().join("paradox.txt")).unwrap();
    assert!(report.contains("k,t,crack_cum,abs_residual_kv,griffith_defect"));
}

#[test]
fn coarse_paradox_run_is_inconclusive() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(scenarios().join("paradox_demo.json"))
        .unwrap()
        .replace("[64, 128, 256]", "8");
    let scenario = write(dir.path(), "coarse.json", &text);
    let out = kvfrac(&["paradox", &scenario, "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", stdout(&out));
    assert!(stdout(&out).contains("INCONCLUSIVE"));
    assert!(stdout(&out).contains("increase n"));
}

#[test]
fn paradox_without_growth_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = scenarios().join("linear_p2.json");
    let out = kvfrac(&["paradox", scenario.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("no crack segment released"));
}

#[test]
fn invalid_scenarios_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let typo = write(dir.path(), "typo.json", "{\n \"geometry\": { \"nx\": 2, \"ny\": 2 },\n \"law\": { \"p\": 2, \"eps\": 0 },\n \"time\": { \"T\": 1, \"n\": 2 }\n}");
    let out = kvfrac(&["run", &typo, "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
    let d3 = write(
        dir.path(),
        "d3.json",
        r#"{ "geometry": { "nx": 2, "ny": 2 }, "law": { "p": 2 }, "time": { "T": 1, "n": 2 },
             "loads": { "u0": [ { "direction": [0, 1] } ] } }"#,
    );
    let out = kvfrac(&["run", &d3, "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("(D3)"));
    assert!(!dir.path().join("ledger.csv").exists());
    let out = kvfrac(&["run", "/nonexistent/scenario.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn check_law_reports_success() {
    let out = kvfrac(&["check-law", "--p", "1.5", "--eps-reg", "0.1", "--samples", "500", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("growth bounds: hold"));
    let bad = kvfrac(&["check-law", "--p", "0.5"]);
    assert_eq!(bad.status.code(), Some(1));
}
