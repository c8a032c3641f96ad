use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn qoc(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qoc"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("QOC_THREADS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn f(name: &str) -> String {
    fixture(name).to_string_lossy().into_owned()
}

#[test]
fn demo_pair_a_reaches_the_second_level() {
    let dir = TempDir::new().unwrap();
    let o = qoc(&["demo-counterexample"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path();
    let o = qoc(
        &["simulate", "--system", out.join("counterexample_system.json").to_str().unwrap(), "--control", out.join("counterexample_a.json").to_str().unwrap()],
        out,
    );
    assert_eq!(code(&o), 0);
    let summary = json(&out.join("summary.json"));
    let p = summary["final_populations"][1].as_f64().unwrap();
    assert!((p - 1.0).abs() < 1e-6, "{p}");
    let verdicts = json(&out.join("verdicts.json"));
    assert_eq!(verdicts["a"]["status"], "resonant");
    assert_eq!(verdicts["b"]["status"], "neither");
}

#[test]
fn missing_file_is_a_config_error_naming_the_path() {
    let dir = TempDir::new().unwrap();
    let o = qoc(&["check", "--system", "/no/such/system.json"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("/no/such/system.json"));
}

#[test]
fn broken_hermitian_control_is_an_invariant_error() {
    let dir = TempDir::new().unwrap();
    let ctrl = write(&dir, "c.json", r#"{"T": 1, "N": 1, "flavor": "V", "values": {"1,2": [[0.5, 0.25]], "2,1": [[0.5, 0.25]]}}"#);
    let o = qoc(&["simulate", "--system", &f("two_level.json"), "--control", &ctrl], dir.path());
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn disconnected_graph_is_a_controllability_error() {
    let dir = TempDir::new().unwrap();
    let sys = write(&dir, "s.json", r#"{"n": 4, "energies": [0, 0, 0, 0], "edges": [{"j": 1, "k": 2, "mu": 1}, {"j": 3, "k": 4, "mu": 1}]}"#);
    let o = qoc(&["check", "--system", &sys], dir.path());
    assert_eq!(code(&o), 4);
    let report = json(&dir.path().join("check.json"));
    assert_eq!(report["components"], serde_json::json!([[1, 2], [3, 4]]));
    let cost = write(&dir, "cost.json", r#"{"kind": "energy"}"#);
    let transfer = write(
        &dir,
        "t.json",
        r#"{"source": {"kind": "eigenstate", "index": 1}, "target": {"kind": "eigenstate", "index": 4}, "T": 1, "N": 16}"#,
    );
    let o = qoc(&["solve", "--system", &sys, "--cost", &cost, "--transfer", &transfer], dir.path());
    assert_eq!(code(&o), 4);
}

#[test]
fn invalid_thread_count_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_qoc"))
        .args(["check", "--system", &f("two_level.json"), "--out"])
        .arg(dir.path())
        .env("QOC_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn two_level_energy_matches_the_closed_form() {
    let dir = TempDir::new().unwrap();
    let cost = write(&dir, "cost.json", r#"{"kind": "energy"}"#);
    let o = qoc(&["solve", "--system", &f("two_level.json"), "--cost", &cost, "--transfer", &f("transfer_energy.json")], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let sol = json(&dir.path().join("solution.json"));
    let cost = sol["cost"].as_f64().unwrap();
    let exact = std::f64::consts::PI.powi(2) / 4.0;
    assert!((cost - exact).abs() < 1e-3, "{cost}");
    assert_eq!(sol["converged"], true);
    for name in ["control.json", "trajectory.csv", "lift.csv", "extremal.json"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
}

#[test]
fn three_level_energy_minimizer_is_resonant() {
    let dir = TempDir::new().unwrap();
    let cost = write(&dir, "cost.json", r#"{"kind": "energy"}"#);
    let transfer = write(
        &dir,
        "t.json",
        r#"{"source": {"kind": "eigenstate", "index": 1}, "target": {"kind": "eigenstate", "index": 3}, "T": 2, "N": 64}"#,
    );
    let o = qoc(&["solve", "--system", &f("three_level.json"), "--cost", &cost, "--transfer", &transfer], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let sol = json(&dir.path().join("solution.json"));
    let status = sol["resonance"]["status"].as_str().unwrap();
    assert!(status == "resonant" || status == "weakly-resonant", "{status}");
}

#[test]
fn resonate_lowers_the_energy_of_pair_b() {
    let dir = TempDir::new().unwrap();
    let o = qoc(&["resonate", "--system", &f("counterexample_system.json"), "--control", &f("counterexample_b.json")], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(dir.path().join("costs.csv")).unwrap();
    let energy: Vec<f64> = table.lines().find(|l| l.starts_with("energy,")).unwrap().split(',').skip(1).map(|v| v.parse().unwrap()).collect();
    assert!(energy[1] < energy[0], "{energy:?}");
    let verdict = json(&dir.path().join("verdict.json"));
    assert_eq!(verdict["before"]["status"], "neither");
    assert_eq!(verdict["after"]["status"], "resonant");
}

#[test]
fn classify_pair_b_is_neither() {
    let dir = TempDir::new().unwrap();
    let o = qoc(&["classify", "--system", &f("counterexample_system.json"), "--control", &f("counterexample_b.json")], dir.path());
    assert_eq!(code(&o), 0);
    assert_eq!(json(&dir.path().join("verdict.json"))["status"], "neither");
}

#[test]
fn verify_filter_runs_only_the_group() {
    let dir = TempDir::new().unwrap();
    let o = qoc(&["verify", "--filter", "4,5"], dir.path());
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().count(), 2, "{stdout}");
    let report = json(&dir.path().join("verify.json"));
    let ids: Vec<u64> = report["criteria"].as_array().unwrap().iter().map(|c| c["id"].as_u64().unwrap()).collect();
    assert_eq!(ids, vec![4, 5]);
    assert_eq!(report["passed"], true);
}

#[test]
fn verify_rejects_unknown_groups() {
    let dir = TempDir::new().unwrap();
    let o = qoc(&["verify", "--filter", "everything"], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn corrupted_fixture_fails_its_criterion() {
    let dir = TempDir::new().unwrap();
    let fixtures = dir.path().join("fixtures");
    fs::create_dir(&fixtures).unwrap();
    // pair a replaced by pair b: no longer resonant
    fs::copy(fixture("counterexample_b.json"), fixtures.join("counterexample_a.json")).unwrap();
    let o = qoc(&["verify", "--filter", "5", "--fixtures", fixtures.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("FAIL  5"));
    assert_eq!(json(&dir.path().join("verify.json"))["passed"], false);
}

#[test]
fn outputs_are_deterministic() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let cost = write(&a, "cost.json", r#"{"kind": "energy"}"#);
    for dir in [&a, &b] {
        let o = qoc(&["solve", "--system", &f("two_level.json"), "--cost", &cost, "--transfer", &f("transfer_energy.json")], dir.path());
        assert_eq!(code(&o), 0);
        let o = qoc(&["demo-counterexample"], dir.path());
        assert_eq!(code(&o), 0);
    }
    for name in ["control.json", "trajectory.csv", "lift.csv", "solution.json", "extremal.json", "verdicts.json", "counterexample_b.json"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn written_files_read_back() {
    let dir = TempDir::new().unwrap();
    let out = dir.path();
    let o = qoc(&["demo-counterexample"], out);
    assert_eq!(code(&o), 0);
    let sys = out.join("counterexample_system.json");
    let ctrl = out.join("counterexample_a.json");
    let traj = out.join("counterexample_a_trajectory.csv");
    let o = qoc(
        &["check", "--system", sys.to_str().unwrap(), "--control", ctrl.to_str().unwrap(), "--trajectory", traj.to_str().unwrap()],
        out,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&out.join("check.json"));
    assert!(report["trajectory"]["admissibility_residual"].as_f64().unwrap() < 1e-12);
    assert!(report["trajectory"]["norm_drift"].as_f64().unwrap() < 1e-12);

    // V round trip through the interaction picture
    let o = qoc(&["eliminate-drift", "--system", sys.to_str().unwrap(), "--control", ctrl.to_str().unwrap()], out);
    assert_eq!(code(&o), 0);
    let v = out.join("control_v.json");
    let o = qoc(&["eliminate-drift", "--system", sys.to_str().unwrap(), "--control", v.to_str().unwrap()], out);
    assert_eq!(code(&o), 0);
    let h0 = json(&ctrl);
    let h1 = json(&out.join("control_h.json"));
    let (x, y) = (&h0["values"]["1,2"], &h1["values"]["1,2"]);
    let max = x
        .as_array()
        .unwrap()
        .iter()
        .zip(y.as_array().unwrap())
        .flat_map(|(p, q)| (0..2).map(move |c| (p[c].as_f64().unwrap() - q[c].as_f64().unwrap()).abs()))
        .fold(0.0, f64::max);
    assert!(max < 1e-12, "{max}");
}
