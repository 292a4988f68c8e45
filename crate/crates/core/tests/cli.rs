use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bellstat(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bellstat"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

#[test]
fn selftest_passes() {
    let dir = TempDir::new().unwrap();
    let out = bellstat(dir.path(), &["selftest"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 4, "{text}");
}

#[test]
fn simulate_then_analyze_lhv_data() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    write(
        d,
        "lhv.cfg",
        "model = deterministic-lhv\nstrategy = 15\ntrials = 50000\nseed = 1\n# plain analysis\nincrement = plain-j\n",
    );
    let sim = bellstat(d, &["simulate", "--config", "lhv.cfg", "--out", "t.csv"]);
    assert!(sim.status.success(), "{}", String::from_utf8_lossy(&sim.stderr));
    let out = bellstat(
        d,
        &[
            "analyze", "--config", "lhv.cfg", "--in", "t.csv", "--out", "r.json", "--s", "0",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    assert_eq!(report["N"], 50000);
    assert_eq!(report["M"], 50000);
    assert_eq!(report["s"], 0);
    assert_eq!(report["increment"], "plain-j");
    for key in [
        "m_M", "Z", "r", "c", "p_value", "f", "mode", "epsA", "epsB", "qf", "p_ij", "config",
    ] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    assert!(report["p_value"].as_f64().unwrap() > 0.01);
    assert_eq!(
        report["config"]["model"],
        Value::Null,
        "analysis echoes only what it used"
    );
    assert_eq!(report["config"]["increment"], "plain-j");
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let run = |seed: &str| -> (Vec<u8>, Vec<u8>) {
        let dir = TempDir::new().unwrap();
        let d = dir.path();
        write(d, "q.cfg", "etaA = 0.9\netaB = 0.9\nr = 0.6\ntrials = 70000\n");
        let out = bellstat(
            d,
            &[
                "simulate", "--config", "q.cfg", "--seed", seed, "--stream", "2", "--out", "t.csv",
            ],
        );
        assert!(out.status.success());
        let out = bellstat(d, &["analyze", "--config", "q.cfg", "--in", "t.csv", "--out", "r.json"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        (fs::read(d.join("t.csv")).unwrap(), fs::read(d.join("r.json")).unwrap())
    };
    let first = run("5");
    assert_eq!(first, run("5"));
    assert_ne!(first.0, run("6").0);
}

#[test]
fn flags_override_config_values() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    write(d, "c.cfg", "trials = 10\n");
    let out = bellstat(d, &["simulate", "--config", "c.cfg", "--trials", "3"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.starts_with("trial,a,b,A,B\n1,"));
}

#[test]
fn plan_reproduces_runtime_estimate() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    write(d, "p.cfg", "R = 1e6\nJ = 1e-6\nepsAB = 1e-7\nc = 20\nf = 2e-5\n");
    let out = bellstat(d, &["plan", "--config", "p.cfg", "--out", "plan.json"]);
    assert!(out.status.success());
    let plan: Value = serde_json::from_str(&fs::read_to_string(d.join("plan.json")).unwrap()).unwrap();
    let years = plan["t_plain_years"].as_f64().unwrap();
    let hours = plan["t_doob_hours"].as_f64().unwrap();
    assert!((15.0..17.0).contains(&years) && (3.0..4.0).contains(&hours));
    assert_eq!(plan["config"]["s"], 10_000_000);
    assert!(String::from_utf8(out.stdout).unwrap().contains("# R = "));
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    write(d, "bad.cfg", "R = 1e6\nJ = 1e-7\nepsAB = 1e-7\n");
    assert_eq!(bellstat(d, &["plan", "--config", "bad.cfg"]).status.code(), Some(3));
    write(d, "typo.cfg", "epsilonA = 0.1\n");
    let out = bellstat(d, &["simulate", "--config", "typo.cfg"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("typo.cfg:1"));
    assert_eq!(bellstat(d, &["analyze", "--in", "missing.csv"]).status.code(), Some(4));
    assert_eq!(
        bellstat(d, &["simulate", "--config", "missing.cfg"]).status.code(),
        Some(4)
    );
    write(d, "t.csv", "trial,a,b,A,B\n2,1,1,0,0\n1,1,1,0,0\n");
    assert_eq!(bellstat(d, &["analyze", "--in", "t.csv"]).status.code(), Some(2));
}

#[test]
fn spacetime_reports_and_flags_infeasible_layouts() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    write(
        d,
        "ok.cfg",
        "d = 30000\nn = 1.5\ntauM = 1e-8\ntauG = 1e-6\ntauS = 1e-8\ntauD = 1e-7\n",
    );
    let out = bellstat(d, &["spacetime", "--config", "ok.cfg"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("feasible: yes"));
    let json: Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    assert_eq!(json["feasible"], true);
    assert_eq!(json["constraints"].as_array().unwrap().len(), 2);

    write(d, "slow.cfg", "d = 30\nn = 1.5\ntauS = 1e-6\n");
    let out = bellstat(d, &["spacetime", "--config", "slow.cfg", "--out", "st.json"]);
    assert_eq!(out.status.code(), Some(3));
    let json: Value = serde_json::from_str(&fs::read_to_string(d.join("st.json")).unwrap()).unwrap();
    assert_eq!(json["feasible"], false);
}

#[test]
fn optimize_writes_sweep_csv() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    write(d, "o.cfg", "eta = 0.75, 1.0\nfixed_r = 1\n");
    let out = bellstat(d, &["optimize", "--config", "o.cfg", "--out", "sweep.csv"]);
    assert!(out.status.success());
    let csv = fs::read_to_string(d.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("eta,best_j,r_star,alpha1,alpha2,beta1,beta2"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0][1] <= 1e-9);
    assert!((rows[1][1] - (2f64.sqrt() - 1.0) / 2.0).abs() < 1e-6);
}
