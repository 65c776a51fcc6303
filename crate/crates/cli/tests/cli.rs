use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(rel)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bebfleet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn json(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&read(dir, name)).unwrap()
}

fn solve(scenario: &str, out: &Path) -> Output {
    run(&[
        "solve",
        data(scenario).to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ])
}

/// Per-bus minimum over a `soc_trace.csv`.
fn trace_minima(csv: &str) -> Vec<f64> {
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(2).map(|x| x.parse().unwrap()).collect())
        .collect();
    (0..rows[0].len())
        .map(|i| rows.iter().map(|r| r[i]).fold(f64::INFINITY, f64::min))
        .collect()
}

fn without_summary(csv: &str) -> Vec<&str> {
    csv.lines()
        .filter(|l| !l.starts_with("# summary"))
        .collect()
}

#[test]
fn tiny_scenario_solves_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = solve("scenarios/tiny.json", dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["plan.csv", "soc_trace.csv", "gantt.svg", "report.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let report = json(dir.path(), "report.json");
    assert_eq!(report["violation_count"], 0);
    assert_eq!(report["certificate"], "proven-optimal");
    assert!(read(dir.path(), "gantt.svg").starts_with("<svg"));
}

#[test]
fn impossible_scenario_is_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&solve("scenarios/impossible.json", dir.path())), 2);
}

#[test]
fn malformed_inputs_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{").unwrap();
    let out = run(&[
        "solve",
        broken.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);

    let mut s: Value =
        serde_json::from_str(&std::fs::read_to_string(data("scenarios/tiny.json")).unwrap())
            .unwrap();
    s["buses"][0]["soc_min"] = 0.9.into();
    s["twins"]["bus_40ft"] = data("twins/bus_40ft.json").to_str().unwrap().into();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, s.to_string()).unwrap();
    let out = run(&[
        "solve",
        bad.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("bus-1"));
}

#[test]
fn repeated_solves_write_identical_files() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(code(&solve("scenarios/tight.json", a.path())), 0);
    assert_eq!(code(&solve("scenarios/tight.json", b.path())), 0);
    for f in ["plan.csv", "soc_trace.csv", "gantt.svg"] {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f}");
    }
}

#[test]
fn replay_factors_behave() {
    let dir = tempfile::tempdir().unwrap();
    let plan_dir = dir.path().join("plan");
    assert_eq!(code(&solve("scenarios/tight.json", &plan_dir)), 0);
    let scenario = data("scenarios/tight.json");
    let plan = plan_dir.join("plan.csv");
    let simulate = |factor: &str, replan: bool| {
        let out_dir = dir
            .path()
            .join(format!("f{factor}{}", if replan { "r" } else { "" }));
        let mut args = vec![
            "simulate",
            scenario.to_str().unwrap(),
            plan.to_str().unwrap(),
            "--error-factor",
            factor,
        ];
        if replan {
            args.push("--replan");
        }
        let o = out_dir.to_str().unwrap().to_string();
        args.extend(["--out", &o]);
        (code(&run(&args)), out_dir)
    };

    let (c, unit) = simulate("1", false);
    assert_eq!(c, 0);
    assert_eq!(
        read(&unit, "soc_trace.csv"),
        read(&plan_dir, "soc_trace.csv")
    );
    assert_eq!(
        without_summary(&read(&unit, "realized_plan.csv")),
        without_summary(&read(&plan_dir, "plan.csv"))
    );
    assert_eq!(json(&unit, "report.json")["trigger_count"], 0);

    let (c, half) = simulate("0.5", false);
    assert_eq!(c, 0);
    let planned = trace_minima(&read(&plan_dir, "soc_trace.csv"));
    for (h, p) in trace_minima(&read(&half, "soc_trace.csv"))
        .iter()
        .zip(&planned)
    {
        assert!(h > p, "{h} vs {p}");
    }

    let (c, _) = simulate("1.3", false);
    assert_eq!(c, 4);
    let (c, over) = simulate("1.3", true);
    assert_eq!(c, 0);
    let report = json(&over, "report.json");
    assert!(report["replan_count"].as_u64().unwrap() >= 1);
    assert_eq!(
        report["degraded"].as_bool().unwrap(),
        report["violation_count"].as_u64().unwrap() > 0
            || !report["relaxed"].as_array().unwrap().is_empty()
            || report["objective_miles"].as_f64().unwrap()
                < report["planned_miles"].as_f64().unwrap()
    );
    assert!(read(&over, "events.csv").contains("replan-trigger"));
}

#[test]
fn unit_plan_factor_compares_as_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "compare",
        data("scenarios/tight.json").to_str().unwrap(),
        "--plan-factor",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(dir.path(), "compare.json")["utilization_ratio"], 1.0);
}

#[test]
fn walled_spot_library_reports_blocked_keys() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "parking",
        data("maps/walled_spot.json").to_str().unwrap(),
        data("maps/bus_40ft.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = json(dir.path(), "manifest.json");
    let rows = manifest.as_array().unwrap();
    assert_eq!(rows.len(), 4);
    for row in rows {
        match row["status"].as_str().unwrap() {
            "planned" => {
                let csv = read(dir.path(), row["file"].as_str().unwrap());
                assert!(csv.starts_with("t_s,x_m,y_m,heading_rad,v_mps,accel_mps2,steer_rad"));
                assert!(row["clearance_certificate_m"].as_f64().unwrap() >= 0.3);
            }
            "blocked" => assert_eq!(row["spot"], "spot-2"),
            other => panic!("unexpected status {other}"),
        }
    }
}
