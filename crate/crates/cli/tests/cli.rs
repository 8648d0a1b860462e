use std::path::Path;
use std::process::{Command, Output};

use momineq::critical::critical_value_max;
use serde_json::Value;

fn momineq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_momineq")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 output")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_str(&stdout(out)).expect("JSON report")
}

/// Data rows of a CSV report, skipping the `#` preamble and the header.
fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn closed_form_critical_value() {
    let report = json(&momineq(&["critval", "--k", "10", "--alpha", "0.05", "--p", "inf"]));
    assert_eq!(report["tool"], "momineq");
    assert_eq!(report["command"], "critval");
    assert_eq!(report["config"]["k"][0], 10);
    let rows = report["results"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["method"], "closed_form");
    let expected = critical_value_max(10, 0.05).unwrap().value;
    assert!((rows[0]["value"].as_f64().unwrap() - expected).abs() < 1e-9);
}

#[test]
fn simulated_critical_values_are_reproducible() {
    let args = ["critval", "--k", "10", "--alpha", "0.05", "--p", "1,2", "--reps", "5e4", "--seed", "42", "--format", "csv"];
    let first = momineq(&args);
    assert!(first.status.success());
    let text = stdout(&first);
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 2);
    for row in &rows {
        assert_eq!(row[4], "monte_carlo");
        assert!(row[5].parse::<f64>().unwrap() > 0.0);
        assert_eq!(row[6], "50000");
        assert_eq!(row[7], "42");
    }
    assert!(rows[0][3].parse::<f64>().unwrap() > rows[1][3].parse::<f64>().unwrap());
    let mut threaded = args.to_vec();
    threaded.extend(["--threads", "3"]);
    assert_eq!(stdout(&momineq(&threaded)), text);
    assert_eq!(stdout(&momineq(&args)), text);
}

#[test]
fn usage_errors_exit_with_status_two() {
    for args in [
        vec!["critval", "--p", "inf"],
        vec!["critval", "--k", "3", "--p", "0.5"],
        vec!["critval", "--k", "3", "--alpha", "0.7"],
        vec!["power-curve", "--k", "3", "--b", "0,1"],
        vec!["power-curve", "--k", "3", "--reps", "1.5"],
        vec!["invert"],
        vec!["critval", "--k", "3", "--threads", "0"],
    ] {
        let out = momineq(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn failing_grid_points_are_listed() {
    let out = momineq(&["critval", "--k", "3", "--p", "2,inf", "--reps", "100"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("k=3 p=2"), "{err}");
    assert!(!err.contains("p=inf"));
    let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["results"].as_array().unwrap().len(), 1);
}

#[test]
fn dry_run_echoes_resolved_config() {
    let report = json(&momineq(&["power-curve", "--k", "4", "--b", "1:2:0.5", "--dry-run"]));
    assert!(report["results"].is_null());
    assert_eq!(report["config"]["b"], serde_json::json!([1.0, 1.5, 2.0]));
    assert_eq!(report["config"]["format"], "csv");
    assert_eq!(report["config"]["seed"], 20_150_615);
    assert_eq!(report["config"]["p"], serde_json::json!([1.0, 2.0, "inf"]));
}

#[test]
fn power_curve_file_embeds_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("power.csv");
    let out = momineq(&[
        "power-curve", "--k", "5", "--p", "inf", "--b", "1,2,3", "--reps", "2e4", "--output", path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with(&format!("# momineq {}\n# command: power-curve\n# config: {{", env!("CARGO_PKG_VERSION"))));
    assert!(text.contains("k,p,alpha,b,critical_value,exact,estimate,se,reps,seed"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 3);
    for row in rows {
        let exact: f64 = row[5].parse().unwrap();
        let estimate: f64 = row[6].parse().unwrap();
        let se: f64 = row[7].parse().unwrap();
        assert!((exact - estimate).abs() <= 4.0 * se, "{row:?}");
    }
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn invert_from_vector_and_csv() {
    let c = critical_value_max(2, 0.05).unwrap().value;
    let direct = json(&momineq(&["invert", "--z", "2,6", "--p", "inf"]));
    assert_eq!(direct["results"]["model"], "moment");
    let c_hat = direct["results"]["endpoints"][0]["c_hat"].as_f64().unwrap();
    assert!((c_hat - (2.0 + c)).abs() < 1e-9);

    let dir = tempfile::tempdir().unwrap();
    let raw = write(dir.path(), "raw.csv", "label,value\n1,1\n1,3\n2,5\n2,7\n");
    let from_csv = json(&momineq(&["invert", "--input", &raw, "--p", "inf"]));
    assert_eq!(from_csv["results"]["z"], serde_json::json!([2.0, 6.0]));
    assert_eq!(from_csv["results"]["endpoints"], direct["results"]["endpoints"]);

    let treated = write(dir.path(), "treat.csv", "x,d,y\n1,1,5\n1,0,1\n2,1,0\n2,0,0\n");
    let report = json(&momineq(&["invert", "--input", &treated, "--p", "inf"]));
    let results = &report["results"];
    assert_eq!(results["model"], "treatment");
    assert_eq!(results["z"], serde_json::json!([4.0, 0.0]));
    let e = &results["endpoints"][0];
    assert!((e["max_effect_lower_bound"].as_f64().unwrap() - (4.0 - c)).abs() < 1e-9);
    assert_eq!(e["rejects_no_treatment"], true);
}

#[test]
fn invert_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    for (name, body) in [
        ("header.csv", "a,b\n1,2\n"),
        ("unbalanced.csv", "label,value\n1,1\n1,3\n2,5\n"),
        ("label.csv", "label,value\n0,1\n"),
        ("number.csv", "label,value\n1,abc\n"),
        ("indicator.csv", "x,d,y\n1,2,0\n1,0,0\n"),
    ] {
        let path = write(dir.path(), name, body);
        let out = momineq(&["invert", "--input", &path]);
        assert_eq!(out.status.code(), Some(2), "{name}");
    }
}

#[test]
fn cache_is_reused() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("crit.json");
    let args = ["critval", "--k", "4", "--p", "1,inf", "--reps", "2e4", "--cache", cache.to_str().unwrap()];
    let first = stdout(&momineq(&args));
    let stored: Value = serde_json::from_str(&std::fs::read_to_string(&cache).unwrap()).unwrap();
    assert_eq!(stored["entries"].as_object().unwrap().len(), 2);
    assert_eq!(stdout(&momineq(&args)), first);
}

#[test]
fn duality_and_loss_integral_checks() {
    let report = json(&momineq(&[
        "duality", "--k", "1,3", "--p", "2,inf", "--b", "1,2", "--loss", "linear,quadratic", "--reps", "2e4",
        "--critical-reps", "2e4",
    ]));
    let results = &report["results"];
    assert_eq!(results["duality"].as_array().unwrap().len(), 8);
    assert_eq!(results["loss_integral"].as_array().unwrap().len(), 8);
    for check in results["duality"].as_array().unwrap().iter().chain(results["loss_integral"].as_array().unwrap()) {
        assert_eq!(check["holds"], true, "{check}");
    }
}

#[test]
fn upper_bound_grid_and_sweep() {
    let grid = stdout(&momineq(&["upper-bound", "--k", "2,5", "--b", "1,2", "--reps", "2e4"]));
    let rows = csv_rows(&grid);
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r[7] == "true"));
    let sweep = stdout(&momineq(&["upper-bound", "--k", "10,100", "--sweep", "--reps", "1e4"]));
    assert!(sweep.contains("k,b_minus,beta_bar_minus,beta_bar_minus_se,b_plus,beta_inf_plus"));
    assert_eq!(csv_rows(&sweep).len(), 2);
    assert_eq!(momineq(&["upper-bound", "--k", "10,5", "--sweep"]).status.code(), Some(2));
}

#[test]
fn treatment_table_flags_one_winner_per_b() {
    let out = momineq(&["treatment", "--k", "4", "--b", "0.5,1", "--reps", "1e4", "--critical-reps", "2e4"]);
    assert!(out.status.success());
    let rows = csv_rows(&stdout(&out));
    assert_eq!(rows.len(), 6);
    for chunk in rows.chunks(3) {
        assert_eq!(chunk.iter().filter(|r| r[5] == "true").count(), 1);
    }
}
