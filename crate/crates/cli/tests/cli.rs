use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fourier_pinn::bondgraph::series_rlc_netlist;

fn fpinn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fpinn")).current_dir(dir).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn simulate_class1(dir: &Path, name: &str, dt: &str) {
    let o = fpinn(dir, &["simulate", "--class", "1", "--preset", "initial", "--t0", "0", "--t1", "1", "--dt", dt, "--out", name]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

fn polyline_points(svg: &str, id: &str) -> String {
    let start = svg.find(&format!(r#"id="{id}""#)).unwrap();
    let rest = &svg[start..];
    let p = rest.find("points=\"").unwrap() + 8;
    let end = rest[p..].find('"').unwrap();
    rest[p..p + end].to_string()
}

#[test]
fn simulate_writes_expected_rows_and_is_repeatable() {
    let d = tempfile::tempdir().unwrap();
    simulate_class1(d.path(), "c1.csv", "1e-4");
    let text = fs::read_to_string(d.path().join("c1.csv")).unwrap();
    assert_eq!(text.lines().count(), 10_001 + 1);
    assert!(d.path().join("c1.json").exists());
    simulate_class1(d.path(), "again.csv", "1e-4");
    assert_eq!(text, fs::read_to_string(d.path().join("again.csv")).unwrap());
}

#[test]
fn simulate_usage_errors() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&fpinn(d.path(), &["simulate", "--out", "x.csv"])), 2);
    assert_eq!(code(&fpinn(d.path(), &["simulate", "--class", "1", "--dt", "0", "--out", "x.csv"])), 2);
    assert_eq!(code(&fpinn(d.path(), &["simulate", "--class", "7", "--out", "x.csv"])), 2);
    assert_eq!(code(&fpinn(d.path(), &["simulate", "--bogus"])), 2);
}

#[test]
fn simulate_reports_divergence() {
    let d = tempfile::tempdir().unwrap();
    let o = fpinn(d.path(), &["simulate", "--class", "3", "--start", "rest", "--out", "x.csv"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn derive_ode_checks_against_class() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("rlc.bg"), series_rlc_netlist(5.0, 0.005, 0.009, 10.0, 30.0)).unwrap();
    let o = fpinn(d.path(), &["derive-ode", "--netlist", "rlc.bg", "--check-class", "1"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("MATCH"), "{out}");
    assert!(out.contains("\"order\": 2"));

    let o = fpinn(d.path(), &["derive-ode", "--netlist", "rlc.bg", "--check-class", "1", "--preset", "analysis"]);
    assert_eq!(code(&o), 5);
    assert!(stdout(&o).contains("MISMATCH"));
    let o = fpinn(d.path(), &["derive-ode", "--netlist", "rlc.bg", "--check-class", "2"]);
    assert_eq!(code(&o), 5);
}

#[test]
fn derive_ode_reports_causal_conflicts() {
    let d = tempfile::tempdir().unwrap();
    let netlist = "se V 1 1\nj0 n\nc C1 1e-3\nbond V n\nbond n C1\noutput C1\n";
    fs::write(d.path().join("bad.bg"), netlist).unwrap();
    let o = fpinn(d.path(), &["derive-ode", "--netlist", "bad.bg"]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("causal"));
    fs::write(d.path().join("syntax.bg"), "frobnicate\n").unwrap();
    assert_eq!(code(&fpinn(d.path(), &["derive-ode", "--netlist", "syntax.bg"])), 4);
}

#[test]
fn train_finetune_evaluate_compare_plot() {
    let d = tempfile::tempdir().unwrap();
    let w = d.path().join("work");
    let wd = w.to_str().unwrap();
    fs::create_dir_all(&w).unwrap();
    simulate_class1(&w, "c1.csv", "1e-3");

    fs::write(d.path().join("train.json"), r#"{"schedule": "5@0.1,5@1e-3", "neurons": 3, "seed": 1}"#).unwrap();
    let cfg = d.path().join("train.json");
    let o = fpinn(
        d.path(),
        &["--workdir", wd, "--config", cfg.to_str().unwrap(), "train", "--family", "fourier", "--class", "1", "--neurons", "4", "--data", "c1.csv", "--out", "src1.ckpt"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let ck: serde_json::Value = serde_json::from_str(&fs::read_to_string(w.join("src1.ckpt")).unwrap()).unwrap();
    // flag beats config for neurons; config supplies the seed
    assert_eq!(ck["N"], 4);
    assert_eq!(ck["meta"]["seed"], 1);
    assert!(fs::read_to_string(w.join("src1.log.csv")).unwrap().starts_with("epoch,lr,total,l_data,l_pde,l_ic"));

    let o = fpinn(
        d.path(),
        &["--workdir", wd, "finetune", "--ckpt", "src1.ckpt", "--target-class", "3", "--preset", "analysis", "--no-data", "--schedule", "3@0.1", "--collocation-points", "50", "--dt", "1e-3", "--out", "t3_s1.ckpt"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(w.join("t3_s1.ckpt").exists());
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(w.join("report.json")).unwrap()).unwrap();
    let recs = report["records"].as_array().unwrap();
    assert_eq!(recs.len(), 2);
    assert_eq!(recs[1]["tl"], true);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(w.join("manifest.json")).unwrap()).unwrap();
    let runs = manifest["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 2);
    assert_eq!(runs[0]["config"]["schedule"], "5@0.1,5@1e-3");

    let o = fpinn(&w, &["evaluate", "--ckpt", "src1.ckpt", "--data", "c1.csv", "--t-min", "0.5", "--errors-out", "a.csv"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert!(v["mse"].as_f64().unwrap().is_finite());
    assert_eq!(v["points"], 501);
    fs::write(w.join("b.csv"), (0..501).fold(String::from("t,squared_error\n"), |s, i| s + &format!("{i},100\n"))).unwrap();
    let o = fpinn(&w, &["compare", "--errors-a", "a.csv", "--errors-b", "b.csv"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
    assert_eq!(keys, vec!["p", "significant", "z"]);

    let o = fpinn(&w, &["plot", "--ckpt", "src1.ckpt", "--data", "c1.csv", "--out", "c1.svg"]);
    assert_eq!(code(&o), 0);
    let svg = fs::read_to_string(w.join("c1.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
    for id in ["truth", "prediction"] {
        assert!(polyline_points(&svg, id).split(' ').count() >= 100);
    }
    // the companion CSV must not clobber the input dataset
    assert!(fs::read_to_string(w.join("c1.csv")).unwrap().starts_with("t,i_load"));
    assert!(w.join("c1.plot.csv").exists());
}

#[test]
fn plot_identical_series_and_csv_only() {
    let d = tempfile::tempdir().unwrap();
    simulate_class1(d.path(), "c1.csv", "1e-3");
    let o = fpinn(d.path(), &["plot", "--data", "c1.csv", "--prediction", "c1.csv", "--out", "same.svg"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let svg = fs::read_to_string(d.path().join("same.svg")).unwrap();
    assert_eq!(polyline_points(&svg, "truth"), polyline_points(&svg, "prediction"));
    let csv = fs::read_to_string(d.path().join("same.plot.csv")).unwrap();
    assert!(csv.starts_with("t,truth,prediction\n"));
    assert_eq!(csv.lines().count(), 502);

    let o = fpinn(d.path(), &["plot", "--data", "c1.csv", "--prediction", "c1.csv", "--out", "none.svg", "--csv-only"]);
    assert_eq!(code(&o), 0);
    assert!(!d.path().join("none.svg").exists());
    assert!(d.path().join("none.plot.csv").exists());
}

#[test]
fn matrix_needs_all_sources() {
    let d = tempfile::tempdir().unwrap();
    let o = fpinn(d.path(), &["matrix", "--schedule", "1@0.1"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("no source model"));
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("c.json"), r#"{"nonsense": 1}"#).unwrap();
    let o = fpinn(d.path(), &["--config", "c.json", "simulate", "--class", "1", "--out", "x.csv"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn inverse_prints_estimates() {
    let d = tempfile::tempdir().unwrap();
    simulate_class1(d.path(), "c1.csv", "1e-3");
    let o = fpinn(d.path(), &["inverse", "--data", "c1.csv", "--free", "R", "--r", "10", "--neurons", "3", "--schedule", "4@0.1", "--trajectory", "traj.csv"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["estimates"]["R"].as_f64().unwrap() > 0.0);
    assert_eq!(fs::read_to_string(d.path().join("traj.csv")).unwrap().lines().count(), 5);
}
