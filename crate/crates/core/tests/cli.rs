use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fraciso::cli::import_profile;
use serde_json::Value;

fn fraciso(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fraciso")).args(args).output().expect("spawn")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn table_document_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.json");
    let csv = dir.path().join("t.csv");
    let o = fraciso(&["table", "specfun", "--N", "1,2", "--s", "0.5", "--out", out.to_str().unwrap(), "--csv", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc = json(&out);
    assert_eq!(doc["schema"], 1);
    assert!(doc["timestamp"].is_string());
    assert_eq!(doc["config"]["command"], "table specfun");
    let rows = doc["results"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert!((rows[0]["gamma"].as_f64().unwrap() - std::f64::consts::FRAC_1_PI).abs() < 1e-15);
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.contains("\"s\":[5.0000000000000000e-1]"));
    let lines: Vec<String> = fs::read_to_string(&csv).unwrap().lines().map(String::from).collect();
    assert_eq!(lines[0], "N,s,gamma,c,torsional_rigidity");
    assert_eq!(lines.len(), 3);
}

#[test]
fn invalid_values_exit_2() {
    for args in [
        vec!["check", "fk", "--s", "1.5"],
        vec!["check", "fk", "--M", "4"],
        vec!["check", "fk", "--domain", "(1,0)"],
        vec!["scan", "kj", "--alphas", "1:0:3"],
        vec!["check", "rh", "--q", "0.5"],
        vec!["check", "fkrh", "--q", "2,16"],
        vec!["eig", "--M", "512,256"],
        vec!["bogus"],
    ] {
        let o = fraciso(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
    let o = fraciso(&["check", "fk", "--s", "1.5"]);
    assert!(stderr(&o).contains("--s"));
}

#[test]
fn shift_above_spectrum_exits_2() {
    let o = fraciso(&["torsion", "--M", "64", "--alpha", "5"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn unwritable_output_exits_4() {
    let o = fraciso(&["table", "specfun", "--out", "/nonexistent-dir/x.json"]);
    assert_eq!(o.status.code(), Some(4));
    let o = fraciso(&["table", "specfun", "--csv", "/nonexistent-dir/x.csv"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let out = dir.path().join("o.json");
    fs::write(&cfg, format!("# table run\nN = 3\ns = 0.25, 0.75\nout = {}\n", out.display())).unwrap();
    let o = fraciso(&["table", "specfun", "--config", cfg.to_str().unwrap(), "--s", "0.5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc = json(&out);
    assert_eq!(doc["config"]["dims"], serde_json::json!([3]));
    assert_eq!(doc["config"]["s"].as_array().unwrap().len(), 1);

    fs::write(&cfg, "N = 3\n\nwhatever = 1\n").unwrap();
    let o = fraciso(&["table", "specfun", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    fs::write(&cfg, "s = 2\n").unwrap();
    let o = fraciso(&["table", "specfun", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 1"));
}

#[test]
fn check_report_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fk.json");
    let csv = dir.path().join("fk.csv");
    let o = fraciso(&[
        "check", "fk", "--domain", "(-1,-0.2),(0.2,1)", "--M", "128", "--out", out.to_str().unwrap(), "--csv", csv.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc = json(&out);
    let r = &doc["reports"][0];
    assert_eq!(r["name"], "faber-krahn");
    assert_eq!(r["verdict"], "Holds");
    assert_eq!(r["mesh_sizes"], serde_json::json!([64, 128]));
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 3);
}

#[test]
fn scan_and_eig_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("kj.json");
    let o = fraciso(&["scan", "kj", "--M", "64", "--domain", "(-1,-0.4),(0.4,1)", "--alphas", "-4:0:3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc = json(&out);
    assert_eq!(doc["scans"][0]["entries"].as_array().unwrap().len(), 3);

    let o = fraciso(&["eig", "--M", "64,128,256", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc = json(&out);
    let e = doc["results"][0]["extrapolation"]["value"].as_f64().unwrap();
    assert!((e - 1.1578).abs() < 0.01);
}

#[test]
fn rearrange_profile_imports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let csv = dir.path().join("r.csv");
    let o = fraciso(&["rearrange", "--M", "64", "--domain", "(-1,-0.2),(0.2,1)", "--seed", "7", "--out", out.to_str().unwrap(), "--csv", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let p = import_profile(&csv).unwrap();
    let doc = json(&out);
    assert!((p.lp_norm(2.0) - doc["results"][0]["l2"].as_f64().unwrap()).abs() < 1e-15);
    assert!(doc["results"][0]["hardy_littlewood_gap"].as_f64().unwrap() >= 0.0);
}

#[test]
fn qgen_and_torsion_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("q.json");
    let o = fraciso(&["qgen", "--M", "64", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(json(&out)["results"][0]["table"].as_array().unwrap().len() > 10);
    let o = fraciso(&["torsion", "--M", "64", "--alpha", "-2,0,0.5L", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = json(&out)["results"].as_array().unwrap().clone();
    assert_eq!(rows.len(), 3);
    assert!(rows[0]["q"].as_f64().unwrap() < rows[1]["q"].as_f64().unwrap());
}
