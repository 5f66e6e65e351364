use serde_json::Value;
use std::path::PathBuf;
use std::process::{Command, Output};

fn model(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("models").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_topolat")).args(args).env_remove("TOPOLAT_JOBS").output().unwrap()
}

fn records(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stdout).lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn strip_wall_time(out: &Output) -> Vec<Value> {
    records(out)
        .into_iter()
        .map(|mut v| {
            v.as_object_mut().unwrap().remove("wall_time");
            v
        })
        .collect()
}

#[test]
fn ssh_winding_record() {
    let out = run(&["winding", model("ssh.toml").to_str().unwrap(), "--grid", "256"]);
    assert_eq!(out.status.code(), Some(0));
    let r = &records(&out)[0];
    assert_eq!(r["rounded"], -1);
    assert!((r["value"].as_f64().unwrap() + 1.0).abs() < 1e-10);
    assert!(r["residual"].as_f64().unwrap() < 1e-10);
}

#[test]
fn floats_carry_seventeen_digits() {
    let out = run(&["winding", model("ssh.toml").to_str().unwrap(), "--grid", "64"]);
    let line = String::from_utf8_lossy(&out.stdout).to_string();
    let start = line.find("\"value\":").unwrap() + 8;
    let raw: String = line[start..].chars().take_while(|ch| *ch != ',').collect();
    let mantissa = raw.split('e').next().unwrap().replace(['-', '.'], "");
    assert_eq!(mantissa.len(), 17, "{raw}");
}

#[test]
fn verify_routes_agree_on_dirac2() {
    let out = run(&["verify", model("dirac2.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let recs = records(&out);
    assert_eq!(recs.len(), 4);
    for r in &recs {
        assert_eq!(r["rounded"], 1, "{r}");
    }
}

#[test]
fn deterministic_output() {
    let path = model("ssh_disordered.toml");
    let args = ["zero-modes", path.to_str().unwrap(), "--seeds", "4", "--jobs", "2"];
    let a = run(&args);
    let b = run(&args);
    let c = run(&["zero-modes", path.to_str().unwrap(), "--seeds", "4", "--jobs", "1"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(strip_wall_time(&a), strip_wall_time(&b));
    assert_eq!(strip_wall_time(&a), strip_wall_time(&c));
    let seeds: Vec<Value> = records(&a).iter().map(|r| r["seed"].clone()).collect();
    assert_eq!(seeds[..4], [Value::from(7), Value::from(8), Value::from(9), Value::from(10)]);
}

#[test]
fn phase_diagram_is_sorted_and_flags_closings() {
    let dir = std::env::temp_dir().join(format!("topolat-pd-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let csv = dir.join("pd.csv");
    let out = run(&[
        "phase-diagram",
        model("dirac2.toml").to_str().unwrap(),
        "--from=-3",
        "--to=3",
        "--steps",
        "7",
        "--mass-unit=-1",
        "--grid",
        "32",
        "--jobs",
        "3",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let recs = records(&out);
    let rounded: Vec<Value> = recs.iter().map(|r| r["rounded"].clone()).collect();
    let expected: Vec<Value> = vec![0.into(), Value::Null, 1.into(), Value::Null, (-1).into(), Value::Null, 0.into()];
    assert_eq!(rounded, expected);
    assert_eq!(recs[1]["flags"][0], "no-gap");
    let table = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(table.lines().count(), 8);
    assert!(table.starts_with("m,value\n"));
}

#[test]
fn exit_codes() {
    let out = run(&["winding", "/nonexistent/model.toml"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["chern", model("ssh.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("invalid-input"));
    let out = run(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn no_gap_token_on_stderr() {
    let dir = std::env::temp_dir().join(format!("topolat-gap-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("critical.toml");
    let text = std::fs::read_to_string(model("ssh.toml")).unwrap().replace("[0.0, -0.5], [0.5, 0.0]", "[0.0, -1.0], [1.0, 0.0]");
    std::fs::write(&path, text).unwrap();
    let out = run(&["winding", path.to_str().unwrap(), "--grid", "64"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("no-gap"));
}

#[test]
fn empty_model_spectrum_is_flat() {
    let dir = std::env::temp_dir().join(format!("topolat-empty-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("empty.toml");
    std::fs::write(&path, "[model]\nd = 2\nfiber = 1\nmu = 0.5\n\n[volume]\nsizes = [3, 3]\nbc = [\"periodic\", \"periodic\"]\n").unwrap();
    let out = run(&["spectrum", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = &records(&out)[0];
    assert!(r["values"].as_array().unwrap().iter().all(|v| v.as_f64().unwrap() == 0.0));
    let out = run(&["chern", path.to_str().unwrap(), "--grid", "8"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(records(&out)[0]["rounded"], 0);
}

#[test]
fn harper_streda_and_gap_label() {
    let path = model("harper.toml");
    let out = run(&["streda", path.to_str().unwrap(), "--target-chern", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let r = &records(&out)[0];
    assert!(r["parameters"]["mismatch"].as_f64().unwrap() < 1e-2);
    let out = run(&["gaplabel", path.to_str().unwrap()]);
    let r = &records(&out)[0];
    assert!((r["value"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(r["parameters"]["labels"], serde_json::json!([0, 1]));
}
