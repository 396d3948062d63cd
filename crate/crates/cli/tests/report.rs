use std::fs;
use std::process::Command;

use serde_json::Value;
use xisim::config::{ExperimentConfig, ExperimentKind};
use xisim::output::report_command;
use xisim::{run, RunOptions};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_xisim"))
}

fn run_into(cfg: &ExperimentConfig, dir: &std::path::Path) {
    let o = RunOptions {
        out: Some(dir.to_path_buf()),
        ..RunOptions::default()
    };
    run(cfg, &o).unwrap();
}

fn survival_cfg() -> ExperimentConfig {
    let mut c = ExperimentConfig::default_for(ExperimentKind::Survival);
    c.survival.pairs = 3000;
    c.survival.max_steps = 500;
    c.survival.checkpoints = vec![100, 200, 300, 400, 500];
    c.survival.h_lag = 100;
    c
}

#[test]
fn survival_report_has_table_layout() {
    let dir = tempfile::tempdir().unwrap();
    run_into(&survival_cfg(), dir.path());
    let (text, files) = report_command(&dir.path().join("survival.json"), dir.path()).unwrap();
    let header = text.lines().find(|l| l.trim_start().starts_with("n ")).unwrap();
    let cols: Vec<&str> = header.split_whitespace().collect();
    assert_eq!(cols, ["n", "M(n)", "k(n)", "h(n)"]);
    let body: Vec<&str> = text.lines().skip_while(|l| *l != header).skip(1).collect();
    assert_eq!(body.len(), 5);
    assert!(body[0].split_whitespace().next() == Some("100"));
    let k = fs::read_to_string(dir.path().join("survival_k.dat")).unwrap();
    assert_eq!(k.lines().count(), 5);
    for line in k.lines() {
        let v: Vec<f64> = line.split(' ').map(|x| x.parse().unwrap()).collect();
        assert_eq!(v.len(), 2);
    }
    assert_eq!(files.len(), 3);
}

#[test]
fn mixing_plot_data_has_one_row_per_shell() {
    let mut c = ExperimentConfig::default_for(ExperimentKind::Mixing);
    c.paths.base_radius = 8.0;
    c.paths.shells = 5;
    c.paths.window = [2, 5];
    c.paths.particles = 40;
    c.paths.replicates = 2;
    let dir = tempfile::tempdir().unwrap();
    run_into(&c, dir.path());
    report_command(&dir.path().join("mixing.json"), dir.path()).unwrap();
    for f in ["endpoint-angle", "sep-indicator", "halfspace-fraction"] {
        let text = fs::read_to_string(dir.path().join(format!("mixing_d_{f}.dat"))).unwrap();
        let shells: Vec<u32> = text.lines().map(|l| l.split(' ').next().unwrap().parse().unwrap()).collect();
        assert_eq!(shells, [2, 3, 4, 5], "{f}");
    }
}

#[test]
fn empty_checkpoint_list_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    run_into(&survival_cfg(), dir.path());
    let path = dir.path().join("survival.json");
    let mut v: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    v["result"]["table"]["checkpoints"] = Value::Array(vec![]);
    v["result"]["table"]["counts"] = Value::Array(vec![]);
    fs::write(&path, v.to_string()).unwrap();
    let err = report_command(&path, dir.path()).unwrap_err();
    assert!(matches!(err, xisim::CliError::Data(_)));
    assert!(err.to_string().contains("result.table.checkpoints"), "{err}");

    let out = bin().arg("report").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn malformed_report_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    run_into(&survival_cfg(), dir.path());
    let path = dir.path().join("survival.json");
    let mut v: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    v["result"].as_object_mut().unwrap().remove("rows");
    fs::write(&path, v.to_string()).unwrap();
    let err = report_command(&path, dir.path()).unwrap_err();
    assert!(err.to_string().contains("rows"), "{err}");
}

#[test]
fn binary_runs_reports_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = ["survival", "--pairs", "9000", "--steps", "400", "--h-lag", "100", "--seed", "5"];
    let st = bin().args(args).arg("--out").arg(d.join("full")).output().unwrap();
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    let st = bin().args(args).arg("--out").arg(d.join("part")).args(["--halt-after", "1"]).output().unwrap();
    assert!(st.status.success());
    assert!(d.join("part/checkpoint.json").exists());
    let st = bin().args(["resume", "--threads", "2", "--out"]).arg(d.join("part")).output().unwrap();
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    for f in ["survival.csv", "survival.json"] {
        assert_eq!(fs::read(d.join("full").join(f)).unwrap(), fs::read(d.join("part").join(f)).unwrap());
    }
    let st = bin().arg("report").arg(d.join("full/survival.json")).output().unwrap();
    assert!(st.status.success());
    assert!(String::from_utf8_lossy(&st.stdout).contains("M(n)"));
}

#[test]
fn binary_exit_codes() {
    let code = |args: &[&str]| bin().args(args).output().unwrap().status.code();
    assert_eq!(code(&["survival", "--m", "2"]), Some(2));
    assert_eq!(code(&["survival", "--threads", "0"]), Some(2));
    assert_eq!(code(&["survival", "--config", "/nonexistent/cfg.json"]), Some(4));
    assert_eq!(code(&["resume"]), Some(2));
    assert_eq!(code(&["bogus"]), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tuple.json");
    fs::write(&cfg, ExperimentConfig::default_for(ExperimentKind::Tuple).to_json()).unwrap();
    let out = bin().arg("survival").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tuple"));
}
