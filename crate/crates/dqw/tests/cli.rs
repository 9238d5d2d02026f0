use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dqw::config::ExperimentConfig;
use dqw::graph_io::save_graph;
use dqw_core::build_chain;
use serde_json::Value;

fn dqw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dqw")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("error line on stderr");
    serde_json::from_str(line).unwrap_or_else(|e| panic!("{e}: {text}"))
}

const SMALL_RUN: &str = r#"{
  "experiment": "run",
  "graph": {"kind": "chain", "n_modes": 7, "onsite": 1.0, "coupling": 0.5},
  "pump": {"drive": "lasing", "mode": 3, "omega_p_rule": "eigenmode:1", "gamma0": 1.0},
  "time": {"t_final": 2.0, "dt": 0.001, "record_every": 50}
}"#;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

#[test]
fn run_writes_outputs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.json", SMALL_RUN);
    let out = dir.path().join("out");
    let res = dqw(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let m = manifest(&out);
    assert_eq!(m["status"], "ok");
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    let top = 1.0 + (std::f64::consts::PI / 8.0).cos();
    assert!((m["resolved_omega_p"].as_f64().unwrap() - top).abs() < 1e-12);
    let traj = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("time,mode_index,basis,mean_re,mean_im,photon_number\n"));
    assert!(traj.contains(",eigen,"));
    // 41 samples, 7 modes, 2 bases
    assert_eq!(traj.lines().count(), 1 + 41 * 7 * 2);
}

#[test]
fn runs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.json", SMALL_RUN);
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("out{k}"));
        let res = dqw(&["run", "-c", cfg.to_str().unwrap(), "-o", out.to_str().unwrap(), "-q"]);
        assert!(res.status.success());
        outputs.push(out);
    }
    for name in ["trajectory.csv", "observables.csv", "final_state.json"] {
        let a = fs::read(outputs[0].join(name)).unwrap();
        let b = fs::read(outputs[1].join(name)).unwrap();
        assert!(a == b, "{name} differs between runs");
    }
}

#[test]
fn non_positive_dt_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", &SMALL_RUN.replace("\"dt\": 0.001", "\"dt\": -0.1"));
    let out = dir.path().join("out");
    let res = dqw(&["run", "-c", cfg.to_str().unwrap(), "-o", out.to_str().unwrap(), "-q"]);
    assert_eq!(res.status.code(), Some(2));
    assert_eq!(stderr_json(&res)["error"], "validation");
    let m = manifest(&out);
    assert_eq!(m["status"], "failed");
    assert_eq!(m["error"]["exit_code"], 2);
}

#[test]
fn dt_flag_must_be_positive() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.json", SMALL_RUN);
    let res = dqw(&["run", "-c", cfg.to_str().unwrap(), "--dt", "0", "-q"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn dt_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.json", SMALL_RUN);
    let out = dir.path().join("out");
    let res = dqw(&["run", "-c", cfg.to_str().unwrap(), "-o", out.to_str().unwrap(), "--dt", "0.004", "-q"]);
    assert!(res.status.success());
    assert_eq!(manifest(&out)["dt"].as_f64(), Some(0.004));
}

#[test]
fn missing_graph_file_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "spec.json", r#"{"graph": {"kind": "file", "path": "nowhere.json"}}"#);
    let res = dqw(&["spectrum", "-c", cfg.to_str().unwrap(), "-o", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr_json(&res)["message"].as_str().unwrap().contains("nowhere.json"));
}

#[test]
fn graph_files_resolve_next_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    save_graph(&build_chain(4, 0.0, 1.0).unwrap(), &dir.path().join("chain.json")).unwrap();
    let cfg = write(dir.path(), "spec.json", r#"{"graph": {"kind": "file", "path": "chain.json"}}"#);
    let out = dir.path().join("o");
    let res = dqw(&["spectrum", "-c", cfg.to_str().unwrap(), "-o", out.to_str().unwrap(), "-q"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let spectrum = fs::read_to_string(out.join("spectrum.csv")).unwrap();
    assert_eq!(spectrum.lines().count(), 5);
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.json", SMALL_RUN);
    let blocker = write(dir.path(), "file", "");
    let res = dqw(&["run", "-c", cfg.to_str().unwrap(), "-o", blocker.join("sub").to_str().unwrap(), "-q"]);
    assert_eq!(res.status.code(), Some(4));
    assert_eq!(stderr_json(&res)["error"], "io");
}

#[test]
fn blow_up_is_a_numerical_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{
      "experiment": "run",
      "graph": {"kind": "chain", "n_modes": 3, "onsite": 0.0, "coupling": 100.0},
      "pump": {"drive": "lasing", "mode": 1, "omega_p": 0.0, "gamma0": 1.0},
      "time": {"t_final": 200.0, "dt": 0.1}
    }"#;
    let cfg = write(dir.path(), "unstable.json", text);
    let out = dir.path().join("out");
    let res = dqw(&["run", "-c", cfg.to_str().unwrap(), "-o", out.to_str().unwrap(), "-q"]);
    assert_eq!(res.status.code(), Some(3));
    let err = stderr_json(&res);
    assert_eq!(err["error"], "numerical");
    assert!(err["hint"].as_str().unwrap().contains("--dt"));
    assert_eq!(manifest(&out)["status"], "failed");
}

#[test]
fn subcommand_must_match_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.json", SMALL_RUN);
    let res = dqw(&["sweep", "-c", cfg.to_str().unwrap(), "-q"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn bundled_configs_parse_round_trip_and_validate() {
    let mut seen = 0;
    for entry in fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        let cfg = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let exp = cfg.resolve_experiment(None).unwrap();
        cfg.validate(exp, &configs_dir()).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let again = ExperimentConfig::parse(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(again, cfg, "{}", path.display());
        seen += 1;
    }
    assert!(seen >= 10);
}

#[test]
fn search_and_scaling_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("search");
    let res = dqw(&["search", "-c", configs_dir().join("fig4a.json").to_str().unwrap(), "-o", out.to_str().unwrap(), "-q"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let m = manifest(&out);
    assert!(m["summary"]["passive_max_exit"].as_f64().unwrap() > 0.5);
    assert!(out.join("search.csv").exists() && out.join("passive.csv").exists());

    let cfg = write(dir.path(), "scaling.json", r#"{"scaling": {"depths": [3, 4, 5, 6]}}"#);
    let out = dir.path().join("scaling");
    let res = dqw(&["scaling", "-c", cfg.to_str().unwrap(), "-o", out.to_str().unwrap(), "--threads", "2", "-q"]);
    assert!(res.status.success());
    let csv = fs::read_to_string(out.join("scaling.csv")).unwrap();
    assert!(csv.starts_with("depth,n_modes,frequency,weight,exit_weight,inverse_square\n"));
    assert!(manifest(&out)["summary"]["fit"]["r_squared"].as_f64().unwrap() > 0.99);
}
