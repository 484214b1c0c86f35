use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn fracobs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracobs"))
        .args(args)
        .env_remove("FRACOBS_OUT")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn report(dir: &Path, command: &str) -> Value {
    serde_json::from_slice(&std::fs::read(dir.join(format!("{command}.json"))).unwrap()).unwrap()
}

#[test]
fn mlf_prints_a_table() {
    let out = fracobs(&["mlf", "--alpha", "0.5", "--z", "-1,0"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "z,value");
    let v: f64 = rows[1].split(',').nth(1).unwrap().parse().unwrap();
    assert!((v - 0.427_583_576_155_807).abs() < 1e-12);
    let v: f64 = rows[2].split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(v, 1.0);
}

#[test]
fn exit_codes_follow_the_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();

    let out = fracobs(&["mlf", "--alpha", "0", "--z", "1"]);
    assert_eq!(code(&out), 3, "domain error: {}", stderr(&out));

    let out = fracobs(&["gram", "--preset", "no-such-preset", "--out", out_dir]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("known presets"));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"alpha\": 0.8,\n  \"dimension\": 2,\n").unwrap();
    let out = fracobs(&[
        "simulate",
        "--config",
        bad.to_str().unwrap(),
        "--out",
        out_dir,
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line"), "{}", stderr(&out));

    let unknown = dir.path().join("unknown.json");
    std::fs::write(
        &unknown,
        r#"{"alpha": 0.8, "dimension": 1, "truncation": 3, "sensors": [], "colour": 1}"#,
    )
    .unwrap();
    let out = fracobs(&[
        "gram",
        "--config",
        unknown.to_str().unwrap(),
        "--out",
        out_dir,
    ]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));

    let out = fracobs(&[
        "gram",
        "--config",
        "/definitely/not/here.json",
        "--out",
        out_dir,
    ]);
    assert_eq!(code(&out), 2);

    // α = 1 with 64 potentials and three sensors: the fast modes decay past
    // double precision, and CG finds the numerically null direction
    let out = fracobs(&["reconstruct", "--preset", "heat", "--out", out_dir]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(
        stderr(&out).contains("not positive definite"),
        "{}",
        stderr(&out)
    );

    // an iteration cap below Q stops CG early; outputs are still written
    let mut cfg = fracobs::cli::presets::find("pipeline").unwrap().config();
    cfg.hum.max_iterations = 2;
    let capped = dir.path().join("capped.json");
    std::fs::write(&capped, serde_json::to_vec(&cfg).unwrap()).unwrap();
    let out = fracobs(&[
        "reconstruct",
        "--config",
        capped.to_str().unwrap(),
        "--out",
        out_dir,
    ]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    assert!(dir.path().join("reconstruct.json").exists());
}

#[test]
fn simulated_observations_feed_reconstruction() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let out = fracobs(&["simulate", "--preset", "pipeline", "--out", out_dir]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let obs = dir.path().join("observations.csv");
    let text = std::fs::read_to_string(&obs).unwrap();
    assert!(text.starts_with("t,z_1,z_2,z_3\n"));

    let out = fracobs(&[
        "reconstruct",
        "--preset",
        "pipeline",
        "--observations",
        obs.to_str().unwrap(),
        "--out",
        out_dir,
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rep = report(dir.path(), "reconstruct");
    let result = &rep["payload"]["result"];
    assert_eq!(result["converged"], Value::Bool(true));
    let err = result["relative_error"].as_f64().unwrap();
    assert!(err < 1e-3, "relative error {err}");
    for f in ["gradient.csv", "gradient_true.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn echoed_configuration_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let out = fracobs(&[
        "simulate",
        "--preset",
        "case1-zone",
        "--seed",
        "11",
        "--out",
        first.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let echoed = dir.path().join("echo.json");
    std::fs::write(
        &echoed,
        serde_json::to_vec(&report(&first, "simulate")["config"]).unwrap(),
    )
    .unwrap();
    let out = fracobs(&[
        "simulate",
        "--config",
        echoed.to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for f in [
        "observations.csv",
        "initial_coefficients.csv",
        "simulate.json",
    ] {
        assert_eq!(
            std::fs::read(first.join(f)).unwrap(),
            std::fs::read(second.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn output_directory_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fracobs"))
        .args(["gram", "--preset", "zero-distribution"])
        .env("FRACOBS_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rep = report(dir.path(), "gram");
    assert_eq!(rep["payload"]["positive_definite"], Value::Bool(false));
    assert!(rep.get("wall_time_s").is_none());
}

#[test]
fn counterexample_defaults_to_the_built_in_case() {
    let dir = tempfile::tempdir().unwrap();
    let out = fracobs(&[
        "counterexample",
        "--out",
        dir.path().to_str().unwrap(),
        "--timing",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rep = report(dir.path(), "counterexample");
    assert_eq!(rep["payload"]["global"]["in_kernel"], Value::Bool(true));
    assert_eq!(rep["payload"]["regional"]["in_kernel"], Value::Bool(false));
    assert!(rep["wall_time_s"].as_f64().is_some());
}
