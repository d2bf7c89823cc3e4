use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_singulab")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

#[test]
fn hessian_of_modulus_square() {
    let out = run(&["hessian", "z1*~z1"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out), serde_json::json!([[0, 1], [1, 0]]));
}

#[test]
fn hessian_prints_non_constant_entries_as_text() {
    let out = run(&["hessian", "z1^2*~z1", "--det"]);
    let v = json(&out);
    assert_eq!(v["hessian"][0][0], "(2+0i) * ~z1");
    assert_eq!(v["determinant"], "(-4+0i) * z1^2");
}

#[test]
fn parse_errors_exit_with_usage_code() {
    let out = run(&["hessian", "z1^(1/2)"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("1:4"));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(4));
    assert_eq!(run(&["--set", "grid=0", "hessian", "z1"]).status.code(), Some(4));
}

#[test]
fn link_of_z1_z2_is_hopf() {
    let out = run(&["link", "--poly", "z1*z2", "--radius", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["components"], 2);
    assert_eq!(v["linking"][0][1].as_i64().unwrap().abs(), 1);
}

#[test]
fn link_writes_point_clouds() {
    let dir = std::env::temp_dir().join(format!("singulab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let csv = dir.join("points.csv");
    let plot = dir.join("plot.csv");
    let out = run(&["link", "--poly", "z1^2+z2^2", "--csv", csv.to_str().unwrap(), "--plot", plot.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("component_index,x1,y1,x2,y2"));
    assert!(text.lines().skip(1).all(|l| l.split(',').count() == 5));
    assert!(std::fs::read_to_string(&plot).unwrap().lines().count() > 10);
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn analyze_reports_pair_hypotheses() {
    let out = run(&["analyze", "z1^4+z2^4", "--g", "z1^2+z2^2"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!((v["m"].as_i64(), v["n"].as_i64()), (Some(4), Some(2)));
    // not convenient
    assert_eq!(run(&["analyze", "z1^4+z1*z2^3", "--g", "z1^2+z2^2"]).status.code(), Some(1));
}

#[test]
fn certify_exit_codes() {
    let infeasible = run(&["certify", "--f", "z1^4+z2^4", "--g", "z1^2+z2^2", "--gamma2", "-1"]);
    assert_eq!(infeasible.status.code(), Some(1));
    let failing = run(&["certify", "--f", "z1^3+z2^6", "--g", "z1-z2^2", "--p", "1", "--q", "2", "--gamma2", "-2"]);
    assert_eq!(failing.status.code(), Some(2));
}

#[test]
fn certificates_are_independent_of_worker_count() {
    let dir = std::env::temp_dir().join(format!("singulab-workers-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let config = dir.join("run.conf");
    std::fs::write(&config, "# coarse run\ngrid = 6\nseed = 3\n").unwrap();
    let mut outputs = Vec::new();
    for workers in ["1", "4"] {
        let out = run(&[
            "certify", "--config", config.to_str().unwrap(), "--workers", workers,
            "--f", "z1^4+z2^4", "--g", "z1^2+z2^2", "--gamma2", "1/2+1/2i",
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push(out.stdout);
    }
    assert_eq!(outputs[0], outputs[1]);
    let v: Value = serde_json::from_slice(&outputs[0]).unwrap();
    let cert = &v["certificate"];
    assert_eq!(cert["config"]["grid"], 6);
    assert_eq!(cert["config"]["seed"], 3);
    assert_eq!(cert["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(cert["schema"], "singulab.certificate/1");
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn flags_override_the_config_file() {
    let dir = std::env::temp_dir().join(format!("singulab-override-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let config = dir.join("run.conf");
    std::fs::write(&config, "grid = 6\n").unwrap();
    let out = run(&["singular", "z1^2*~z2 + z2^2*~z1", "--config", config.to_str().unwrap(), "--grid", "4"]);
    std::fs::remove_dir_all(dir).ok();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["meta"]["params"]["grid"], 4);
}
