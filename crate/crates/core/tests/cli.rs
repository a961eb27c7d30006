use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn argscape(args: &[&str], seed_env: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_argscape"));
    cmd.args(args).env_remove("ARGSCAPE_SEED");
    if let Some(s) = seed_env {
        cmd.env("ARGSCAPE_SEED", s);
    }
    cmd.output().expect("binary runs")
}

fn out_arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn exit_codes() {
    assert_eq!(argscape(&["verify-nothing"], None).status.code(), Some(2));
    assert_eq!(argscape(&["verify-aux", "--rho-u", "-1"], None).status.code(), Some(3));
    assert_eq!(argscape(&["verify-aux", "--colour", "red"], None).status.code(), Some(3));
    let r = argscape(&["simulate", "arg", "--rho", "0"], None);
    assert_eq!(r.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&r.stderr).contains("rho"));
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let r = argscape(
        &["verify-small-time", "--replicates", "2", "--n", "50", "--out", out_arg(&blocker.join("sub"))],
        None,
    );
    assert_eq!(r.status.code(), Some(4));
    assert_eq!(argscape(&["list"], None).status.code(), Some(0));
}

#[test]
fn experiment_writes_reports_and_raw_tables() {
    let dir = tempfile::tempdir().unwrap();
    let r = argscape(
        &["verify-small-time", "--replicates", "5", "--raw", "--out", out_arg(dir.path())],
        None,
    );
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stdout));
    let csv = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(csv.starts_with("experiment,point,statistic,estimate,reference,se,z,threshold,check,pass\n"));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json["replicates"], 5);
    assert!(json["wall_time_s"].as_f64().is_some());
    let raw = fs::read_to_string(dir.path().join("raw/small_time.csv")).unwrap();
    assert_eq!(raw.lines().count(), 6);
}

#[test]
fn seed_from_environment_and_flag() {
    let dir = tempfile::tempdir().unwrap();
    let run = |env: Option<&str>, extra: &[&str], sub: &str| {
        let out = dir.path().join(sub);
        let mut args = vec!["verify-aux", "--replicates", "300", "--rho-u", "1", "--out", out_arg(&out)];
        args.extend_from_slice(extra);
        assert!(argscape(&args, env).status.success());
        fs::read_to_string(out.join("report.csv")).unwrap()
    };
    let env = run(Some("77"), &[], "a");
    let flag = run(None, &["--seed", "77"], "b");
    let default = run(None, &[], "c");
    assert_eq!(env, flag);
    assert_ne!(env, default);
}

#[test]
fn config_file_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    let out = dir.path().join("out");
    fs::write(
        &cfg,
        serde_json::json!({
            "experiment": "verify-second-moment",
            "master_seed": 1,
            "replicates": 1000,
            "parameters": {"n": 4},
            "output_dir": out,
        })
        .to_string(),
    )
    .unwrap();
    let r = argscape(&["--config", out_arg(&cfg)], None);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(fs::read_to_string(out.join("report.csv")).unwrap().contains("n=4"));
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let r = argscape(&["simulate", "arg", "--n", "5", "--rho", "1", "--genome", "0:1", "--seed", "42", "--out", out_arg(&out)], None);
        assert!(r.status.success());
        let stdout = String::from_utf8_lossy(&r.stdout).to_string();
        assert!(stdout.contains("max particles") && stdout.contains("splits") && stdout.contains("breakpoints"));
        fs::read(out.join("logs/arg.jsonl")).unwrap()
    };
    assert_eq!(run("x"), run("y"));

    let out = dir.path().join("walk");
    let r = argscape(&["simulate", "walk", "--variant", "smc", "--seed", "3", "--out", out_arg(&out)], None);
    assert!(r.status.success());
    let path: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("path.json")).unwrap()).unwrap();
    let trees = path["trees"].as_array().unwrap().len();
    let nwk = fs::read_dir(out.join("trees")).unwrap().count();
    assert_eq!(trees, nwk);
}
