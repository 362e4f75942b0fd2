use std::process::{Command, Output};

fn operc(args: &[&str], seed_env: Option<&str>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_operc"));
    c.args(args).env_remove("OPERC_SEED");
    if let Some(s) = seed_env {
        c.env("OPERC_SEED", s);
    }
    c.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn table_to_stdout_and_summary_to_stderr() {
    let o = operc(&["theta", "--p", "1", "--replicas", "20", "--horizon", "50"], None);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.starts_with("# tool: operc"));
    assert!(out.contains("# hash_spec: splitmix64-site-v1"));
    assert!(out.trim_end().ends_with("1,50,20,20,1,0"), "{out}");
    assert!(String::from_utf8_lossy(&o.stderr).contains("theta=1"));
}

#[test]
fn out_dir_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let o = operc(&["mono", "--replicas", "50", "--horizon", "30", "--out", d], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("mono.csv").exists());
    let js: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("mono.json")).unwrap()).unwrap();
    assert_eq!(js["meta"]["command"], "mono");
    assert_eq!(js["rows"].as_array().unwrap().len(), 6);
    let o = operc(&["oracle", "tau", "--p", "0.5", "--n", "3", "--format", "json"], None);
    let js: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(js["rows"][0]["value"], 1);
    assert_eq!(js["rows"][0]["prob"], "1/2");
}

#[test]
fn seed_priority() {
    let run = |args: &[&str], env: Option<&str>| {
        let o = operc(args, env);
        assert!(o.status.success());
        stdout(&o).lines().find(|l| l.starts_with("# seed:")).unwrap().to_string()
    };
    let base = ["theta", "--replicas", "10", "--horizon", "50"];
    assert_eq!(run(&base, None), "# seed: 1");
    assert_eq!(run(&base, Some("7")), "# seed: 7");
    let mut flagged = base.to_vec();
    flagged.extend(["--seed", "9"]);
    assert_eq!(run(&flagged, Some("7")), "# seed: 9");
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"seed": 4}"#).unwrap();
    let mut with_file = base.to_vec();
    with_file.extend(["--config", cfg.to_str().unwrap()]);
    assert_eq!(run(&with_file, None), "# seed: 4");
    assert_eq!(run(&with_file, Some("7")), "# seed: 7");
}

#[test]
fn exit_codes() {
    let o = operc(&["alpha", "--p", "1.5"], None);
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "config");
    assert_eq!(operc(&["theta", "--workers", "0"], None).status.code(), Some(2));
    assert_eq!(operc(&["theta", "--replicas", "10"], Some("abc")).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"sed": 4}"#).unwrap();
    assert_eq!(operc(&["theta", "--config", cfg.to_str().unwrap()], None).status.code(), Some(2));
    // the slope is infinite at p = 1
    let o = operc(&["rho", "--p", "1", "--replicas", "10"], None);
    assert_eq!(o.status.code(), Some(4));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "estimator");
    // exact enumeration refuses large instances
    assert_eq!(operc(&["oracle", "tau", "--n", "12"], None).status.code(), Some(4));
}

#[test]
fn verify_small_run_passes() {
    let o = operc(&["verify", "--p-grid", "0.3,0.7", "--replicas", "30", "--horizon", "16"], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 14);
    assert!(rows.iter().all(|r| r.split(',').nth(4) == Some("0")));
}
