use std::path::Path;
use std::process::{Command, Output};

fn gensmooth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gensmooth"))
        .args(args)
        .env_remove("GENSMOOTH_SEED")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn default_zoo_certifies() {
    let o = gensmooth(&["certify"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["command"], "certify");
    let claims = v["result"].as_array().unwrap();
    let grid = claims.iter().find(|c| c["expect"] == "fail").unwrap();
    let cells = grid["reports"].as_array().unwrap();
    assert_eq!(cells.len(), 45);
    assert!(cells.iter().all(|r| r["witness"].is_object()));
}

#[test]
fn false_poly_claim_exits_one_with_witness() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "claim.json",
        r#"{"schema_version":1,"n_pairs":2000,"claims":[{"objective":{"kind":"exponential","l1":1.0},
            "poly":{"k":3,"c_k":10.0,"c_k_prime":10.0,"l0":100.0}}]}"#,
    );
    let o = gensmooth(&["certify", "--config", &cfg]);
    assert_eq!(code(&o), 1);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["result"][0]["reports"][0]["witness"]["w"].is_array());
}

#[test]
fn malformed_json_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", "{\"schema_version\": 1,");
    for args in [
        vec!["run", bad.as_str()],
        vec!["certify", "--config", bad.as_str()],
        vec!["verify", "oracle", "--config", bad.as_str()],
    ] {
        let o = gensmooth(&args);
        assert_eq!(code(&o), 2, "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn unknown_preset_and_wrong_schema_exit_two() {
    assert_eq!(code(&gensmooth(&["run", "no-such-preset"])), 2);
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "v.json", r#"{"schema_version":9,"claims":[]}"#);
    assert_eq!(code(&gensmooth(&["certify", "--config", &cfg])), 2);
}

#[test]
fn precondition_errors_name_the_inequality() {
    let dir = tempfile::tempdir().unwrap();
    let regime = write(
        dir.path(),
        "regime.json",
        r#"{"schema_version":1,"name":"exp","study":{"kind":"convergence",
            "objective":{"kind":"exponential","l1":1.0},
            "oracle":{"sigma0":0.0,"sigma1":2.0,"eps":0.0},
            "algorithm":{"kind":"adagrad_norm","eta":0.1,"b0_sq":1.0},
            "w1":[0.0],"horizons":[16,32],"replicates":100}}"#,
    );
    let o = gensmooth(&[
        "run",
        &regime,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("sigma1"), "{}", stderr(&o));

    let mut cfg: serde_json::Value = serde_json::from_str(
        &String::from_utf8(gensmooth(&["presets", "--show", "appD-normsgd"]).stdout).unwrap(),
    )
    .unwrap();
    cfg["study"]["sigma1"] = serde_json::json!(2.0);
    let path = write(dir.path(), "div.json", &cfg.to_string());
    let o = gensmooth(&[
        "run",
        &path,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("sigma1^2 >"), "{}", stderr(&o));
}

#[test]
fn divergence_preset_writes_failure_report_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let o = gensmooth(&[
            "run",
            "appD-normsgd",
            "--seed",
            "7",
            "--out",
            d.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    for f in [
        "failure_report.csv",
        "coupling.csv",
        "failure_report.json",
        "config.json",
    ] {
        assert_eq!(read(&a, f), read(&b, f), "{f}");
    }
    let v: serde_json::Value = serde_json::from_str(&read(&a, "failure_report.json")).unwrap();
    for f in v["result"]["failures"].as_array().unwrap() {
        for key in ["empirical", "bound", "t0", "delta"] {
            assert!(f.get(key).is_some(), "{key}");
        }
    }
    assert!(!read(&a, "failure_report.csv").contains('\r'));
}

#[test]
fn thread_count_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let o = gensmooth(&[
        "--threads",
        "1",
        "run",
        "appD-adagrad",
        "--out",
        a.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = gensmooth(&[
        "--threads",
        "3",
        "run",
        "appD-adagrad",
        "--out",
        b.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(
        read(&a, "failure_report.json"),
        read(&b, "failure_report.json")
    );
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg: serde_json::Value =
        serde_json::from_slice(&gensmooth(&["presets", "--show", "appD-adagrad"]).stdout).unwrap();
    cfg["master_seed"] = serde_json::Value::Null;
    let path = write(dir.path(), "c.json", &cfg.to_string());
    let out = dir.path().join("o");
    let o = Command::new(env!("CARGO_BIN_EXE_gensmooth"))
        .args(["run", &path, "--out", out.to_str().unwrap()])
        .env("GENSMOOTH_SEED", "11")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let resolved: serde_json::Value = serde_json::from_str(&read(&out, "config.json")).unwrap();
    assert_eq!(resolved["master_seed"], 11);
    let o = Command::new(env!("CARGO_BIN_EXE_gensmooth"))
        .args(["run", &path, "--out", out.to_str().unwrap()])
        .env("GENSMOOTH_SEED", "eleven")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn rate_preset_has_one_row_per_horizon_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let o = gensmooth(&[
        "run",
        "thm41-noiseless",
        "--format",
        "csv,svg",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = read(dir.path(), "rate_table.csv");
    assert_eq!(
        csv.lines().next().unwrap(),
        "T,quantile,quantile_se,mean,mean_se"
    );
    assert_eq!(csv.lines().count(), 1 + 7);
    assert_eq!(read(dir.path(), "plot.csv").lines().count(), 1 + 7);
    assert_eq!(read(dir.path(), "plot.svg").matches("<circle").count(), 7);
    assert!(!dir.path().join("rate_table.json").exists());

    let o = gensmooth(&["report", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2, "no JSON outputs to summarize");
}

#[test]
fn verify_with_reduced_config_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "verify.json",
        r#"{"schema_version":1,"stopping":{"trajectories":200,"horizon":32},
            "moments":{"trajectories":200,"horizon":32,"sigma0":0.0,"sigma1":2.0}}"#,
    );
    let out = dir.path().join("o");
    for suite in ["stopping", "moments"] {
        let o = gensmooth(&[
            "verify",
            suite,
            "--config",
            &cfg,
            "--seed",
            "3",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let v: serde_json::Value = serde_json::from_str(&read(&out, "verify-stopping.json")).unwrap();
    let checks = v["result"][0]["checks"].as_array().unwrap();
    assert!(checks
        .iter()
        .all(|c| c["pass"] == true && c.get("observed").is_some()));
    let o = gensmooth(&["report", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = read(&out, "report.md");
    assert!(report.contains("stopping:") && report.contains("moments:"));
}

#[test]
fn coupling_suite_passes() {
    let o = gensmooth(&["verify", "coupling"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let checks = v["result"][0]["checks"].as_array().unwrap();
    let coupling = checks
        .iter()
        .find(|c| c["name"] == "coupling order")
        .unwrap();
    assert_eq!(coupling["observed"], 0.0);
}

#[test]
fn report_on_missing_directory_exits_two() {
    assert_eq!(code(&gensmooth(&["report", "/nonexistent/gensmooth"])), 2);
}

#[test]
fn presets_are_listed() {
    let o = gensmooth(&["presets"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.contains("thm41-quadratic"));
}
