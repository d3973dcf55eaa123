use std::fs;
use std::path::Path;
use std::process::Command;

fn safebo() -> Command {
    Command::new(env!("CARGO_BIN_EXE_safebo"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn run_writes_one_csv_per_seed_and_a_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        r#"{"benchmark": "synthetic1d", "strategy": {"kind": "ise_bo"}, "iterations": 4, "seeds": [0, 1],
            "search": {"grid_resolution": 40}, "output_dir": "ignored"}"#,
    );
    let out = tmp.path().join("out");
    let status = safebo().arg("run").arg("--config").arg(&config).env("SAFEBO_OUTPUT_DIR", &out).status().unwrap();
    assert_eq!(status.code(), Some(0));
    for seed in 0..2 {
        let csv = fs::read_to_string(out.join(format!("synthetic1d_ise_bo_seed{seed}.csv"))).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "n,x1,component,alpha_ise,alpha_mes,yf,ys,f_true,s_true,violation,regret");
        assert_eq!(lines.count(), 4);
    }
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("synthetic1d_ise_bo_summary.json")).unwrap()).unwrap();
    assert!(summary.is_object());
    assert!(!tmp.path().join("ignored").exists());
}

#[test]
fn malformed_config_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), r#"{"benchmark": "synthetic1d", "iterations": 0}"#);
    let status = safebo().arg("run").arg("--config").arg(&config).env("SAFEBO_OUTPUT_DIR", tmp.path()).status().unwrap();
    assert_eq!(status.code(), Some(1));

    let missing = safebo().arg("run").arg("--config").arg(tmp.path().join("absent.json")).status().unwrap();
    assert_eq!(missing.code(), Some(1));
}

#[test]
fn failing_seeds_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    // The seed controller (0, 0) lets the pendulum fall, so every seed fails setup.
    let config = write_config(
        tmp.path(),
        r#"{"benchmark": "pendulum", "strategy": {"kind": "ise_only"}, "iterations": 2, "seeds": [0, 1],
            "pendulum": {"lower": [-1.0, -1.0], "upper": [1.0, 1.0], "x0": [0.0, 0.0], "reference_resolution": 5}}"#,
    );
    let status = safebo().arg("run").arg("--config").arg(&config).env("SAFEBO_OUTPUT_DIR", tmp.path()).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn bench_list_names_every_benchmark() {
    let out = safebo().args(["bench", "list"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["synthetic1d", "gp2d_same", "gp2d_indep", "hetero4", "hetero6", "pendulum"] {
        assert!(text.contains(name), "{name} missing from {text}");
    }
}

#[test]
fn theory_crossing_prints_csv() {
    let out = safebo()
        .args(["theory", "crossing", "--eps", "0.5", "--beta", "2", "--m", "0.1", "--noise", "0.05", "--lengthscale", "0.2", "--grid", "50", "--n-max", "100"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), "n,gamma,beta,value");
    assert_eq!(text.lines().count(), 101);
}
