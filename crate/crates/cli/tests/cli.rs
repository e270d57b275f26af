//! End-to-end tests of the `funreg` binary: exit codes, file outputs,
//! manifest contents, and reproducibility.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn funreg() -> Command {
    Command::new(env!("CARGO_BIN_EXE_funreg"))
}

fn workspace_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).to_string()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

#[test]
fn ratebench_smoke_config_runs_clean() {
    let dir = tempfile::tempdir().unwrap();
    let out = funreg()
        .args(["ratebench", "--config"])
        .arg(workspace_file("configs/ratebench_smoke.toml"))
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        stderr(&out)
    );
    assert!(dir.path().join("raw.csv").exists());
    assert!(dir.path().join("summary.csv").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["status"], "ok");
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
    assert!(manifest["finished_at"].is_string());
    // defaults are materialized in the echoed config
    assert_eq!(manifest["config"]["gamma_replications"], 500);
}

#[test]
fn unknown_config_key_is_rejected_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    let text = std::fs::read_to_string(workspace_file("configs/ratebench_smoke.toml")).unwrap();
    std::fs::write(&config, text.replace("k_rule", "bandwith")).unwrap();
    let out = funreg()
        .args(["ratebench", "--config"])
        .arg(&config)
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    assert!(
        stderr(&out).contains("bandwith"),
        "error should name the unknown key: {}",
        stderr(&out)
    );
}

#[test]
fn config_hash_is_stable_under_key_reordering() {
    let dir = tempfile::tempdir().unwrap();
    // one config, two key orders
    let a = r#"{
        "seed": 5100, "replications": 2, "n_grid": [50, 100, 200],
        "covariate": {"seed": 1, "process": {"iid_gaussian_finite": {"dim": 2}}},
        "truth": {"constant": {"value": 1.0, "response": "scalar"}},
        "scheme": {"simple_knn": {"k_rule": "ceil(n^0.5)"}},
        "metric": "l2"
    }"#;
    let b = r#"{
        "metric": "l2",
        "scheme": {"simple_knn": {"k_rule": "ceil(n^0.5)"}},
        "truth": {"constant": {"response": "scalar", "value": 1.0}},
        "covariate": {"process": {"iid_gaussian_finite": {"dim": 2}}, "seed": 1},
        "n_grid": [50, 100, 200], "replications": 2, "seed": 5100
    }"#;
    let mut hashes = Vec::new();
    for (name, text) in [("a.json", a), ("b.json", b)] {
        let path = dir.path().join(name);
        std::fs::write(&path, text).unwrap();
        let out_dir = dir.path().join(format!("out_{name}"));
        let out = funreg()
            .args(["ratebench", "--config"])
            .arg(&path)
            .arg("--out-dir")
            .arg(&out_dir)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", stderr(&out));
        let manifest: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(out_dir.join("manifest.json")).unwrap(),
        )
        .unwrap();
        hashes.push(manifest["config_hash"].as_str().unwrap().to_string());
    }
    assert_eq!(hashes[0], hashes[1]);
}

#[test]
fn ratebench_outputs_are_byte_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut raws: Vec<Vec<u8>> = Vec::new();
    for (label, threads) in [("one", "1"), ("four", "4")] {
        let out_dir = dir.path().join(label);
        let out = funreg()
            .args(["ratebench", "--threads", threads, "--config"])
            .arg(workspace_file("configs/ratebench_smoke.toml"))
            .arg("--out-dir")
            .arg(&out_dir)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", stderr(&out));
        raws.push(std::fs::read(out_dir.join("raw.csv")).unwrap());
    }
    assert_eq!(raws[0], raws[1]);
}

fn write_curves(path: &Path, header: &str, rows: &[&str]) {
    let mut text = String::from(header);
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn estimate_runs_and_tiny_bandwidth_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("x.csv");
    let data = dir.path().join("data.csv");
    let responses = dir.path().join("responses.csv");
    write_curves(&x, "t,x", &["0.0,0.0", "0.5,0.0", "1.0,0.0"]);
    write_curves(
        &data,
        "t,x1,x2,x3",
        &["0.0,1.0,2.0,3.0", "0.5,1.0,2.0,3.0", "1.0,1.0,2.0,3.0"],
    );
    write_curves(
        &responses,
        "t,y1,y2,y3",
        &["0.0,1.0,2.0,3.0", "0.5,1.0,2.0,3.0", "1.0,1.0,2.0,3.0"],
    );

    // k-NN estimate with k = 2: average of the two nearest responses
    let est = dir.path().join("estimate.csv");
    let out = funreg()
        .args(["estimate", "--scheme", "knn", "--k", "2", "--x"])
        .arg(&x)
        .arg("--data")
        .arg(&data)
        .arg("--responses")
        .arg(&responses)
        .arg("--out")
        .arg(&est)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(&est).unwrap();
    let second_line = text.lines().nth(1).unwrap();
    let value: f64 = second_line.split(',').nth(1).unwrap().parse().unwrap();
    assert!((value - 1.5).abs() < 1e-12, "estimate was {value}");

    // a bandwidth below every pairwise distance must fail numerically
    let out = funreg()
        .args(["estimate", "--scheme", "nw", "--h", "1e-9", "--x"])
        .arg(&x)
        .arg("--data")
        .arg(&data)
        .arg("--responses")
        .arg(&responses)
        .arg("--out")
        .arg(dir.path().join("nope.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(
        stderr(&out).contains("empty neighborhood"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn projection_metric_validates_the_basis() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("x.csv");
    let data = dir.path().join("data.csv");
    let basis = dir.path().join("basis.csv");
    write_curves(&x, "t,x", &["0.0,0.0", "0.5,0.0", "1.0,0.0"]);
    write_curves(
        &data,
        "t,x1,x2",
        &["0.0,1.0,2.0", "0.5,1.0,2.0", "1.0,1.0,2.0"],
    );
    // constant and identity curves are not orthonormal
    write_curves(
        &basis,
        "t,b1,b2",
        &["0.0,1.0,0.0", "0.5,1.0,0.5", "1.0,1.0,1.0"],
    );
    let out = funreg()
        .args(["estimate", "--scheme", "knn", "--k", "1"])
        .arg("--metric")
        .arg(format!("projection:2:{}", basis.display()))
        .arg("--x")
        .arg(&x)
        .arg("--data")
        .arg(&data)
        .arg("--responses")
        .arg(&data)
        .arg("--out")
        .arg(dir.path().join("est.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("orthonormal"), "{}", stderr(&out));
}

#[test]
fn help_lists_subcommands() {
    let out = funreg().arg("--help").output().unwrap();
    assert!(out.status.success());
    let text = stdout(&out);
    for sub in ["simulate", "estimate", "orlicz", "smallball", "ratebench"] {
        assert!(text.contains(sub), "--help missing {sub}");
    }
}

#[test]
fn seeds_are_mandatory() {
    let dir = tempfile::tempdir().unwrap();
    let process = dir.path().join("process.toml");
    // same as the shipped ar1 spec, seed stripped
    let text = std::fs::read_to_string(workspace_file("configs/ar1_scalar.toml")).unwrap();
    let without_seed: String = text
        .lines()
        .filter(|l| !l.starts_with("seed"))
        .collect::<Vec<_>>()
        .join("\n");
    std::fs::write(&process, without_seed).unwrap();

    let out = funreg()
        .args(["simulate", "--n", "10", "--process"])
        .arg(&process)
        .arg("--out")
        .arg(dir.path().join("seq.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    assert!(stderr(&out).contains("seed"), "{}", stderr(&out));

    // the --seed flag satisfies the requirement
    let out = funreg()
        .args(["simulate", "--n", "10", "--seed", "42", "--process"])
        .arg(&process)
        .arg("--out")
        .arg(dir.path().join("seq.csv"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn simulate_coupled_writes_all_paths_and_reproduces() {
    let dir = tempfile::tempdir().unwrap();
    let out_csv = dir.path().join("seq.csv");
    let run = || {
        funreg()
            .args(["simulate", "--n", "50", "--couple", "2,4", "--process"])
            .arg(workspace_file("configs/ar1_scalar.toml"))
            .arg("--out")
            .arg(&out_csv)
            .output()
            .unwrap()
    };
    let out = run();
    assert!(out.status.success(), "{}", stderr(&out));
    for name in ["seq.csv", "seq_primed.csv", "seq_m2.csv", "seq_m4.csv"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("seq.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 4);

    let first = std::fs::read(&out_csv).unwrap();
    let out = run();
    assert!(out.status.success());
    assert_eq!(first, std::fs::read(&out_csv).unwrap());
}

#[test]
fn orlicz_norm_of_constant_sample() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("samples.csv");
    std::fs::write(&input, "value\n3.0\n3.0\n3.0\n3.0\n").unwrap();
    let out = funreg()
        .args(["orlicz", "--psi", "power", "--p", "2", "--input"])
        .arg(&input)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let parsed: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let value = parsed["value"].as_f64().unwrap();
    assert!((value - 3.0).abs() < 1e-5, "value {value}");
}

#[test]
fn smallball_phi_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out_csv = dir.path().join("phi.csv");
    let out = funreg()
        .args([
            "smallball",
            "--check",
            "phi",
            "--n",
            "2000",
            "--hgrid",
            "0.1:3.0:30",
            "--x",
            "zero",
        ])
        .arg("--process")
        .arg(workspace_file("configs/ar1_scalar.toml"))
        .arg("--out")
        .arg(&out_csv)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(&out_csv).unwrap();
    assert!(text.starts_with("h,phi_hat\n"));
    assert_eq!(text.lines().count(), 31);
}

#[test]
fn smallball_radius_check_reports_violation_fraction() {
    let dir = tempfile::tempdir().unwrap();
    let out_csv = dir.path().join("p1.csv");
    let process = dir.path().join("gauss.json");
    std::fs::write(
        &process,
        r#"{"seed": 9, "process": {"iid_gaussian_finite": {"dim": 2}}}"#,
    )
    .unwrap();
    let out = funreg()
        .args([
            "smallball",
            "--check",
            "p1",
            "--n",
            "500",
            "--k",
            "40",
            "--reps",
            "50",
            "--hgrid",
            "0.01:3.0:120",
            "--x",
            "zero",
        ])
        .arg("--process")
        .arg(&process)
        .arg("--out")
        .arg(&out_csv)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let parsed: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(parsed["violation_fraction"].as_f64().unwrap() <= 0.05);
    let text = std::fs::read_to_string(&out_csv).unwrap();
    assert!(text.starts_with("replication,statistic,violated\n"));
    assert_eq!(text.lines().count(), 51);
}
