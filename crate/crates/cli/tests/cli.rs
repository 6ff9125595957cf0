//! End-to-end checks of the binary: output layout, manifest
//! reproducibility, config handling, and exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn gfd(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gfd"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn density_run_is_byte_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let args = [
        "density",
        "--model",
        "normal-ls",
        "--n",
        "3",
        "--data",
        "0,1,3",
        "--box",
        "-4:6,0.05:8",
        "--grid",
        "60x60",
        "--out",
        "density.csv",
        "--json",
        "density.json",
    ];
    let out = gfd(tmp.path(), &args);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv1 = read(tmp.path(), "density.csv");
    let json1 = read(tmp.path(), "density.json");
    let manifest1 = read(tmp.path(), "density.manifest.json");
    assert!(csv1.starts_with(b"xi0,xi1,density\n"));
    let manifest_text = String::from_utf8(manifest1.clone()).unwrap();
    assert!(manifest_text.contains("\"subcommand\": \"density\""));
    assert!(manifest_text.contains("sha256"));

    let out2 = gfd(tmp.path(), &args);
    assert!(out2.status.success());
    assert_eq!(csv1, read(tmp.path(), "density.csv"));
    assert_eq!(json1, read(tmp.path(), "density.json"));
    assert_eq!(manifest1, read(tmp.path(), "density.manifest.json"));
}

#[test]
fn seeded_sampling_reproduces_and_reports_metadata() {
    let tmp = tempfile::tempdir().unwrap();
    let args = [
        "sample", "--model", "geometric", "--observed", "3", "--draws", "100", "--seed", "42",
        "--out", "draws.csv",
    ];
    assert!(gfd(tmp.path(), &args).status.success());
    let csv1 = read(tmp.path(), "draws.csv");
    let meta1 = read(tmp.path(), "draws.meta.json");
    assert!(csv1.starts_with(b"lo,half,hi\n"));
    assert!(String::from_utf8_lossy(&meta1).contains("\"seed\": 42"));
    assert!(gfd(tmp.path(), &args).status.success());
    assert_eq!(csv1, read(tmp.path(), "draws.csv"));
    assert_eq!(meta1, read(tmp.path(), "draws.meta.json"));
}

#[test]
fn eps_ladder_writes_one_file_per_rung() {
    let tmp = tempfile::tempdir().unwrap();
    let out = gfd(
        tmp.path(),
        &[
            "sample",
            "--model",
            "normal-location",
            "--n",
            "1",
            "--data",
            "0.5",
            "--box",
            "-8:8",
            "--grid",
            "200",
            "--eps-ladder",
            "0.5,0.25",
            "--draws",
            "200",
            "--seed",
            "9",
            "--out",
            "s.csv",
        ],
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("s_eps0.5.csv").exists());
    assert!(tmp.path().join("s_eps0.25.csv").exists());
    assert!(tmp.path().join("s_eps0.25.meta.json").exists());
}

#[test]
fn model_config_file_is_accepted_in_toml_and_json() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("model.toml"),
        "[model]\nname = \"normal-ls\"\nn = 2\n\n[param_space]\nlo = [-3.0, 0.1]\nhi = [3.0, 4.0]\n\n[grid]\ncounts = [40, 40]\n",
    )
    .unwrap();
    let out = gfd(
        tmp.path(),
        &["density", "--config", "model.toml", "--data", "0.3,1.1", "--out", "d.csv"],
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    // 40x40 grid -> 1600 rows + header.
    let lines = read(tmp.path(), "d.csv").iter().filter(|&&b| b == b'\n').count();
    assert_eq!(lines, 1601);

    std::fs::write(
        tmp.path().join("model.json"),
        r#"{"model": {"name": "normal-ls", "n": 2},
            "param_space": {"lo": [-3.0, 0.1], "hi": [3.0, 4.0]},
            "grid": {"counts": [40, 40]}}"#,
    )
    .unwrap();
    let out2 = gfd(
        tmp.path(),
        &["density", "--config", "model.json", "--data", "0.3,1.1", "--out", "d2.csv"],
    );
    assert!(out2.status.success(), "stderr: {}", String::from_utf8_lossy(&out2.stderr));
    assert_eq!(read(tmp.path(), "d.csv"), read(tmp.path(), "d2.csv"));
}

#[test]
fn config_errors_exit_2_and_produce_no_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    // Unknown flag.
    let out = gfd(tmp.path(), &["density", "--frobnicate", "1", "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(2));
    // Missing model.
    let out2 = gfd(tmp.path(), &["density", "--data", "1", "--out", "x.csv"]);
    assert_eq!(out2.status.code(), Some(2));
    // Bad config file: missing field, path reported.
    std::fs::write(tmp.path().join("bad.toml"), "[model]\nname = \"binomial\"\n").unwrap();
    let out3 = gfd(
        tmp.path(),
        &["density", "--config", "bad.toml", "--data", "1", "--out", "x.csv"],
    );
    assert_eq!(out3.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out3.stderr).to_string();
    assert!(msg.contains("bad.toml"), "stderr: {msg}");
    // Wrong data length for the model.
    let out4 = gfd(
        tmp.path(),
        &[
            "density", "--model", "normal-ls", "--n", "3", "--data", "1,2", "--out", "x.csv",
        ],
    );
    assert_eq!(out4.status.code(), Some(2));
    assert!(!tmp.path().join("x.csv").exists(), "config errors must not write outputs");
}

#[test]
fn numerical_failures_exit_3_without_partial_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    // The exponential-rate CDF increases in the parameter, violating the
    // single-observation precondition.
    let out = gfd(
        tmp.path(),
        &["fisher", "--cdf", "exponential-rate", "--x", "1.0", "--box", "0.1:5", "--out", "f.csv"],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not monotone"));
    assert!(!tmp.path().join("f.csv").exists());

    // Budget exhaustion surfaces as a numerical failure.
    let out2 = gfd(
        tmp.path(),
        &[
            "sample",
            "--model",
            "normal-ls",
            "--n",
            "5",
            "--data",
            "0,1,-1,0.5,2",
            "--box",
            "-3:3,0.05:3",
            "--grid",
            "20x20",
            "--eps",
            "1e-9",
            "--draws",
            "50",
            "--budget",
            "2000",
            "--seed",
            "3",
            "--out",
            "s.csv",
        ],
    );
    assert_eq!(out2.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out2.stderr).contains("budget"));
}

#[test]
fn wcp_and_slp_pair_emit_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let out = gfd(
        tmp.path(),
        &[
            "wcp-demo", "--x", "0", "--m", "1", "--draws", "2000", "--seed", "11", "--out",
            "wcp.json", "--csv", "wcp.csv",
        ],
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = String::from_utf8(read(tmp.path(), "wcp.json")).unwrap();
    assert!(report.contains("ks_conditional"));
    assert!(read(tmp.path(), "wcp.csv").starts_with(b"theta,"));

    let out2 = gfd(
        tmp.path(),
        &[
            "slp-pair", "--theta", "0,0.5", "--reps", "4000", "--seed", "5", "--out",
            "pair.json", "--csv", "pair.csv",
        ],
    );
    assert!(out2.status.success(), "stderr: {}", String::from_utf8_lossy(&out2.stderr));
    let report2 = String::from_utf8(read(tmp.path(), "pair.json")).unwrap();
    assert!(report2.contains("\"verdict\""));
    assert!(read(tmp.path(), "pair.csv").starts_with(b"theta,c,stderr"));
}

#[test]
fn coverage_reports_for_both_model_families() {
    let tmp = tempfile::tempdir().unwrap();
    let out = gfd(
        tmp.path(),
        &[
            "coverage",
            "--model",
            "normal-location",
            "--n",
            "1",
            "--xi-true",
            "0",
            "--box",
            "-10:10",
            "--grid",
            "600",
            "--level",
            "0.5,0.95",
            "--reps",
            "60",
            "--seed",
            "13",
            "--out",
            "cov.json",
        ],
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(read(tmp.path(), "cov.json")).unwrap();
    assert!(text.contains("\"continuous\""));

    let out2 = gfd(
        tmp.path(),
        &[
            "coverage", "--model", "geometric", "--xi-true", "0.3", "--grid", "3000",
            "--level", "0.95", "--reps", "60", "--seed", "17", "--out", "gcov.json",
        ],
    );
    assert!(out2.status.success(), "stderr: {}", String::from_utf8_lossy(&out2.stderr));
    let text2 = String::from_utf8(read(tmp.path(), "gcov.json")).unwrap();
    assert!(text2.contains("discrete_half"));
    assert!(text2.contains("discrete_envelope"));
}
