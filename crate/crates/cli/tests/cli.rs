use std::path::Path;
use std::process::Command;

fn qpot() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qpot"))
}

fn write_config(dir: &Path, outputs: &Path) -> std::path::PathBuf {
    let path = dir.join("scenario.conf");
    let text = format!(
        "[grid]\nx_min = -10\nx_max = 10\nn_points = 801\n\n\
         [constants]\nmass = 1\ndiffusion = 0.5\nbeta = 4\n\n\
         [potential]\nkind = rescaled_oscillator\n\n\
         [initial]\nkind = gaussian\nmean = 0.5\nsigma = 0.6\n\n\
         [run]\ndt = 0.002\nhorizon = 0.1\nseed = 11\noutputs = {}\n",
        outputs.display()
    );
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn ensemble_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let config = write_config(dir.path(), &out_a);
    for out in [&out_a, &out_b] {
        let status = qpot()
            .args(["ensemble", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = std::fs::read(out_a.join("trajectories.csv")).unwrap();
    let b = std::fs::read(out_b.join("trajectories.csv")).unwrap();
    assert_eq!(a, b, "seeded runs must produce identical bytes");
}

#[test]
fn invalid_dt_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.conf");
    std::fs::write(&config, "[run]\ndt = -0.5\n").unwrap();
    let output = qpot()
        .args(["evolve-quantum", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("dt must be positive"), "stderr: {stderr}");
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.conf");
    std::fs::write(&config, "[grid]\nwibble = 3\n").unwrap();
    let output = qpot()
        .args(["functionals", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn quantum_run_writes_series_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = write_config(dir.path(), &out);
    let status = qpot()
        .args(["evolve-quantum", "--config"])
        .arg(&config)
        .status()
        .unwrap();
    assert!(status.success());
    let series = std::fs::read_to_string(out.join("series.csv")).unwrap();
    assert!(series.starts_with("t,S,F,H,norm\n"));
    let manifest = std::fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("series.csv = sha256:"));
    assert!(manifest.contains("[versions]"));
}

#[test]
fn verify_subset_selection_runs_only_named_criteria() {
    let output = qpot().args(["verify", "--only", "c01"]).output().unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("c01_gaussian_functional_battery"));
    assert!(!stdout.contains("c03_kernel_goldens"));
    assert!(stdout.contains("verify: 1/1 criteria passed"));
}
