//! End-to-end checks of the `tab-sim` binary: flag handling, config-file
//! layering, artifact writing, and the shape of error reporting.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tab_sim::experiments::{RegressionReport, TaskKind};

fn tab_sim(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tab-sim"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .unwrap()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn help_lists_the_subcommands() {
    let out = Command::new(env!("CARGO_BIN_EXE_tab-sim"))
        .arg("--help")
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["regress", "hetero", "bits", "mc"] {
        assert!(text.contains(sub), "help does not mention {sub}");
    }
}

#[test]
fn regress_writes_artifacts_and_reports_progress() {
    let dir = tempfile::tempdir().unwrap();
    let out = tab_sim(
        &["regress", "--task", "cube", "--neurons", "12", "--seed", "1"],
        dir.path(),
    );
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("test_nrmse"));

    let report: RegressionReport =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report.config.neurons, 12);
    assert_eq!(report.config.seed, 1);
    assert!(matches!(report.config.task.name, TaskKind::Cube));
    assert!(dir.path().join("curve.csv").is_file());
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("exp.json");
    fs::write(
        &cfg_path,
        r#"{ "task": { "name": "sinc" }, "L": 10, "seed": 3 }"#,
    )
    .unwrap();
    let out = tab_sim(
        &[
            "regress",
            "--config",
            cfg_path.to_str().unwrap(),
            "--neurons",
            "14",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let report: RegressionReport =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    // The flag wins over the file; untouched fields keep the file's values.
    assert_eq!(report.config.neurons, 14);
    assert_eq!(report.config.seed, 3);
    assert!(matches!(report.config.task.name, TaskKind::Sinc));
}

#[test]
fn rejected_config_fields_surface_as_one_line_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("bad.json");
    fs::write(&cfg_path, r#"{ "neuron_count": 10 }"#).unwrap();
    let out = tab_sim(
        &["regress", "--config", cfg_path.to_str().unwrap()],
        dir.path(),
    );
    assert!(!out.status.success());
    let err = stderr_of(&out);
    assert!(err.starts_with("error:"), "stderr was: {err}");
    assert_eq!(err.trim_end().lines().count(), 1, "stderr was: {err}");
}

#[test]
fn invalid_population_size_fails_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = tab_sim(&["regress", "--neurons", "0"], dir.path());
    assert!(!out.status.success());
    assert!(stderr_of(&out).starts_with("error:"));
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn malformed_offset_span_is_rejected_at_parse_time() {
    let dir = tempfile::tempdir().unwrap();
    let out = tab_sim(&["regress", "--offset-span", "0.9,0.3"], dir.path());
    assert!(!out.status.success());
    assert!(stderr_of(&out).contains("span must satisfy lo < hi"));
}

#[test]
fn bits_sweep_writes_the_requested_widths() {
    let dir = tempfile::tempdir().unwrap();
    let out = tab_sim(
        &["bits", "--neurons", "10", "--bits-list", "2,8,13"],
        dir.path(),
    );
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let csv = fs::read_to_string(dir.path().join("bits.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "bits,test_nrmse");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("2,"));
    assert!(lines[3].starts_with("13,"));
}

#[test]
fn hetero_writes_all_three_arms() {
    let dir = tempfile::tempdir().unwrap();
    let out = tab_sim(&["hetero", "--neurons", "10", "--sigma-vos", "0.003"], dir.path());
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let csv = fs::read_to_string(dir.path().join("arms.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    for arm in ["homogeneous", "mismatch_only", "offset_span"] {
        assert!(csv.contains(arm), "missing arm {arm}");
    }
}

#[test]
fn invalid_thread_cap_warns_but_still_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_tab-sim"))
        .args(["mc", "--chips", "2", "--neurons", "8"])
        .arg("--out")
        .arg(dir.path())
        .env("TAB_SIM_THREADS", "many")
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    assert!(stderr_of(&out).contains("ignoring invalid TAB_SIM_THREADS"));
    assert!(dir.path().join("chips.csv").is_file());
}
