//! End-to-end tests of the `dybm` binary: exit codes, file formats, and
//! reproducibility guarantees that downstream scripts rely on.

use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

const PER_STEP_HEADER: &str = "step,target,prediction,sq_error,rolling_mse";
const SUMMARY_HEADER: &str =
    "model,d,mu,runs,steps,converged_mse,improvement_vs_var,seconds_per_1000_steps";

fn dybm() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dybm"))
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("the dybm binary launches")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

/// Summary rows end with a wall-clock timing column; strip it so two
/// invocations can be compared on everything that is deterministic.
fn strip_timing(csv: &str) -> String {
    csv.lines()
        .map(|line| line.rsplit_once(',').map_or(line, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn train_writes_one_row_per_step() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("run.csv");
    let summary = dir.path().join("run.summary.csv");
    let result = run(dybm()
        .args(["train", "--model", "var", "--d", "1", "--steps", "1000"])
        .args(["--runs", "1", "--seed", "7", "--out"])
        .arg(&out)
        .arg("--summary-out")
        .arg(&summary));
    assert!(result.status.success(), "stderr: {}", stderr_of(&result));

    let per_step = read(&out);
    let mut lines = per_step.lines();
    assert_eq!(lines.next(), Some(PER_STEP_HEADER));
    assert_eq!(lines.count(), 1000);
    assert!(per_step.ends_with('\n'));
    assert!(!per_step.contains('\r'));

    let summary_text = read(&summary);
    let mut lines = summary_text.lines();
    assert_eq!(lines.next(), Some(SUMMARY_HEADER));
    assert_eq!(lines.count(), 1);
}

#[test]
fn train_without_d_fails_with_usage() {
    let result = run(dybm().args(["train", "--model", "var", "--steps", "200"]));
    assert_eq!(result.status.code(), Some(2));
    let stderr = stderr_of(&result);
    assert!(stderr.contains("--d is required"), "stderr: {stderr}");
    assert!(stderr.contains("Usage: dybm train"), "stderr: {stderr}");
}

#[test]
fn identical_invocations_write_identical_bytes() {
    let dir = tempdir().unwrap();
    let args = |out: &Path, summary: &Path| {
        let mut cmd = dybm();
        cmd.args(["train", "--model", "gaussian-dybm", "--d", "2", "--mu", "0.5"])
            .args(["--steps", "600", "--runs", "3", "--seed", "11", "--out"])
            .arg(out)
            .arg("--summary-out")
            .arg(summary);
        cmd
    };
    let (a, sa) = (dir.path().join("a.csv"), dir.path().join("a.summary.csv"));
    let (b, sb) = (dir.path().join("b.csv"), dir.path().join("b.summary.csv"));
    assert!(run(&mut args(&a, &sa)).status.success());
    assert!(run(&mut args(&b, &sb)).status.success());
    assert_eq!(read(&a), read(&b), "per-step output drifted between reruns");
    assert_eq!(strip_timing(&read(&sa)), strip_timing(&read(&sb)));
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(&config, "d = 2\nsteps = 800\nseed = 5\nmodel = \"var\"\n").unwrap();
    let out = dir.path().join("from_file.csv");

    let result = run(dybm()
        .arg("train")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .arg("--summary-out")
        .arg(dir.path().join("s1.csv")));
    assert!(result.status.success(), "stderr: {}", stderr_of(&result));
    assert_eq!(read(&out).lines().count(), 801, "800 rows plus the header");
    assert!(
        stderr_of(&result).contains("notice:"),
        "defaulted keys should be announced"
    );

    let out2 = dir.path().join("overridden.csv");
    let result = run(dybm()
        .arg("train")
        .arg("--config")
        .arg(&config)
        .args(["--steps", "550"])
        .arg("--out")
        .arg(&out2)
        .arg("--summary-out")
        .arg(dir.path().join("s2.csv")));
    assert!(result.status.success(), "stderr: {}", stderr_of(&result));
    assert_eq!(read(&out2).lines().count(), 551, "the flag beats the file");
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "d = 1\nbogus_key = 3\n").unwrap();
    let result = run(dybm().arg("train").arg("--config").arg(&config));
    assert_eq!(result.status.code(), Some(2));
    assert!(stderr_of(&result).contains("bogus_key"));
}

#[test]
fn var_with_nonzero_mu_is_rejected() {
    let result = run(dybm().args([
        "train", "--model", "var", "--d", "1", "--mu", "0.3", "--steps", "200",
    ]));
    assert_eq!(result.status.code(), Some(2));
    let stderr = stderr_of(&result);
    assert!(stderr.contains("var model has no trace decay"), "stderr: {stderr}");
}

#[test]
fn divergence_names_the_run_and_step() {
    let result = run(dybm().args([
        "train",
        "--model",
        "gaussian-dybm",
        "--d",
        "1",
        "--mu",
        "0.5",
        "--steps",
        "500",
        "--eta0",
        "1e160",
        "--seed",
        "3",
    ]));
    assert_eq!(result.status.code(), Some(3));
    let stderr = stderr_of(&result);
    assert!(stderr.contains("numeric divergence"), "stderr: {stderr}");
    assert!(stderr.contains("run 0"), "stderr: {stderr}");
    assert!(stderr.contains("at step"), "stderr: {stderr}");
}

#[test]
fn snapshot_resume_matches_an_uninterrupted_run() {
    let dir = tempdir().unwrap();
    let snap = dir.path().join("checkpoint.json");
    let resumed = dir.path().join("resumed.csv");
    let full = dir.path().join("full.csv");

    let model_args = ["--model", "gaussian-dybm", "--d", "2", "--mu", "0.5", "--seed", "9"];
    let result = run(dybm()
        .args(["snapshot", "save"])
        .args(model_args)
        .args(["--steps", "500", "--out"])
        .arg(&snap));
    assert!(result.status.success(), "stderr: {}", stderr_of(&result));

    let result = run(dybm()
        .args(["snapshot", "load", "--in"])
        .arg(&snap)
        .args(["--steps", "100", "--out"])
        .arg(&resumed));
    assert!(result.status.success(), "stderr: {}", stderr_of(&result));

    let result = run(dybm()
        .args(["train"])
        .args(model_args)
        .args(["--steps", "600", "--runs", "1", "--out"])
        .arg(&full)
        .arg("--summary-out")
        .arg(dir.path().join("full.summary.csv")));
    assert!(result.status.success(), "stderr: {}", stderr_of(&result));

    // Steps 501..=600 of the uninterrupted run, keeping only the fields
    // that do not depend on window placement.
    let tail: Vec<String> = read(&full)
        .lines()
        .skip(1 + 500)
        .map(|line| line.splitn(5, ',').take(4).collect::<Vec<_>>().join(","))
        .collect();
    let resumed_rows: Vec<String> = read(&resumed)
        .lines()
        .skip(1)
        .map(|line| line.splitn(5, ',').take(4).collect::<Vec<_>>().join(","))
        .collect();
    assert_eq!(tail.len(), 100);
    assert_eq!(resumed_rows, tail, "resume must be bit identical to training straight through");
}

#[test]
fn snapshot_load_rejects_an_empty_file() {
    let dir = tempdir().unwrap();
    let snap = dir.path().join("empty.json");
    std::fs::write(&snap, "").unwrap();
    let result = run(dybm().args(["snapshot", "load", "--in"]).arg(&snap));
    assert_eq!(result.status.code(), Some(4));
    assert!(stderr_of(&result).contains("is empty"));
}

#[test]
fn snapshot_load_rejects_a_tampered_version() {
    let dir = tempdir().unwrap();
    let snap = dir.path().join("checkpoint.json");
    let result = run(dybm()
        .args(["snapshot", "save", "--model", "var", "--d", "1"])
        .args(["--steps", "200", "--seed", "1", "--out"])
        .arg(&snap));
    assert!(result.status.success(), "stderr: {}", stderr_of(&result));

    let tampered = read(&snap).replace("\"version\": 1", "\"version\": 99");
    assert_ne!(read(&snap), tampered, "the version field must exist to be tampered with");
    std::fs::write(&snap, tampered).unwrap();

    let result = run(dybm().args(["snapshot", "load", "--in"]).arg(&snap));
    assert_eq!(result.status.code(), Some(4));
    let stderr = stderr_of(&result);
    assert!(stderr.contains("version mismatch"), "stderr: {stderr}");
    assert!(stderr.contains("99"), "stderr: {stderr}");
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempdir().unwrap();
    let run_with = |threads: &str, out: &Path, summary: &Path| {
        let result = run(dybm()
            .env("DYBM_THREADS", threads)
            .args(["train", "--model", "gaussian-dybm", "--d", "1", "--mu", "0.5"])
            .args(["--steps", "600", "--runs", "4", "--seed", "21", "--out"])
            .arg(out)
            .arg("--summary-out")
            .arg(summary));
        assert!(result.status.success(), "stderr: {}", stderr_of(&result));
    };
    let (one, s_one) = (dir.path().join("t1.csv"), dir.path().join("t1.summary.csv"));
    let (eight, s_eight) = (dir.path().join("t8.csv"), dir.path().join("t8.summary.csv"));
    run_with("1", &one, &s_one);
    run_with("8", &eight, &s_eight);
    assert_eq!(read(&one), read(&eight), "thread count leaked into the results");
    assert_eq!(strip_timing(&read(&s_one)), strip_timing(&read(&s_eight)));
}

#[test]
fn sweep_emits_curves_a_timing_table_and_a_summary() {
    let dir = tempdir().unwrap();
    let out_dir = dir.path().join("sweep");
    let result = run(dybm()
        .args(["sweep", "--mu", "0,0.9", "--d", "1", "--steps", "1200"])
        .args(["--runs", "2", "--seed", "3", "--out-dir"])
        .arg(&out_dir));
    assert!(result.status.success(), "stderr: {}", stderr_of(&result));

    let summary = read(&out_dir.join("summary.csv"));
    let mut lines = summary.lines();
    assert_eq!(lines.next(), Some(SUMMARY_HEADER));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2, "one row per (d, mu) cell");
    let var_row = rows.iter().find(|r| r.starts_with("var,")).expect("a baseline row");
    let improvement = var_row.split(',').nth(6).unwrap();
    assert_eq!(improvement.parse::<f64>().unwrap(), 0.0, "the baseline cannot beat itself");

    for name in ["curve_d1_mu0.csv", "curve_d1_mu0.9.csv"] {
        let curve = read(&out_dir.join(name));
        let mut lines = curve.lines();
        assert_eq!(lines.next(), Some("step,rolling_mse"));
        assert!(lines.next().unwrap().starts_with("51,"), "{name} starts at the first full window");
    }

    let timing = read(&out_dir.join("timing.csv"));
    let mut lines = timing.lines();
    assert_eq!(
        lines.next(),
        Some("d,gaussian_dybm_seconds_per_1000_steps,var_seconds_per_1000_steps")
    );
    for row in lines {
        let mut fields = row.split(',');
        assert_eq!(fields.next(), Some("1"));
        for value in fields {
            assert!(value.parse::<f64>().unwrap() > 0.0, "timings must be positive");
        }
    }
}

#[test]
fn data_mode_trains_on_csv_columns() {
    let dir = tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let mut body = String::from("left,right\n");
    for t in 0..600 {
        let x = (t as f64 * 0.1).sin();
        body.push_str(&format!("{x},{}\n", 0.5 * x));
    }
    std::fs::write(&data, body).unwrap();

    let out = dir.path().join("fit.csv");
    let summary = dir.path().join("fit.summary.csv");
    let result = run(dybm()
        .args(["train", "--model", "gaussian-dybm", "--d", "2", "--mu", "0.5"])
        .args(["--seed", "1", "--data"])
        .arg(&data)
        .arg("--out")
        .arg(&out)
        .arg("--summary-out")
        .arg(&summary));
    assert!(result.status.success(), "stderr: {}", stderr_of(&result));
    assert!(
        stderr_of(&result).contains("skipping header line"),
        "the non-numeric first line should be skipped with a notice"
    );
    assert_eq!(read(&out).lines().count(), 601, "one row per data row plus the header");

    let summary_row = read(&summary).lines().nth(1).unwrap().to_string();
    let fields: Vec<&str> = summary_row.split(',').collect();
    assert_eq!(fields[3], "1", "data mode is a single pass");
    assert_eq!(fields[4], "600", "steps come from the file length");
}
