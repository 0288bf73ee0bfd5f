//! Checkpointing: serialize a mid-run learner together with its generator
//! stream so training can stop and resume with bit-identical results.
//!
//! The file is JSON with an explicit integer version so other tools (and
//! future versions of this one) can inspect it and refuse cleanly on
//! mismatch.

use crate::{config, output, usage_error, CliError, SnapshotLoadArgs, SnapshotSaveArgs};
use dybm::experiment::{
    rolling_mse_curve, ExperimentConfig, ModelKind, OnlineLearner, RunRecord, SineStream,
};
use std::time::Instant;

pub const SNAPSHOT_VERSION: u64 = 1;

#[derive(serde::Serialize, serde::Deserialize)]
struct Snapshot {
    version: u64,
    model: ModelKind,
    config: ExperimentConfig,
    learner: OnlineLearner,
    stream: SineStream,
}

/// Advances the learner `steps` observations, mirroring the uninterrupted
/// training loop exactly, and records the trajectory.
fn step_learner(
    learner: &mut OnlineLearner,
    stream: &mut SineStream,
    steps: usize,
) -> Result<RunRecord, CliError> {
    let mut targets = Vec::with_capacity(steps);
    let mut predictions = Vec::with_capacity(steps);
    let mut sq_errors = Vec::with_capacity(steps);
    let start = Instant::now();
    for _ in 0..steps {
        let m = learner.predict()[0];
        if !m.is_finite() {
            return Err(CliError::Numeric(format!(
                "numeric divergence in run 0: non-finite prediction at step {}",
                learner.step() + 1
            )));
        }
        let x = stream.next_value();
        let r = x - m;
        targets.push(x);
        predictions.push(m);
        sq_errors.push(r * r);
        learner
            .observe_with_mean(&[x], &[m])
            .map_err(|e| CliError::Numeric(format!("numeric divergence in run 0: {e}")))?;
    }
    Ok(RunRecord {
        run: 0,
        targets,
        predictions,
        sq_errors,
        learn_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Trains a fresh single run to the configured step count and saves the
/// checkpoint.
pub fn save(args: &SnapshotSaveArgs) -> Result<(), CliError> {
    let file = config::load_optional(args.model.config.as_ref())?;
    let d = args.model.d.or(file.d).ok_or_else(|| {
        usage_error(
            &["snapshot", "save"],
            "--d is required; set it on the command line or in the config file",
        )
    })?;
    let cfg = config::resolve_experiment(&args.model, &file, d)?;
    if cfg.runs != 1 {
        return Err(CliError::Config(format!(
            "snapshot save records a single run; set runs to 1 (got {})",
            cfg.runs
        )));
    }
    let mut stream = SineStream::new(cfg.sine_spec(), 0).map_err(CliError::from)?;
    let model = cfg.build_model().map_err(CliError::from)?;
    let mut learner = OnlineLearner::new(model, cfg.eta0).map_err(CliError::from)?;
    step_learner(&mut learner, &mut stream, cfg.steps)?;
    let snapshot = Snapshot {
        version: SNAPSHOT_VERSION,
        model: cfg.model,
        config: cfg.clone(),
        learner,
        stream,
    };
    let json = serde_json::to_string_pretty(&snapshot)
        .map_err(|e| CliError::Io(format!("cannot serialize snapshot: {e}")))?;
    std::fs::write(&args.out, json)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", args.out.display())))?;
    println!(
        "saved checkpoint at step {} to {}",
        cfg.steps,
        args.out.display()
    );
    Ok(())
}

/// Restores a checkpoint, verifies its version, resumes the run, and
/// optionally writes the resumed segment as a per-step CSV.
pub fn load(args: &SnapshotLoadArgs) -> Result<(), CliError> {
    let path = &args.input;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Snapshot(format!("cannot read snapshot {}: {e}", path.display())))?;
    if text.trim().is_empty() {
        return Err(CliError::Snapshot(format!(
            "snapshot {} is empty",
            path.display()
        )));
    }
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| {
        CliError::Snapshot(format!("snapshot {} is corrupt: {e}", path.display()))
    })?;
    let version = match value.get("version") {
        None => {
            return Err(CliError::Snapshot(format!(
                "snapshot {} has no version field",
                path.display()
            )));
        }
        Some(v) => v.as_u64().ok_or_else(|| {
            CliError::Snapshot(format!(
                "snapshot {}: version field is not an integer",
                path.display()
            ))
        })?,
    };
    if version != SNAPSHOT_VERSION {
        return Err(CliError::Snapshot(format!(
            "snapshot {} version mismatch: this build reads version {SNAPSHOT_VERSION}, \
             the file declares version {version}",
            path.display()
        )));
    }
    let snapshot: Snapshot = serde_json::from_value(value).map_err(|e| {
        CliError::Snapshot(format!("snapshot {} is corrupt: {e}", path.display()))
    })?;
    let steps = args
        .steps
        .unwrap_or_else(|| config::notice_default("steps", 1000));
    let mut learner = snapshot.learner;
    let mut stream = snapshot.stream;
    let start = learner.step();
    let record = step_learner(&mut learner, &mut stream, steps)?;
    if let Some(out) = &args.out {
        let window = snapshot.config.mse_window;
        let curve = if record.steps() >= window {
            Some(rolling_mse_curve(&record.sq_errors, window).map_err(CliError::from)?)
        } else {
            eprintln!(
                "notice: resumed segment is shorter than the rolling window; \
                 rolling_mse left empty"
            );
            None
        };
        output::write_per_step_csv(out, start + 1, &record, curve.as_ref())?;
        println!("wrote per-step data to {}", out.display());
    }
    println!(
        "resumed {} from step {} and ran {} steps",
        snapshot.model.as_str(),
        start,
        steps
    );
    Ok(())
}
