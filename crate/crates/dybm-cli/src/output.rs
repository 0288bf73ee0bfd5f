//! CSV emission and ingestion. All files use a header row, LF line
//! endings, and 17 significant digits for floating-point fields, so equal
//! results produce byte-identical files and every value round-trips
//! exactly.

use crate::CliError;
use dybm::experiment::{ModelKind, MseCurve, RunRecord};
use std::path::Path;

/// 17 significant digits: the shortest count that reproduces every 64-bit
/// float exactly.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

/// Per-step trajectory of one run. `first_step` offsets the step column so
/// resumed segments keep their absolute step numbers; `curve` supplies the
/// rolling_mse column, left empty at steps where the window does not fit.
pub fn write_per_step_csv(
    path: &Path,
    first_step: u64,
    record: &RunRecord,
    curve: Option<&MseCurve>,
) -> Result<(), CliError> {
    let mut out = String::with_capacity(96 * record.steps() + 64);
    out.push_str("step,target,prediction,sq_error,rolling_mse\n");
    for k in 0..record.steps() {
        let rolling = curve
            .and_then(|c| c.value_at(k + 1))
            .map(fmt17)
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            first_step + k as u64,
            fmt17(record.targets[k]),
            fmt17(record.predictions[k]),
            fmt17(record.sq_errors[k]),
            rolling,
        ));
    }
    write_file(path, &out)
}

/// One row of a summary table.
pub struct SummaryRow {
    pub model: ModelKind,
    pub d: usize,
    pub mu: f64,
    pub runs: usize,
    pub steps: usize,
    pub converged_mse: f64,
    pub improvement_vs_var: f64,
    pub seconds_per_1000_steps: f64,
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<(), CliError> {
    let mut out = String::from(
        "model,d,mu,runs,steps,converged_mse,improvement_vs_var,seconds_per_1000_steps\n",
    );
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            row.model.as_str(),
            row.d,
            fmt17(row.mu),
            row.runs,
            row.steps,
            fmt17(row.converged_mse),
            fmt17(row.improvement_vs_var),
            fmt17(row.seconds_per_1000_steps),
        ));
    }
    write_file(path, &out)
}

/// Run-averaged rolling-MSE curve for one sweep cell.
pub fn write_curve_csv(path: &Path, curve: &MseCurve) -> Result<(), CliError> {
    let mut out = String::with_capacity(32 * curve.values.len() + 32);
    out.push_str("step,rolling_mse\n");
    for (k, value) in curve.values.iter().enumerate() {
        out.push_str(&format!("{},{}\n", curve.first_step + k, fmt17(*value)));
    }
    write_file(path, &out)
}

/// Timing table: one row per delay, seconds per 1000 learning steps for
/// each model kind.
pub fn write_timing_csv(path: &Path, rows: &[(usize, f64, f64)]) -> Result<(), CliError> {
    let mut out =
        String::from("d,gaussian_dybm_seconds_per_1000_steps,var_seconds_per_1000_steps\n");
    for &(d, dybm_seconds, var_seconds) in rows {
        out.push_str(&format!(
            "{},{},{}\n",
            d,
            fmt17(dybm_seconds),
            fmt17(var_seconds)
        ));
    }
    write_file(path, &out)
}

/// Reads user time-series data: one CSV column per unit, one row per step.
/// A non-numeric first line is treated as a header and skipped.
pub fn read_data_csv(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read data file {}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (index, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parsed: Result<Vec<f64>, _> =
            line.split(',').map(|cell| cell.trim().parse::<f64>()).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if index == 0 => {
                eprintln!("notice: skipping header line in {}", path.display());
            }
            Err(e) => {
                return Err(CliError::Config(format!(
                    "data file {} line {}: {e}",
                    path.display(),
                    index + 1
                )));
            }
        }
    }
    if rows.is_empty() {
        return Err(CliError::Config(format!(
            "data file {} has no data rows",
            path.display()
        )));
    }
    Ok(rows)
}
