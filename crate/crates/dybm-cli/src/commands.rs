//! The train and sweep commands.

use crate::output::SummaryRow;
use crate::{config, output, usage_error, CliError, SweepArgs, TrainArgs};
use dybm::experiment::{
    average_runs, converged_mse, rolling_mse_curve, run_many_with_threads, run_online_data,
    time_per_run, ExperimentConfig, ModelKind, MseCurve, RunRecord,
};
use std::path::PathBuf;

/// Trains one configuration on the synthetic sine (or on user data) and
/// writes the per-step and summary CSV files.
pub fn train(args: &TrainArgs, threads: Option<usize>) -> Result<(), CliError> {
    let file = config::load_optional(args.model.config.as_ref())?;
    let d = args.model.d.or(file.d).ok_or_else(|| {
        usage_error(
            &["train"],
            "--d is required; set it on the command line or in the config file",
        )
    })?;
    let mut cfg = config::resolve_experiment(&args.model, &file, d)?;
    let out = args.out.clone().or(file.out.clone()).unwrap_or_else(|| {
        eprintln!("notice: out not set; defaulting to dybm_run.csv");
        PathBuf::from("dybm_run.csv")
    });
    let summary_out = args
        .summary_out
        .clone()
        .or(file.summary_out.clone())
        .unwrap_or_else(|| {
            let derived = out.with_extension("summary.csv");
            eprintln!("notice: summary_out not set; defaulting to {}", derived.display());
            derived
        });

    let data_path = args.data.clone().or(file.data.clone());
    let (record, curve, summary) = match data_path {
        Some(path) => train_on_data(&mut cfg, &path)?,
        None => train_on_sine(&cfg, threads)?,
    };
    output::write_per_step_csv(&out, 1, &record, curve.as_ref())?;
    output::write_summary_csv(&summary_out, &[summary])?;
    println!(
        "train: model {} d {} mu {} runs {} steps {}",
        cfg.model.as_str(),
        cfg.d,
        cfg.mu,
        cfg.runs,
        record.steps()
    );
    println!("wrote per-step data to {}", out.display());
    println!("wrote summary to {}", summary_out.display());
    Ok(())
}

fn train_on_sine(
    cfg: &ExperimentConfig,
    threads: Option<usize>,
) -> Result<(RunRecord, Option<MseCurve>, SummaryRow), CliError> {
    let records = run_many_with_threads(cfg, threads)?;
    let averaged = average_runs(&records, cfg.mse_window)?;
    let converged = converged_mse(&averaged, cfg.steps)?;
    let improvement = match cfg.model {
        ModelKind::Var => 0.0,
        ModelKind::GaussianDybm => {
            let var_cfg = ExperimentConfig {
                model: ModelKind::Var,
                mu: 0.0,
                ..cfg.clone()
            };
            let var_records = run_many_with_threads(&var_cfg, threads)?;
            let var_avg = average_runs(&var_records, var_cfg.mse_window)?;
            let var_converged = converged_mse(&var_avg, var_cfg.steps)?;
            improvement_vs_var(converged, var_converged)
        }
    };
    let seconds = records
        .iter()
        .map(RunRecord::seconds_per_1000_steps)
        .sum::<f64>()
        / records.len() as f64;
    let summary = SummaryRow {
        model: cfg.model,
        d: cfg.d,
        mu: cfg.mu,
        runs: cfg.runs,
        steps: cfg.steps,
        converged_mse: converged,
        improvement_vs_var: improvement,
        seconds_per_1000_steps: seconds,
    };
    let first = records.into_iter().next().expect("at least one run");
    let curve = rolling_mse_curve(&first.sq_errors, cfg.mse_window)?;
    Ok((first, Some(curve), summary))
}

fn train_on_data(
    cfg: &mut ExperimentConfig,
    path: &std::path::Path,
) -> Result<(RunRecord, Option<MseCurve>, SummaryRow), CliError> {
    let rows = output::read_data_csv(path)?;
    if cfg.runs != 1 {
        eprintln!(
            "notice: data mode trains a single pass over {}; ignoring runs={}",
            path.display(),
            cfg.runs
        );
        cfg.runs = 1;
    }
    let record = run_online_data(cfg, &rows)?;
    let curve = rolling_mse_curve(&record.sq_errors, cfg.mse_window)?;
    let converged = converged_mse(&curve, record.steps())?;
    let improvement = match cfg.model {
        ModelKind::Var => 0.0,
        ModelKind::GaussianDybm => {
            let var_cfg = ExperimentConfig {
                model: ModelKind::Var,
                mu: 0.0,
                ..cfg.clone()
            };
            let var_record = run_online_data(&var_cfg, &rows)?;
            let var_curve = rolling_mse_curve(&var_record.sq_errors, var_cfg.mse_window)?;
            let var_converged = converged_mse(&var_curve, var_record.steps())?;
            improvement_vs_var(converged, var_converged)
        }
    };
    let summary = SummaryRow {
        model: cfg.model,
        d: cfg.d,
        mu: cfg.mu,
        runs: 1,
        steps: record.steps(),
        converged_mse: converged,
        improvement_vs_var: improvement,
        seconds_per_1000_steps: record.seconds_per_1000_steps(),
    };
    Ok((record, Some(curve), summary))
}

fn improvement_vs_var(converged: f64, var_converged: f64) -> f64 {
    if var_converged > 0.0 {
        1.0 - converged / var_converged
    } else {
        0.0
    }
}

/// Runs every (mu, d) cell of the grid, writing one averaged-curve file per
/// cell plus a timing table and a summary table into the output directory.
pub fn sweep(args: &SweepArgs, threads: Option<usize>) -> Result<(), CliError> {
    let file = config::load_optional(args.config.as_ref())?;
    let mut mu_list = args.mu.clone().or(file.mu_list.clone()).unwrap_or_else(|| {
        eprintln!("notice: mu list not set; defaulting to 0,0.1,0.3,0.5,0.7,0.9");
        vec![0.0, 0.1, 0.3, 0.5, 0.7, 0.9]
    });
    let mut d_list = args.d.clone().or(file.d_list.clone()).unwrap_or_else(|| {
        eprintln!("notice: d list not set; defaulting to 1,16,32,64");
        vec![1, 16, 32, 64]
    });
    if mu_list.is_empty() {
        return Err(CliError::Config("the mu list is empty".to_string()));
    }
    if d_list.is_empty() {
        return Err(CliError::Config("the d list is empty".to_string()));
    }
    mu_list.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    mu_list.dedup();
    d_list.sort_unstable();
    d_list.dedup();
    if mu_list[0] != 0.0 {
        eprintln!("notice: adding mu=0 to the sweep as the autoregressive baseline");
        mu_list.insert(0, 0.0);
    }

    let base = ExperimentConfig {
        model: ModelKind::GaussianDybm,
        d: d_list[0],
        mu: 0.0,
        traces: config::pick("traces", args.traces, file.traces, 1),
        eta0: config::pick("eta0", args.eta0, file.eta0, 0.001),
        steps: config::pick("steps", args.steps, file.steps, 10_000),
        runs: config::pick("runs", args.runs, file.runs, 1),
        mse_window: config::pick("mse_window", args.mse_window, file.mse_window, 100),
        seed: config::pick("seed", args.seed, file.seed, 0),
        period: config::pick("period", args.period, file.period, 100.0),
        amplitude: config::pick("amplitude", args.amplitude, file.amplitude, 1.0),
        noise_std: config::pick("noise_std", args.noise_std, file.noise_std, 1.0),
    };
    let out_dir = args.out_dir.clone().or(file.out_dir.clone()).unwrap_or_else(|| {
        eprintln!("notice: out_dir not set; defaulting to sweep");
        PathBuf::from("sweep")
    });
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", out_dir.display())))?;

    let mut summary_rows = Vec::new();
    let mut curve_files = 0usize;
    for &d in &d_list {
        let mut var_converged = None;
        for &mu in &mu_list {
            let cfg = ExperimentConfig {
                model: if mu == 0.0 {
                    ModelKind::Var
                } else {
                    ModelKind::GaussianDybm
                },
                d,
                mu,
                ..base.clone()
            };
            cfg.validate().map_err(CliError::from)?;
            let records = run_many_with_threads(&cfg, threads)?;
            let averaged = average_runs(&records, cfg.mse_window)?;
            let converged = converged_mse(&averaged, cfg.steps)?;
            if mu == 0.0 {
                var_converged = Some(converged);
            }
            let improvement = match var_converged {
                Some(var) if mu != 0.0 => improvement_vs_var(converged, var),
                _ => 0.0,
            };
            let seconds = records
                .iter()
                .map(RunRecord::seconds_per_1000_steps)
                .sum::<f64>()
                / records.len() as f64;
            let curve_path = out_dir.join(format!("curve_d{d}_mu{mu}.csv"));
            output::write_curve_csv(&curve_path, &averaged)?;
            curve_files += 1;
            summary_rows.push(SummaryRow {
                model: cfg.model,
                d,
                mu,
                runs: cfg.runs,
                steps: cfg.steps,
                converged_mse: converged,
                improvement_vs_var: improvement,
                seconds_per_1000_steps: seconds,
            });
        }
    }

    let timing_rows = measure_timings(&base, &d_list, &mu_list)?;
    output::write_timing_csv(&out_dir.join("timing.csv"), &timing_rows)?;
    output::write_summary_csv(&out_dir.join("summary.csv"), &summary_rows)?;
    println!(
        "sweep: wrote {} curve files, timing.csv, and summary.csv to {}",
        curve_files,
        out_dir.display()
    );
    Ok(())
}

/// Seconds per 1000 learning steps for each delay, measured on a single
/// sequential run per sample with the median of three samples.
fn measure_timings(
    base: &ExperimentConfig,
    d_list: &[usize],
    mu_list: &[f64],
) -> Result<Vec<(usize, f64, f64)>, CliError> {
    let timing_steps = base.steps.max(1000);
    let dybm_mu = mu_list.iter().copied().find(|&mu| mu > 0.0).unwrap_or(0.0);
    let mut rows = Vec::with_capacity(d_list.len());
    for &d in d_list {
        let dybm_cfg = ExperimentConfig {
            model: ModelKind::GaussianDybm,
            d,
            mu: dybm_mu,
            steps: timing_steps,
            runs: 1,
            ..base.clone()
        };
        let var_cfg = ExperimentConfig {
            model: ModelKind::Var,
            mu: 0.0,
            ..dybm_cfg.clone()
        };
        let scale = 1000.0 / timing_steps as f64;
        let dybm_seconds = median_seconds(&dybm_cfg)? * scale;
        let var_seconds = median_seconds(&var_cfg)? * scale;
        rows.push((d, dybm_seconds, var_seconds));
    }
    Ok(rows)
}

fn median_seconds(cfg: &ExperimentConfig) -> Result<f64, CliError> {
    let mut samples = [
        time_per_run(cfg)?,
        time_per_run(cfg)?,
        time_per_run(cfg)?,
    ];
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    Ok(samples[1])
}
