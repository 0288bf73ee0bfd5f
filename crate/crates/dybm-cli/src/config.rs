//! Configuration resolution: TOML file, command-line overrides, defaults.
//!
//! Precedence per key is flag, then config file, then built-in default.
//! Every key filled from a default is reported with a notice on stderr so
//! an invocation's effective configuration is always reconstructible.

use crate::{CliError, ModelArgs};
use dybm::experiment::{ExperimentConfig, ModelKind};
use std::path::{Path, PathBuf};

/// Shape of the TOML config file. Every key is optional; unknown keys are
/// rejected.
#[derive(Debug, Default, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub model: Option<String>,
    pub d: Option<usize>,
    pub mu: Option<f64>,
    pub traces: Option<usize>,
    pub eta0: Option<f64>,
    pub steps: Option<usize>,
    pub runs: Option<usize>,
    pub mse_window: Option<usize>,
    pub seed: Option<u64>,
    pub period: Option<f64>,
    pub amplitude: Option<f64>,
    pub noise_std: Option<f64>,
    pub out: Option<PathBuf>,
    pub summary_out: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub mu_list: Option<Vec<f64>>,
    pub d_list: Option<Vec<usize>>,
    pub out_dir: Option<PathBuf>,
}

pub fn load(path: &Path) -> Result<ConfigFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Config(format!("cannot read config file {}: {e}", path.display()))
    })?;
    toml::from_str(&text)
        .map_err(|e| CliError::Config(format!("config file {}: {e}", path.display())))
}

pub fn load_optional(path: Option<&PathBuf>) -> Result<ConfigFile, CliError> {
    match path {
        Some(path) => load(path),
        None => Ok(ConfigFile::default()),
    }
}

pub fn notice_default<T: std::fmt::Display>(key: &str, value: T) -> T {
    eprintln!("notice: {key} not set; defaulting to {value}");
    value
}

pub fn pick<T: std::fmt::Display + Copy>(
    key: &str,
    flag: Option<T>,
    file: Option<T>,
    default: T,
) -> T {
    flag.or(file).unwrap_or_else(|| notice_default(key, default))
}

pub fn parse_model(raw: Option<&str>) -> Result<Option<ModelKind>, CliError> {
    match raw {
        None => Ok(None),
        Some(raw) => raw
            .parse::<ModelKind>()
            .map(Some)
            .map_err(|e| CliError::Config(e.to_string())),
    }
}

/// Merges flags, config file, and defaults into a validated experiment
/// configuration. `d` has no default; the caller resolves it first so each
/// subcommand can point at its own usage text.
pub fn resolve_experiment(
    args: &ModelArgs,
    file: &ConfigFile,
    d: usize,
) -> Result<ExperimentConfig, CliError> {
    let model = match parse_model(args.model.as_deref())? {
        Some(kind) => kind,
        None => match parse_model(file.model.as_deref())? {
            Some(kind) => kind,
            None => {
                eprintln!("notice: model not set; defaulting to gaussian-dybm");
                ModelKind::GaussianDybm
            }
        },
    };
    // A var model is the mu = 0 special case, so its default decay is 0.
    let mu_default = match model {
        ModelKind::GaussianDybm => 0.5,
        ModelKind::Var => 0.0,
    };
    let config = ExperimentConfig {
        model,
        d,
        mu: pick("mu", args.mu, file.mu, mu_default),
        traces: pick("traces", args.traces, file.traces, 1),
        eta0: pick("eta0", args.eta0, file.eta0, 0.001),
        steps: pick("steps", args.steps, file.steps, 10_000),
        runs: pick("runs", args.runs, file.runs, 1),
        mse_window: pick("mse_window", args.mse_window, file.mse_window, 100),
        seed: pick("seed", args.seed, file.seed, 0),
        period: pick("period", args.period, file.period, 100.0),
        amplitude: pick("amplitude", args.amplitude, file.amplitude, 1.0),
        noise_std: pick("noise_std", args.noise_std, file.noise_std, 1.0),
    };
    config.validate().map_err(CliError::from)?;
    Ok(config)
}
