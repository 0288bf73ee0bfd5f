//! Online noisy-sine experiments.
//!
//! The harness reproduces the classic comparison between a Gaussian DyBM
//! and a vector autoregression of the same order: both observe a noisy sine
//! one value at a time, predict the next value before seeing it, and learn
//! online by natural gradient with AdaGrad step sizes. Because the noise is
//! standard Gaussian, no predictor can push the expected one-step squared
//! error below 1; what distinguishes models is how closely and how quickly
//! they approach that floor.
//!
//! Runs are embarrassingly parallel: each owns its model, optimizer, and
//! generator stream, derived from the master seed by the run index, and the
//! results are merged in run order. [`run_many`] distributes runs over a
//! rayon pool when the `parallel` feature is enabled (the default);
//! [`run_many_serial`] is the sequential fallback and produces identical
//! records.

use crate::error::{DybmError, Result};
use crate::gaussian::TraceVar;
use crate::optimizer::AdaGrad;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::time::Instant;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Which model family a run trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum ModelKind {
    /// Gaussian DyBM: lag weights plus a decaying trace regressor.
    GaussianDybm,
    /// Plain vector autoregression, the zero-decay special case.
    Var,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::GaussianDybm => "gaussian-dybm",
            ModelKind::Var => "var",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = DybmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian-dybm" => Ok(ModelKind::GaussianDybm),
            "var" => Ok(ModelKind::Var),
            other => Err(DybmError::InvalidParameter(format!(
                "unknown model kind {other:?} (expected gaussian-dybm or var)"
            ))),
        }
    }
}

/// Parameters of the noisy sine target
/// `x^[t] = amplitude * sin(2 pi t / period) + noise`, `t = 1, 2, ...`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoisySineSpec {
    pub period: f64,
    pub amplitude: f64,
    /// Standard deviation of the additive Gaussian noise.
    pub noise_std: f64,
    /// Master seed; independent streams are derived from it per run.
    pub seed: u64,
}

impl Default for NoisySineSpec {
    fn default() -> Self {
        NoisySineSpec {
            period: 100.0,
            amplitude: 1.0,
            noise_std: 1.0,
            seed: 0,
        }
    }
}

impl NoisySineSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.period > 0.0) || !self.period.is_finite() {
            return Err(DybmError::InvalidParameter(format!(
                "sine period must be positive, got {}",
                self.period
            )));
        }
        if !self.amplitude.is_finite() {
            return Err(DybmError::InvalidParameter(
                "sine amplitude must be finite".to_string(),
            ));
        }
        if !(self.noise_std >= 0.0) || !self.noise_std.is_finite() {
            return Err(DybmError::InvalidParameter(format!(
                "noise standard deviation must be non-negative, got {}",
                self.noise_std
            )));
        }
        Ok(())
    }

    /// Noise-free target value at step `t >= 1`.
    pub fn clean(&self, t: u64) -> f64 {
        self.amplitude * (std::f64::consts::TAU * t as f64 / self.period).sin()
    }
}

/// Seeded stream of noisy-sine values.
///
/// Stream `k` of a given master seed is statistically independent of every
/// other stream, so concurrent runs never share generator state.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SineStream {
    spec: NoisySineSpec,
    rng: ChaCha8Rng,
    t: u64,
}

impl SineStream {
    pub fn new(spec: NoisySineSpec, stream: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(stream);
        Ok(SineStream { spec, rng, t: 0 })
    }

    /// Step index of the most recently emitted value.
    pub fn step(&self) -> u64 {
        self.t
    }

    pub fn spec(&self) -> &NoisySineSpec {
        &self.spec
    }

    /// Emits `x^[t]` for the next `t`.
    pub fn next_value(&mut self) -> f64 {
        self.t += 1;
        let eps: f64 = StandardNormal.sample(&mut self.rng);
        self.spec.clean(self.t) + self.spec.noise_std * eps
    }

    /// Emits the next `count` values.
    pub fn take_values(&mut self, count: usize) -> Vec<f64> {
        (0..count).map(|_| self.next_value()).collect()
    }
}

/// Full description of one experiment: model shape, training setup, data.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExperimentConfig {
    pub model: ModelKind,
    /// Conduction delay of the trained model.
    pub d: usize,
    /// Trace decay rate; must be 0 for the VAR kind.
    pub mu: f64,
    /// Number of trace regressors (all with decay `mu`).
    pub traces: usize,
    /// AdaGrad base learning rate.
    pub eta0: f64,
    pub steps: usize,
    pub runs: usize,
    /// Width of the centered rolling-MSE window.
    pub mse_window: usize,
    /// Master seed for the per-run data streams.
    pub seed: u64,
    pub period: f64,
    pub amplitude: f64,
    pub noise_std: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: ModelKind::GaussianDybm,
            d: 1,
            mu: 0.5,
            traces: 1,
            eta0: 0.001,
            steps: 10_000,
            runs: 1,
            mse_window: 100,
            seed: 0,
            period: 100.0,
            amplitude: 1.0,
            noise_std: 1.0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(DybmError::InvalidParameter(
                "conduction delay d must be at least 1".to_string(),
            ));
        }
        if !(0.0..1.0).contains(&self.mu) {
            return Err(DybmError::InvalidParameter(format!(
                "trace decay mu must be in [0, 1), got {}",
                self.mu
            )));
        }
        if self.model == ModelKind::Var && self.mu != 0.0 {
            return Err(DybmError::InvalidParameter(format!(
                "the var model has no trace decay; remove mu = {} or use gaussian-dybm",
                self.mu
            )));
        }
        if self.traces == 0 {
            return Err(DybmError::InvalidParameter(
                "at least one trace regressor is required".to_string(),
            ));
        }
        if !self.eta0.is_finite() || self.eta0 < 0.0 {
            return Err(DybmError::InvalidParameter(format!(
                "eta0 must be finite and non-negative, got {}",
                self.eta0
            )));
        }
        if self.runs == 0 {
            return Err(DybmError::InvalidParameter(
                "at least one run is required".to_string(),
            ));
        }
        if self.mse_window < 2 {
            return Err(DybmError::InvalidParameter(
                "the rolling window needs at least 2 steps".to_string(),
            ));
        }
        if self.steps <= self.mse_window {
            return Err(DybmError::InvalidParameter(format!(
                "steps ({}) must exceed the rolling window ({})",
                self.steps, self.mse_window
            )));
        }
        self.sine_spec().validate()
    }

    pub fn sine_spec(&self) -> NoisySineSpec {
        NoisySineSpec {
            period: self.period,
            amplitude: self.amplitude,
            noise_std: self.noise_std,
            seed: self.seed,
        }
    }

    /// Fresh scalar model of the configured kind: zero weights, unit
    /// variance. The VAR kind is the same family with the trace decay
    /// pinned to zero.
    pub fn build_model(&self) -> Result<TraceVar> {
        let mu = match self.model {
            ModelKind::GaussianDybm => self.mu,
            ModelKind::Var => 0.0,
        };
        TraceVar::new(1, self.d, vec![mu; self.traces])
    }
}

/// Everything one run produced.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunRecord {
    pub run: usize,
    pub targets: Vec<f64>,
    pub predictions: Vec<f64>,
    pub sq_errors: Vec<f64>,
    /// Wall-clock seconds spent in the learning loop, excluding data
    /// generation.
    pub learn_seconds: f64,
}

impl RunRecord {
    pub fn steps(&self) -> usize {
        self.targets.len()
    }

    pub fn seconds_per_1000_steps(&self) -> f64 {
        self.learn_seconds * 1000.0 / self.steps() as f64
    }
}

/// Online natural-gradient learner: a [`TraceVar`] model, its history
/// state, and an AdaGrad optimizer advancing together one observation at a
/// time.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OnlineLearner {
    model: TraceVar,
    state: crate::gaussian::TraceVarState,
    optimizer: AdaGrad,
    step: u64,
    #[cfg_attr(feature = "serde", serde(skip))]
    direction: Vec<f64>,
}

impl OnlineLearner {
    pub fn new(model: TraceVar, eta0: f64) -> Result<Self> {
        let optimizer = AdaGrad::new(model.param_count(), eta0)?;
        let state = model.state();
        let direction = vec![0.0; model.param_count()];
        Ok(OnlineLearner {
            model,
            state,
            optimizer,
            step: 0,
            direction,
        })
    }

    pub fn from_parts(
        model: TraceVar,
        state: crate::gaussian::TraceVarState,
        optimizer: AdaGrad,
        step: u64,
    ) -> Result<Self> {
        if optimizer.len() != model.param_count() {
            return Err(DybmError::DimensionMismatch {
                what: "optimizer state",
                expected: model.param_count(),
                actual: optimizer.len(),
            });
        }
        let direction = vec![0.0; model.param_count()];
        Ok(OnlineLearner {
            model,
            state,
            optimizer,
            step,
            direction,
        })
    }

    pub fn model(&self) -> &TraceVar {
        &self.model
    }

    pub fn state(&self) -> &crate::gaussian::TraceVarState {
        &self.state
    }

    pub fn optimizer(&self) -> &AdaGrad {
        &self.optimizer
    }

    /// Number of observations consumed so far.
    pub fn step(&self) -> u64 {
        self.step
    }

    /// Prediction of the next observation from the current state.
    pub fn predict(&self) -> Vec<f64> {
        self.model.predict(&self.state)
    }

    /// Consumes one observation: updates the parameters along the
    /// AdaGrad-scaled natural gradient computed from the pre-update
    /// prediction `mean`, then advances the history state.
    pub fn observe_with_mean(&mut self, x: &[f64], mean: &[f64]) -> Result<()> {
        if self.direction.len() != self.model.param_count() {
            self.direction.resize(self.model.param_count(), 0.0);
        }
        self.model
            .natural_direction(&self.state, mean, x, &mut self.direction)?;
        let current = self.step + 1;
        self.optimizer
            .scale_in_place(&mut self.direction)
            .map_err(|e| stamp_step(e, current))?;
        self.model.apply_step(&self.direction)?;
        self.model.advance(&mut self.state, x)?;
        self.step = current;
        Ok(())
    }

    /// Convenience wrapper around [`OnlineLearner::observe_with_mean`].
    pub fn observe(&mut self, x: &[f64]) -> Result<()> {
        let mean = self.model.predict(&self.state);
        self.observe_with_mean(x, &mean)
    }
}

fn stamp_step(e: DybmError, step: u64) -> DybmError {
    match e {
        DybmError::NonFinite { what, step: None } => DybmError::NonFinite {
            what,
            step: Some(step),
        },
        other => other,
    }
}

fn stamp_run(e: DybmError, run: usize) -> DybmError {
    match e {
        DybmError::NonFinite { what, step } => DybmError::NonFinite {
            what: format!("{what} (run {run})"),
            step,
        },
        other => other,
    }
}

/// Trains one run on its own generator stream and returns the full record.
///
/// The loop predicts `m^[t]` before consuming `x^[t]`, records the squared
/// error, then updates the parameters and state. Timing covers the learning
/// loop only; the data is generated up front.
pub fn run_online(config: &ExperimentConfig, run_index: usize) -> Result<RunRecord> {
    config.validate()?;
    let model = config.build_model()?;
    let mut stream = SineStream::new(config.sine_spec(), run_index as u64)?;
    let data = stream.take_values(config.steps);
    let mut learner = OnlineLearner::new(model, config.eta0)?;
    run_scalar_loop(&mut learner, &data, run_index)
}

fn run_scalar_loop(
    learner: &mut OnlineLearner,
    data: &[f64],
    run_index: usize,
) -> Result<RunRecord> {
    let steps = data.len();
    let mut targets = Vec::with_capacity(steps);
    let mut predictions = Vec::with_capacity(steps);
    let mut sq_errors = Vec::with_capacity(steps);
    let start = Instant::now();
    let mut mean = [0.0f64];
    let mut x_buf = [0.0f64];
    for (k, &x) in data.iter().enumerate() {
        let m = learner.predict()[0];
        if !m.is_finite() {
            return Err(DybmError::NonFinite {
                what: format!("prediction (run {run_index})"),
                step: Some(k as u64 + 1),
            });
        }
        let r = x - m;
        targets.push(x);
        predictions.push(m);
        sq_errors.push(r * r);
        mean[0] = m;
        x_buf[0] = x;
        learner
            .observe_with_mean(&x_buf, &mean)
            .map_err(|e| stamp_run(e, run_index))?;
    }
    let learn_seconds = start.elapsed().as_secs_f64();
    Ok(RunRecord {
        run: run_index,
        targets,
        predictions,
        sq_errors,
        learn_seconds,
    })
}

/// Trains one run per stream on multi-column data instead of the synthetic
/// sine. Per-step scalars are reported for the first column; the squared
/// error sums over columns.
pub fn run_online_data(config: &ExperimentConfig, data: &[Vec<f64>]) -> Result<RunRecord> {
    if data.is_empty() {
        return Err(DybmError::InvalidParameter(
            "data must contain at least one row".to_string(),
        ));
    }
    let n = data[0].len();
    if n == 0 {
        return Err(DybmError::InvalidParameter(
            "data rows must contain at least one column".to_string(),
        ));
    }
    if let Some(bad) = data.iter().find(|row| row.len() != n) {
        return Err(DybmError::DimensionMismatch {
            what: "data row",
            expected: n,
            actual: bad.len(),
        });
    }
    if data.len() <= config.mse_window {
        return Err(DybmError::InvalidParameter(format!(
            "data length ({}) must exceed the rolling window ({})",
            data.len(),
            config.mse_window
        )));
    }
    let mu = match config.model {
        ModelKind::GaussianDybm => config.mu,
        ModelKind::Var => 0.0,
    };
    let model = TraceVar::new(n, config.d, vec![mu; config.traces])?;
    let mut learner = OnlineLearner::new(model, config.eta0)?;

    let steps = data.len();
    let mut targets = Vec::with_capacity(steps);
    let mut predictions = Vec::with_capacity(steps);
    let mut sq_errors = Vec::with_capacity(steps);
    let start = Instant::now();
    for (k, x) in data.iter().enumerate() {
        let mean = learner.predict();
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(DybmError::NonFinite {
                what: "prediction (run 0)".to_string(),
                step: Some(k as u64 + 1),
            });
        }
        let sq: f64 = x
            .iter()
            .zip(&mean)
            .map(|(&x_j, &m_j)| (x_j - m_j) * (x_j - m_j))
            .sum();
        targets.push(x[0]);
        predictions.push(mean[0]);
        sq_errors.push(sq);
        learner
            .observe_with_mean(x, &mean)
            .map_err(|e| stamp_run(e, 0))?;
    }
    let learn_seconds = start.elapsed().as_secs_f64();
    Ok(RunRecord {
        run: 0,
        targets,
        predictions,
        sq_errors,
        learn_seconds,
    })
}

/// Runs `config.runs` independent runs and merges the records by run index.
/// Uses the rayon pool when the `parallel` feature is on, otherwise falls
/// back to [`run_many_serial`].
pub fn run_many(config: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    run_many_with_threads(config, None)
}

/// Like [`run_many`] with an explicit cap on worker threads. `None` uses
/// the machine's available parallelism.
pub fn run_many_with_threads(
    config: &ExperimentConfig,
    threads: Option<usize>,
) -> Result<Vec<RunRecord>> {
    config.validate()?;
    #[cfg(feature = "parallel")]
    {
        let work = || {
            (0..config.runs)
                .into_par_iter()
                .map(|run| run_online(config, run))
                .collect::<Result<Vec<RunRecord>>>()
        };
        match threads {
            Some(count) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(count.max(1))
                    .build()
                    .map_err(|e| {
                        DybmError::InvalidParameter(format!("thread pool: {e}"))
                    })?;
                pool.install(work)
            }
            None => work(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        run_many_serial(config)
    }
}

/// Sequential equivalent of [`run_many`]; identical records, one run at a
/// time.
pub fn run_many_serial(config: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    config.validate()?;
    (0..config.runs).map(|run| run_online(config, run)).collect()
}

/// Mean of the squared errors in the centered window around 1-based step
/// `t`: steps `t - window/2` through `t + window/2 - 1` inclusive.
pub fn rolling_mse(sq_errors: &[f64], t: usize, window: usize) -> Result<f64> {
    if window < 2 {
        return Err(DybmError::InvalidParameter(
            "the rolling window needs at least 2 steps".to_string(),
        ));
    }
    let half = window / 2;
    if t <= half {
        return Err(DybmError::OutOfRange(format!(
            "step {t} is too close to the start for a window of {window}"
        )));
    }
    let lo = t - half;
    let hi = lo + window - 1;
    if hi > sq_errors.len() {
        return Err(DybmError::OutOfRange(format!(
            "step {t} is too close to the end for a window of {window} over {} steps",
            sq_errors.len()
        )));
    }
    Ok(sq_errors[lo - 1..hi].iter().sum::<f64>() / window as f64)
}

/// Rolling MSE evaluated at every admissible step.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MseCurve {
    /// 1-based step of the first curve value.
    pub first_step: usize,
    pub values: Vec<f64>,
}

impl MseCurve {
    pub fn last_step(&self) -> usize {
        self.first_step + self.values.len() - 1
    }

    /// Curve value at 1-based step `t`, if the window around `t` fit.
    pub fn value_at(&self, t: usize) -> Option<f64> {
        if t < self.first_step || t > self.last_step() {
            return None;
        }
        Some(self.values[t - self.first_step])
    }
}

/// Rolling MSE over the whole admissible range of `sq_errors`.
pub fn rolling_mse_curve(sq_errors: &[f64], window: usize) -> Result<MseCurve> {
    if window < 2 {
        return Err(DybmError::InvalidParameter(
            "the rolling window needs at least 2 steps".to_string(),
        ));
    }
    if sq_errors.len() < window {
        return Err(DybmError::OutOfRange(format!(
            "{} steps cannot fill a window of {window}",
            sq_errors.len()
        )));
    }
    let half = window / 2;
    let first_step = half + 1;
    // Slide the window with a running sum; one pass over the data.
    let mut sum: f64 = sq_errors[..window].iter().sum();
    let mut values = Vec::with_capacity(sq_errors.len() - window + 1);
    values.push(sum / window as f64);
    for k in window..sq_errors.len() {
        sum += sq_errors[k] - sq_errors[k - window];
        values.push(sum / window as f64);
    }
    Ok(MseCurve { first_step, values })
}

/// Pointwise average of the runs' rolling-MSE curves. Rolling is linear,
/// so this averages the squared errors across runs in run order and rolls
/// once.
pub fn average_runs(records: &[RunRecord], window: usize) -> Result<MseCurve> {
    if records.is_empty() {
        return Err(DybmError::InvalidParameter(
            "at least one run record is required".to_string(),
        ));
    }
    let steps = records[0].sq_errors.len();
    for record in records {
        if record.sq_errors.len() != steps {
            return Err(DybmError::DimensionMismatch {
                what: "run record length",
                expected: steps,
                actual: record.sq_errors.len(),
            });
        }
    }
    let mut mean_sq = vec![0.0; steps];
    for record in records {
        for (acc, &e) in mean_sq.iter_mut().zip(&record.sq_errors) {
            *acc += e;
        }
    }
    let count = records.len() as f64;
    for acc in &mut mean_sq {
        *acc /= count;
    }
    rolling_mse_curve(&mean_sq, window)
}

/// Mean of the curve over the final tenth of the run, the "converged" MSE.
pub fn converged_mse(curve: &MseCurve, steps: usize) -> Result<f64> {
    let cutoff = steps - steps / 10;
    let from = curve.first_step.max(cutoff + 1);
    if from > curve.last_step() {
        return Err(DybmError::OutOfRange(format!(
            "no curve values after step {cutoff} (curve ends at {})",
            curve.last_step()
        )));
    }
    let values = &curve.values[from - curve.first_step..];
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Wall-clock seconds of one learning run, excluding data generation.
pub fn time_per_run(config: &ExperimentConfig) -> Result<f64> {
    if config.steps < 1000 {
        return Err(DybmError::InvalidParameter(format!(
            "timing wants at least 1000 steps, got {}",
            config.steps
        )));
    }
    Ok(run_online(config, 0)?.learn_seconds)
}
