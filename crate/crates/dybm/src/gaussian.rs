//! Gaussian DyBMs: real-valued time series with per-unit variances.
//!
//! The conditional distribution of the current pattern given recent history
//! is an independent Gaussian per unit. The mean is the same affine readout
//! a binary DyBM uses for its logit; the variance is a learned per-unit
//! parameter. Two closely related model families live here:
//!
//! - [`GaussianDybm`]: the general form whose features are the delay-line
//!   slots and a bank of synaptic eligibility traces, trained by plain
//!   gradient ascent ([`GaussianDybm::sgd_step`]) or natural gradient ascent
//!   ([`GaussianDybm::natural_gradient_step`]) on the log density.
//! - [`TraceVar`]: the autoregressive variant used by the experiment
//!   harness. Its trace accumulates the patterns evicted from the delay
//!   line without decaying them on arrival, so with decay zero the trace is
//!   exactly the lag-`d` value and the model coincides with a vector
//!   autoregression of order `d` ([`var_baseline`]).
//!
//! Variances are floored at [`VARIANCE_FLOOR`] after every update so the
//! log density stays defined no matter how aggressive the step.

use crate::error::{DybmError, Result};
use crate::trace::{DelayLine, LagTraceState};

/// Smallest admissible per-unit variance.
pub const VARIANCE_FLOOR: f64 = 1e-8;

fn ln_2pi() -> f64 {
    std::f64::consts::TAU.ln()
}

/// Sum of per-unit Gaussian log densities of `x` under means `mean` and
/// variances `variance`.
pub fn gaussian_log_density(x: &[f64], mean: &[f64], variance: &[f64]) -> Result<f64> {
    if x.len() != mean.len() || x.len() != variance.len() {
        return Err(DybmError::DimensionMismatch {
            what: "log density pattern",
            expected: mean.len(),
            actual: x.len(),
        });
    }
    let mut total = 0.0;
    for ((&x_j, &m_j), &v_j) in x.iter().zip(mean).zip(variance) {
        if v_j <= 0.0 {
            return Err(DybmError::InvalidParameter(format!(
                "variance must be positive, got {v_j}"
            )));
        }
        let r = x_j - m_j;
        total += -r * r / (2.0 * v_j) - 0.5 * v_j.ln() - 0.5 * ln_2pi();
    }
    Ok(total)
}

/// Gaussian DyBM in the general lag-plus-trace form.
///
/// Weight matrices are flat row-major `n x n`, entry `[i * n + j]` coupling
/// input unit `i` to output unit `j`. New models start with all weights at
/// zero and unit variances.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GaussianDybm {
    n: usize,
    d: usize,
    bias: Vec<f64>,
    lag_weights: Vec<Vec<f64>>,
    trace_weights: Vec<Vec<f64>>,
    variance: Vec<f64>,
    decays: Vec<f64>,
}

impl GaussianDybm {
    /// Zero-weight model with unit variances.
    pub fn new(n: usize, d: usize, decays: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(DybmError::InvalidParameter(
                "conduction delay d must be at least 1".to_string(),
            ));
        }
        let lag_weights = vec![vec![0.0; n * n]; d - 1];
        let trace_weights = vec![vec![0.0; n * n]; decays.len()];
        Self::from_parts(
            vec![0.0; n],
            lag_weights,
            trace_weights,
            vec![1.0; n],
            decays,
            d,
        )
    }

    pub fn from_parts(
        bias: Vec<f64>,
        lag_weights: Vec<Vec<f64>>,
        trace_weights: Vec<Vec<f64>>,
        variance: Vec<f64>,
        decays: Vec<f64>,
        d: usize,
    ) -> Result<Self> {
        let n = bias.len();
        if n == 0 {
            return Err(DybmError::InvalidParameter(
                "model needs at least one unit".to_string(),
            ));
        }
        if d == 0 {
            return Err(DybmError::InvalidParameter(
                "conduction delay d must be at least 1".to_string(),
            ));
        }
        if lag_weights.len() != d - 1 {
            return Err(DybmError::DimensionMismatch {
                what: "lag weight matrices",
                expected: d - 1,
                actual: lag_weights.len(),
            });
        }
        if trace_weights.len() != decays.len() {
            return Err(DybmError::DimensionMismatch {
                what: "trace weight matrices",
                expected: decays.len(),
                actual: trace_weights.len(),
            });
        }
        for w in lag_weights.iter().chain(&trace_weights) {
            if w.len() != n * n {
                return Err(DybmError::DimensionMismatch {
                    what: "weight matrix",
                    expected: n * n,
                    actual: w.len(),
                });
            }
        }
        if variance.len() != n {
            return Err(DybmError::DimensionMismatch {
                what: "variance",
                expected: n,
                actual: variance.len(),
            });
        }
        if variance.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
            return Err(DybmError::InvalidParameter(
                "variances must be positive and finite".to_string(),
            ));
        }
        for &decay in &decays {
            if !(0.0..1.0).contains(&decay) {
                return Err(DybmError::InvalidParameter(format!(
                    "trace decay must be in [0, 1), got {decay}"
                )));
            }
        }
        Ok(GaussianDybm {
            n,
            d,
            bias,
            lag_weights,
            trace_weights,
            variance,
            decays,
        })
    }

    pub fn units(&self) -> usize {
        self.n
    }

    pub fn delay(&self) -> usize {
        self.d
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn lag_weights(&self) -> &[Vec<f64>] {
        &self.lag_weights
    }

    pub fn trace_weights(&self) -> &[Vec<f64>] {
        &self.trace_weights
    }

    pub fn variance(&self) -> &[f64] {
        &self.variance
    }

    pub fn decays(&self) -> &[f64] {
        &self.decays
    }

    /// Fresh all-zero history state for this model.
    pub fn state(&self) -> LagTraceState {
        LagTraceState::zeros(self.d, self.n, &self.decays).expect("validated by the model")
    }

    /// Conditional mean per unit given the current state.
    pub fn predict(&self, state: &LagTraceState) -> Result<Vec<f64>> {
        self.check_state(state)?;
        let n = self.n;
        let mut m = self.bias.clone();
        for (w, slot) in self.lag_weights.iter().zip(state.line().slots()) {
            for i in 0..n {
                let x_i = slot[i];
                if x_i == 0.0 {
                    continue;
                }
                for j in 0..n {
                    m[j] += w[i * n + j] * x_i;
                }
            }
        }
        for (u, trace) in self.trace_weights.iter().zip(state.traces()) {
            let a = trace.values();
            for i in 0..n {
                let a_i = a[i];
                for j in 0..n {
                    m[j] += u[i * n + j] * a_i;
                }
            }
        }
        Ok(m)
    }

    /// Log density of observing `x` in the current state.
    pub fn log_density(&self, state: &LagTraceState, x: &[f64]) -> Result<f64> {
        let m = self.predict(state)?;
        gaussian_log_density(x, &m, &self.variance)
    }

    /// One step of gradient ascent on the log density with rate `eta`.
    ///
    /// Mean parameters move along the raw gradient, which carries a
    /// `1 / variance` factor. The spread is updated through the standard
    /// deviation: `sigma += eta * (r^2 / sigma^2 - 1) / sigma`, then the
    /// variance is re-squared and floored.
    pub fn sgd_step(&mut self, state: &LagTraceState, x: &[f64], eta: f64) -> Result<()> {
        let m = self.predict(state)?;
        if x.len() != self.n {
            return Err(DybmError::DimensionMismatch {
                what: "training pattern",
                expected: self.n,
                actual: x.len(),
            });
        }
        let n = self.n;
        let scaled: Vec<f64> = x
            .iter()
            .zip(&m)
            .zip(&self.variance)
            .map(|((&x_j, &m_j), &v_j)| (x_j - m_j) / v_j)
            .collect();
        for j in 0..n {
            self.bias[j] += eta * scaled[j];
        }
        for (w, slot) in self.lag_weights.iter_mut().zip(state.line().slots()) {
            for i in 0..n {
                for j in 0..n {
                    w[i * n + j] += eta * slot[i] * scaled[j];
                }
            }
        }
        for (u, trace) in self.trace_weights.iter_mut().zip(state.traces()) {
            let a = trace.values();
            for i in 0..n {
                for j in 0..n {
                    u[i * n + j] += eta * a[i] * scaled[j];
                }
            }
        }
        for j in 0..n {
            let r = x[j] - m[j];
            let sigma = self.variance[j].sqrt();
            let new_sigma = sigma + eta * (r * r / self.variance[j] - 1.0) / sigma;
            self.variance[j] = (new_sigma * new_sigma).max(VARIANCE_FLOOR);
        }
        Ok(())
    }

    /// One step of natural gradient ascent on the log density with rate
    /// `eta`: the raw gradient preconditioned by the inverse Fisher metric,
    /// `diag(variance)` for each unit's mean parameters and `2 variance^2`
    /// for the variance itself.
    ///
    /// ```text
    /// b_j      += eta r_j
    /// w_ij     += eta r_j feature_i
    /// var_j    += eta (r_j^2 - var_j)
    /// ```
    pub fn natural_gradient_step(
        &mut self,
        state: &LagTraceState,
        x: &[f64],
        eta: f64,
    ) -> Result<()> {
        let m = self.predict(state)?;
        if x.len() != self.n {
            return Err(DybmError::DimensionMismatch {
                what: "training pattern",
                expected: self.n,
                actual: x.len(),
            });
        }
        let n = self.n;
        let residual: Vec<f64> = x.iter().zip(&m).map(|(&x_j, &m_j)| x_j - m_j).collect();
        for j in 0..n {
            self.bias[j] += eta * residual[j];
        }
        for (w, slot) in self.lag_weights.iter_mut().zip(state.line().slots()) {
            for i in 0..n {
                for j in 0..n {
                    w[i * n + j] += eta * slot[i] * residual[j];
                }
            }
        }
        for (u, trace) in self.trace_weights.iter_mut().zip(state.traces()) {
            let a = trace.values();
            for i in 0..n {
                for j in 0..n {
                    u[i * n + j] += eta * a[i] * residual[j];
                }
            }
        }
        for j in 0..n {
            let r = residual[j];
            self.variance[j] =
                (self.variance[j] + eta * (r * r - self.variance[j])).max(VARIANCE_FLOOR);
        }
        Ok(())
    }

    fn check_state(&self, state: &LagTraceState) -> Result<()> {
        if state.line().width() != self.n
            || state.line().delay() != self.d
            || state.traces().len() != self.decays.len()
        {
            return Err(DybmError::InvalidParameter(
                "state does not match model dimensions".to_string(),
            ));
        }
        Ok(())
    }
}

/// Autoregressive Gaussian DyBM whose trace is an arrival accumulator.
///
/// The conditional mean is
///
/// ```text
/// m_j = b_j + sum_delta sum_i w[delta]_ij x_i^[t-delta] + sum_l sum_i v[l]_ij g[l]_i
/// ```
///
/// where each trace `g[l]` absorbs the pattern evicted from the delay line
/// at full strength, `g <- mu_l g + evicted`. With `mu = 0` the trace holds
/// exactly the lag-`d` pattern and the model is a vector autoregression of
/// order `d`; positive `mu` blends all older history into that slot.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraceVar {
    n: usize,
    d: usize,
    bias: Vec<f64>,
    lag_weights: Vec<Vec<f64>>,
    trace_weights: Vec<Vec<f64>>,
    variance: Vec<f64>,
    decays: Vec<f64>,
}

/// History state of a [`TraceVar`]: the delay line plus one arrival
/// accumulator per trace.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraceVarState {
    line: DelayLine,
    gammas: Vec<Vec<f64>>,
    #[cfg_attr(feature = "serde", serde(skip))]
    scratch: Vec<f64>,
}

impl TraceVarState {
    pub fn line(&self) -> &DelayLine {
        &self.line
    }

    pub fn gammas(&self) -> &[Vec<f64>] {
        &self.gammas
    }

    pub fn from_parts(line: DelayLine, gammas: Vec<Vec<f64>>) -> Result<Self> {
        let n = line.width();
        for g in &gammas {
            if g.len() != n {
                return Err(DybmError::DimensionMismatch {
                    what: "trace accumulator width",
                    expected: n,
                    actual: g.len(),
                });
            }
        }
        Ok(TraceVarState {
            line,
            gammas,
            scratch: vec![0.0; n],
        })
    }
}

/// One step of the arrival-accumulator recursion for a single component.
pub fn gamma_experiment_update(gamma: f64, mu: f64, arriving: f64) -> f64 {
    mu * gamma + arriving
}

impl TraceVar {
    /// Zero-weight model with unit variances, one trace per decay in
    /// `decays`. Decays must lie in `[0, 1)`.
    pub fn new(n: usize, d: usize, decays: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(DybmError::InvalidParameter(
                "model needs at least one unit".to_string(),
            ));
        }
        if d == 0 {
            return Err(DybmError::InvalidParameter(
                "conduction delay d must be at least 1".to_string(),
            ));
        }
        for &mu in &decays {
            if !(0.0..1.0).contains(&mu) {
                return Err(DybmError::InvalidParameter(format!(
                    "trace decay must be in [0, 1), got {mu}"
                )));
            }
        }
        let lag_weights = vec![vec![0.0; n * n]; d - 1];
        let trace_weights = vec![vec![0.0; n * n]; decays.len()];
        Ok(TraceVar {
            n,
            d,
            bias: vec![0.0; n],
            lag_weights,
            trace_weights,
            variance: vec![1.0; n],
            decays,
        })
    }

    /// Single-unit model with one trace, the shape used by the noisy-sine
    /// experiments.
    pub fn scalar(d: usize, mu: f64) -> Result<Self> {
        Self::new(1, d, vec![mu])
    }

    pub fn units(&self) -> usize {
        self.n
    }

    pub fn delay(&self) -> usize {
        self.d
    }

    pub fn decays(&self) -> &[f64] {
        &self.decays
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn lag_weights(&self) -> &[Vec<f64>] {
        &self.lag_weights
    }

    pub fn trace_weights(&self) -> &[Vec<f64>] {
        &self.trace_weights
    }

    pub fn variance(&self) -> &[f64] {
        &self.variance
    }

    pub fn set_lag_weight(&mut self, delta: usize, i: usize, j: usize, value: f64) {
        self.lag_weights[delta - 1][i * self.n + j] = value;
    }

    pub fn set_trace_weight(&mut self, l: usize, i: usize, j: usize, value: f64) {
        self.trace_weights[l][i * self.n + j] = value;
    }

    pub fn set_bias(&mut self, j: usize, value: f64) {
        self.bias[j] = value;
    }

    pub fn from_parts(
        bias: Vec<f64>,
        lag_weights: Vec<Vec<f64>>,
        trace_weights: Vec<Vec<f64>>,
        variance: Vec<f64>,
        decays: Vec<f64>,
        d: usize,
    ) -> Result<Self> {
        let mut model = Self::new(bias.len(), d, decays)?;
        if lag_weights.len() != d - 1 {
            return Err(DybmError::DimensionMismatch {
                what: "lag weight matrices",
                expected: d - 1,
                actual: lag_weights.len(),
            });
        }
        if trace_weights.len() != model.decays.len() {
            return Err(DybmError::DimensionMismatch {
                what: "trace weight matrices",
                expected: model.decays.len(),
                actual: trace_weights.len(),
            });
        }
        let nn = model.n * model.n;
        for w in lag_weights.iter().chain(&trace_weights) {
            if w.len() != nn {
                return Err(DybmError::DimensionMismatch {
                    what: "weight matrix",
                    expected: nn,
                    actual: w.len(),
                });
            }
        }
        if variance.len() != model.n {
            return Err(DybmError::DimensionMismatch {
                what: "variance",
                expected: model.n,
                actual: variance.len(),
            });
        }
        if variance.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
            return Err(DybmError::InvalidParameter(
                "variances must be positive and finite".to_string(),
            ));
        }
        model.bias = bias;
        model.lag_weights = lag_weights;
        model.trace_weights = trace_weights;
        model.variance = variance;
        Ok(model)
    }

    /// Fresh all-zero history state.
    pub fn state(&self) -> TraceVarState {
        TraceVarState {
            line: DelayLine::zeros(self.d, self.n).expect("validated by the model"),
            gammas: vec![vec![0.0; self.n]; self.decays.len()],
            scratch: vec![0.0; self.n],
        }
    }

    /// Observes `x`: pushes it into the delay line and adds the evicted
    /// pattern to every trace accumulator.
    pub fn advance(&self, state: &mut TraceVarState, x: &[f64]) -> Result<()> {
        if state.scratch.len() != state.line.width() {
            state.scratch.resize(state.line.width(), 0.0);
        }
        let mut evicted = std::mem::take(&mut state.scratch);
        let result = state.line.push(x, &mut evicted);
        if result.is_ok() {
            for (gamma, &mu) in state.gammas.iter_mut().zip(&self.decays) {
                for (g, &e) in gamma.iter_mut().zip(evicted.iter()) {
                    *g = gamma_experiment_update(*g, mu, e);
                }
            }
        }
        state.scratch = evicted;
        result
    }

    /// Conditional mean per unit.
    pub fn predict(&self, state: &TraceVarState) -> Vec<f64> {
        let n = self.n;
        let mut m = self.bias.clone();
        for (w, slot) in self.lag_weights.iter().zip(state.line.slots()) {
            for i in 0..n {
                let x_i = slot[i];
                if x_i == 0.0 {
                    continue;
                }
                for j in 0..n {
                    m[j] += w[i * n + j] * x_i;
                }
            }
        }
        for (v, gamma) in self.trace_weights.iter().zip(&state.gammas) {
            for i in 0..n {
                let g_i = gamma[i];
                if g_i == 0.0 {
                    continue;
                }
                for j in 0..n {
                    m[j] += v[i * n + j] * g_i;
                }
            }
        }
        m
    }

    /// Log density of observing `x` in the current state.
    pub fn log_density(&self, state: &TraceVarState, x: &[f64]) -> Result<f64> {
        let m = self.predict(state);
        gaussian_log_density(x, &m, &self.variance)
    }

    /// Number of entries in the flat parameter vector used by
    /// [`TraceVar::natural_direction`] and [`TraceVar::apply_step`]:
    /// bias, lag weights, trace weights, then variances.
    pub fn param_count(&self) -> usize {
        let nn = self.n * self.n;
        self.n + (self.d - 1) * nn + self.decays.len() * nn + self.n
    }

    /// Writes the natural-gradient ascent direction of the log density of
    /// `x` into `out` (length [`TraceVar::param_count`]): residuals times
    /// features for the mean parameters, `r^2 - variance` for the variance
    /// block. `mean` must be the prediction made from `state`.
    pub fn natural_direction(
        &self,
        state: &TraceVarState,
        mean: &[f64],
        x: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        if out.len() != self.param_count() {
            return Err(DybmError::DimensionMismatch {
                what: "direction buffer",
                expected: self.param_count(),
                actual: out.len(),
            });
        }
        if x.len() != self.n || mean.len() != self.n {
            return Err(DybmError::DimensionMismatch {
                what: "training pattern",
                expected: self.n,
                actual: x.len().min(mean.len()),
            });
        }
        let n = self.n;
        let mut pos = 0;
        for j in 0..n {
            out[pos + j] = x[j] - mean[j];
        }
        pos += n;
        for slot in state.line.slots() {
            for i in 0..n {
                for j in 0..n {
                    out[pos + i * n + j] = slot[i] * (x[j] - mean[j]);
                }
            }
            pos += n * n;
        }
        for gamma in &state.gammas {
            for i in 0..n {
                for j in 0..n {
                    out[pos + i * n + j] = gamma[i] * (x[j] - mean[j]);
                }
            }
            pos += n * n;
        }
        for j in 0..n {
            let r = x[j] - mean[j];
            out[pos + j] = r * r - self.variance[j];
        }
        Ok(())
    }

    /// Adds a scaled step to the flat parameter vector and floors the
    /// variances.
    pub fn apply_step(&mut self, step: &[f64]) -> Result<()> {
        if step.len() != self.param_count() {
            return Err(DybmError::DimensionMismatch {
                what: "step buffer",
                expected: self.param_count(),
                actual: step.len(),
            });
        }
        let n = self.n;
        let mut pos = 0;
        for j in 0..n {
            self.bias[j] += step[pos + j];
        }
        pos += n;
        for w in &mut self.lag_weights {
            for (value, &delta) in w.iter_mut().zip(&step[pos..pos + n * n]) {
                *value += delta;
            }
            pos += n * n;
        }
        for v in &mut self.trace_weights {
            for (value, &delta) in v.iter_mut().zip(&step[pos..pos + n * n]) {
                *value += delta;
            }
            pos += n * n;
        }
        for j in 0..n {
            self.variance[j] = (self.variance[j] + step[pos + j]).max(VARIANCE_FLOOR);
        }
        Ok(())
    }
}

/// Vector autoregression of order `d` expressed as a [`TraceVar`] with
/// trace decay zero: the trace regressor is exactly the lag-`d` pattern.
pub fn var_baseline(n: usize, d: usize) -> Result<TraceVar> {
    TraceVar::new(n, d, vec![0.0])
}
