//! Binary DyBM in its original and general parameterizations.
//!
//! Each of `n` units emits a spike `x_j in {0, 1}` per step. Conditioned on
//! the recent history, the units are independent Bernoulli variables whose
//! negative energy (logit) `m_j` is an affine readout of the history state.
//!
//! [`OriginalDybm`] carries the spike-timing parameterization: a bias, an
//! LTP weight matrix `u` applied to the synaptic trace, and an LTD weight
//! matrix `v` applied both to the patterns still in the delay line (through
//! the future-arrival summary beta) and to the neural trace. Its learning
//! rule, exact gradient ascent on the log-likelihood, moves each weight the
//! way spike-timing-dependent plasticity would: coincidences after the
//! conduction delay potentiate, coincidences before it depress.
//!
//! [`GeneralDybm`] is the broader lag-plus-trace form: one weight matrix per
//! delay-line slot and one per eligibility trace. Every original model maps
//! onto it exactly via [`OriginalDybm::reduce`].

use crate::error::{DybmError, Result};
use crate::trace::{compute_beta, DelayLine, LagTraceState, TraceVector};
use rand::Rng;

/// Numerically stable logistic function.
pub fn sigmoid(m: f64) -> f64 {
    if m >= 0.0 {
        1.0 / (1.0 + (-m).exp())
    } else {
        let e = m.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable `ln(1 + exp(m))`.
pub fn softplus(m: f64) -> f64 {
    m.max(0.0) + (-m.abs()).exp().ln_1p()
}

fn ensure_binary(x: &[f64], what: &str) -> Result<()> {
    for (j, &v) in x.iter().enumerate() {
        if v != 0.0 && v != 1.0 {
            return Err(DybmError::Domain(format!(
                "{what}[{j}] = {v} is not a binary spike (expected 0 or 1)"
            )));
        }
    }
    Ok(())
}

fn ensure_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(DybmError::NonFinite {
            what: what.to_string(),
            step: None,
        });
    }
    Ok(())
}

/// Per-unit probability of the observed spikes given logits `m`:
/// `P_j(x_j) = exp(m_j x_j) / (1 + exp(m_j))`, evaluated in log space so
/// that saturated logits stay finite.
pub fn firing_probability(m: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    if m.len() != x.len() {
        return Err(DybmError::DimensionMismatch {
            what: "firing probability pattern",
            expected: m.len(),
            actual: x.len(),
        });
    }
    ensure_binary(x, "pattern")?;
    Ok(m.iter()
        .zip(x)
        .map(|(&m_j, &x_j)| (m_j * x_j - softplus(m_j)).exp())
        .collect())
}

/// Samples one spike per unit, `x_j ~ Bernoulli(sigmoid(m_j))`.
pub fn sample_from_logits<R: Rng>(m: &[f64], rng: &mut R) -> Vec<f64> {
    m.iter()
        .map(|&m_j| {
            if rng.gen::<f64>() < sigmoid(m_j) {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

/// Binary DyBM with the original bias / LTP / LTD parameterization.
///
/// Weight matrices are flat row-major `n x n`, entry `[i * n + j]` coupling
/// presynaptic unit `i` to postsynaptic unit `j`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OriginalDybm {
    n: usize,
    d: usize,
    lambda: f64,
    mu: f64,
    bias: Vec<f64>,
    ltp: Vec<f64>,
    ltd: Vec<f64>,
}

impl OriginalDybm {
    /// Zero-weight model. Requires `d >= 1`, `lambda in [0, 1)` and
    /// `mu in (0, 1)`; `mu` appears as `mu^(-delta)` in the energy, so a
    /// zero value is rejected rather than silently mapped to infinity.
    pub fn zeros(n: usize, d: usize, lambda: f64, mu: f64) -> Result<Self> {
        Self::from_parts(vec![0.0; n], vec![0.0; n * n], vec![0.0; n * n], d, lambda, mu)
    }

    pub fn from_parts(
        bias: Vec<f64>,
        ltp: Vec<f64>,
        ltd: Vec<f64>,
        d: usize,
        lambda: f64,
        mu: f64,
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
        if !(0.0..1.0).contains(&lambda) {
            return Err(DybmError::InvalidParameter(format!(
                "synaptic decay lambda must be in [0, 1), got {lambda}"
            )));
        }
        if !(mu > 0.0 && mu < 1.0) {
            return Err(DybmError::InvalidParameter(format!(
                "neural decay mu must be in (0, 1), got {mu}"
            )));
        }
        if ltp.len() != n * n {
            return Err(DybmError::DimensionMismatch {
                what: "LTP weights",
                expected: n * n,
                actual: ltp.len(),
            });
        }
        if ltd.len() != n * n {
            return Err(DybmError::DimensionMismatch {
                what: "LTD weights",
                expected: n * n,
                actual: ltd.len(),
            });
        }
        ensure_finite(&bias, "bias")?;
        ensure_finite(&ltp, "LTP weights")?;
        ensure_finite(&ltd, "LTD weights")?;
        Ok(OriginalDybm {
            n,
            d,
            lambda,
            mu,
            bias,
            ltp,
            ltd,
        })
    }

    pub fn units(&self) -> usize {
        self.n
    }

    pub fn delay(&self) -> usize {
        self.d
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn ltp(&self) -> &[f64] {
        &self.ltp
    }

    pub fn ltd(&self) -> &[f64] {
        &self.ltd
    }

    /// Fresh all-zero history state for this model.
    pub fn state(&self) -> OriginalState {
        OriginalState::zeros(self)
    }

    /// Negative energy (logit) per unit:
    /// `m_j = b_j + sum_i u_ij alpha_i - sum_i v_ij beta_i - sum_k v_jk gamma_k`.
    pub fn negative_energy(&self, state: &OriginalState) -> Result<Vec<f64>> {
        self.check_state(state)?;
        let n = self.n;
        let alpha = state.alpha.values();
        let gamma = state.gamma.values();
        let beta = compute_beta(&state.line, self.mu)?;
        let mut m = self.bias.clone();
        for i in 0..n {
            for j in 0..n {
                m[j] += self.ltp[i * n + j] * alpha[i] - self.ltd[i * n + j] * beta[i];
            }
        }
        for j in 0..n {
            for k in 0..n {
                m[j] -= self.ltd[j * n + k] * gamma[k];
            }
        }
        Ok(m)
    }

    /// Energy of observing the binary pattern `x` in this state,
    /// `E = -sum_j m_j x_j`.
    pub fn energy(&self, state: &OriginalState, x: &[f64]) -> Result<f64> {
        ensure_binary(x, "pattern")?;
        let m = self.negative_energy(state)?;
        if x.len() != m.len() {
            return Err(DybmError::DimensionMismatch {
                what: "energy pattern",
                expected: m.len(),
                actual: x.len(),
            });
        }
        Ok(-m.iter().zip(x).map(|(&m_j, &x_j)| m_j * x_j).sum::<f64>())
    }

    /// Log-likelihood of the binary pattern `x`,
    /// `sum_j (m_j x_j - softplus(m_j))`.
    pub fn log_likelihood(&self, state: &OriginalState, x: &[f64]) -> Result<f64> {
        ensure_binary(x, "pattern")?;
        let m = self.negative_energy(state)?;
        Ok(m.iter()
            .zip(x)
            .map(|(&m_j, &x_j)| m_j * x_j - softplus(m_j))
            .sum())
    }

    /// Per-unit probability of the observed pattern.
    pub fn firing_probability(&self, state: &OriginalState, x: &[f64]) -> Result<Vec<f64>> {
        let m = self.negative_energy(state)?;
        firing_probability(&m, x)
    }

    /// Samples the next pattern from the current conditional distribution.
    pub fn sample_step<R: Rng>(&self, state: &OriginalState, rng: &mut R) -> Result<Vec<f64>> {
        let m = self.negative_energy(state)?;
        Ok(sample_from_logits(&m, rng))
    }

    /// One step of exact gradient ascent on the log-likelihood of `x` with
    /// learning rate `eta`. All deltas are computed from the pre-update
    /// parameters and state, then applied simultaneously:
    ///
    /// ```text
    /// b_j  += eta (x_j - p_j)
    /// u_ij += eta alpha_i (x_j - p_j)
    /// v_ij += eta beta_i (p_j - x_j) + eta gamma_j (p_i - x_i)
    /// ```
    ///
    /// where `p = sigmoid(m)` is the expected spike under the current model.
    pub fn stdp_update(&mut self, state: &OriginalState, x: &[f64], eta: f64) -> Result<()> {
        ensure_binary(x, "pattern")?;
        let m = self.negative_energy(state)?;
        if x.len() != self.n {
            return Err(DybmError::DimensionMismatch {
                what: "training pattern",
                expected: self.n,
                actual: x.len(),
            });
        }
        let n = self.n;
        let alpha = state.alpha.values();
        let gamma = state.gamma.values();
        let beta = compute_beta(&state.line, self.mu)?;
        let residual: Vec<f64> = x
            .iter()
            .zip(&m)
            .map(|(&x_j, &m_j)| x_j - sigmoid(m_j))
            .collect();
        for j in 0..n {
            self.bias[j] += eta * residual[j];
        }
        for i in 0..n {
            for j in 0..n {
                self.ltp[i * n + j] += eta * alpha[i] * residual[j];
                self.ltd[i * n + j] -= eta * (beta[i] * residual[j] + gamma[j] * residual[i]);
            }
        }
        Ok(())
    }

    /// Rewrites this model in the general lag-plus-trace form. The mapping
    /// is exact: both models assign the same energy to every pattern after
    /// any shared history.
    ///
    /// Slot `delta` of the delay line contributes `-mu^(-delta) v` (the
    /// future-arrival side) and `-mu^delta v^T` (the neural-trace share of a
    /// pattern observed `delta` steps ago). Two traces remain: the synaptic
    /// trace keeps the LTP weights, and a second trace with decay `mu`
    /// carries `-mu^(d-1) v^T`, since a pattern evicted from the line has
    /// decayed `d - 1` times by the step it enters that trace.
    pub fn reduce(&self) -> GeneralDybm {
        let n = self.n;
        let mut lag_weights = Vec::with_capacity(self.d - 1);
        for delta in 1..self.d {
            let fwd = self.mu.powi(-(delta as i32));
            let bwd = self.mu.powi(delta as i32);
            let mut w = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    w[i * n + j] = -fwd * self.ltd[i * n + j] - bwd * self.ltd[j * n + i];
                }
            }
            lag_weights.push(w);
        }
        let arrival_decay = self.mu.powi(self.d as i32 - 1);
        let mut u2 = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                u2[i * n + j] = -arrival_decay * self.ltd[j * n + i];
            }
        }
        GeneralDybm::from_parts(
            self.bias.clone(),
            lag_weights,
            vec![self.ltp.clone(), u2],
            vec![self.lambda, self.mu],
            self.d,
        )
        .expect("reduction of a valid model is valid")
    }

    fn check_state(&self, state: &OriginalState) -> Result<()> {
        if state.line.width() != self.n || state.line.delay() != self.d {
            return Err(DybmError::InvalidParameter(format!(
                "state built for n = {}, d = {} used with model n = {}, d = {}",
                state.line.width(),
                state.line.delay(),
                self.n,
                self.d
            )));
        }
        Ok(())
    }
}

/// History state of an [`OriginalDybm`]: the delay line, the synaptic trace
/// (fed by evictions, decay `lambda`) and the neural trace (fed by the
/// observed pattern, decay `mu`).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OriginalState {
    line: DelayLine,
    alpha: TraceVector,
    gamma: TraceVector,
    #[cfg_attr(feature = "serde", serde(skip))]
    scratch: Vec<f64>,
}

impl OriginalState {
    pub fn zeros(model: &OriginalDybm) -> Self {
        OriginalState {
            line: DelayLine::zeros(model.d, model.n).expect("validated by the model"),
            alpha: TraceVector::zeros(model.n, model.lambda).expect("validated by the model"),
            gamma: TraceVector::zeros(model.n, model.mu).expect("validated by the model"),
            scratch: vec![0.0; model.n],
        }
    }

    pub fn from_parts(line: DelayLine, alpha: TraceVector, gamma: TraceVector) -> Result<Self> {
        let n = line.width();
        if alpha.len() != n || gamma.len() != n {
            return Err(DybmError::DimensionMismatch {
                what: "state trace width",
                expected: n,
                actual: alpha.len().max(gamma.len()),
            });
        }
        let scratch = vec![0.0; n];
        Ok(OriginalState {
            line,
            alpha,
            gamma,
            scratch,
        })
    }

    pub fn line(&self) -> &DelayLine {
        &self.line
    }

    pub fn alpha(&self) -> &TraceVector {
        &self.alpha
    }

    pub fn gamma(&self) -> &TraceVector {
        &self.gamma
    }

    /// Observes a binary pattern: it enters the delay line and the neural
    /// trace now, and reaches the synaptic trace once evicted.
    pub fn advance(&mut self, x: &[f64]) -> Result<()> {
        ensure_binary(x, "pattern")?;
        if self.scratch.len() != self.line.width() {
            self.scratch.resize(self.line.width(), 0.0);
        }
        let mut evicted = std::mem::take(&mut self.scratch);
        let mut result = self.line.push(x, &mut evicted);
        if result.is_ok() {
            result = self.alpha.update(&evicted);
        }
        if result.is_ok() {
            result = self.gamma.update(x);
        }
        self.scratch = evicted;
        result
    }
}

/// Binary DyBM in the general form: one weight matrix per delay-line slot
/// plus one per eligibility trace,
/// `m_j = b_j + sum_delta sum_i W[delta]_ij x_i^[t-delta] + sum_l sum_i U[l]_ij a[l]_i`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GeneralDybm {
    n: usize,
    d: usize,
    bias: Vec<f64>,
    /// `d - 1` matrices, entry `[delta - 1][i * n + j]`.
    lag_weights: Vec<Vec<f64>>,
    /// One matrix per trace, entry `[l][i * n + j]`.
    trace_weights: Vec<Vec<f64>>,
    decays: Vec<f64>,
}

impl GeneralDybm {
    pub fn zeros(n: usize, d: usize, decays: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(DybmError::InvalidParameter(
                "conduction delay d must be at least 1".to_string(),
            ));
        }
        let lag_weights = vec![vec![0.0; n * n]; d - 1];
        let trace_weights = vec![vec![0.0; n * n]; decays.len()];
        Self::from_parts(vec![0.0; n], lag_weights, trace_weights, decays, d)
    }

    pub fn from_parts(
        bias: Vec<f64>,
        lag_weights: Vec<Vec<f64>>,
        trace_weights: Vec<Vec<f64>>,
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
            ensure_finite(w, "weights")?;
        }
        ensure_finite(&bias, "bias")?;
        for &decay in &decays {
            if !(0.0..1.0).contains(&decay) {
                return Err(DybmError::InvalidParameter(format!(
                    "trace decay must be in [0, 1), got {decay}"
                )));
            }
        }
        Ok(GeneralDybm {
            n,
            d,
            bias,
            lag_weights,
            trace_weights,
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

    pub fn decays(&self) -> &[f64] {
        &self.decays
    }

    /// Fresh all-zero history state matching this model's delay and decays.
    pub fn state(&self) -> LagTraceState {
        LagTraceState::zeros(self.d, self.n, &self.decays).expect("validated by the model")
    }

    /// Negative energy (logit) per unit.
    pub fn negative_energy(&self, state: &LagTraceState) -> Result<Vec<f64>> {
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

    /// Energy of observing the binary pattern `x`, `E = -sum_j m_j x_j`.
    pub fn energy(&self, state: &LagTraceState, x: &[f64]) -> Result<f64> {
        ensure_binary(x, "pattern")?;
        let m = self.negative_energy(state)?;
        if x.len() != m.len() {
            return Err(DybmError::DimensionMismatch {
                what: "energy pattern",
                expected: m.len(),
                actual: x.len(),
            });
        }
        Ok(-m.iter().zip(x).map(|(&m_j, &x_j)| m_j * x_j).sum::<f64>())
    }

    /// Log-likelihood of the binary pattern `x`.
    pub fn log_likelihood(&self, state: &LagTraceState, x: &[f64]) -> Result<f64> {
        ensure_binary(x, "pattern")?;
        let m = self.negative_energy(state)?;
        Ok(m.iter()
            .zip(x)
            .map(|(&m_j, &x_j)| m_j * x_j - softplus(m_j))
            .sum())
    }

    pub fn firing_probability(&self, state: &LagTraceState, x: &[f64]) -> Result<Vec<f64>> {
        let m = self.negative_energy(state)?;
        firing_probability(&m, x)
    }

    pub fn sample_step<R: Rng>(&self, state: &LagTraceState, rng: &mut R) -> Result<Vec<f64>> {
        let m = self.negative_energy(state)?;
        Ok(sample_from_logits(&m, rng))
    }

    /// One step of exact gradient ascent on the log-likelihood of `x`:
    /// each weight moves by `eta * feature_i * (x_j - p_j)` where the
    /// feature is the slot value or trace value it multiplies.
    pub fn update(&mut self, state: &LagTraceState, x: &[f64], eta: f64) -> Result<()> {
        ensure_binary(x, "pattern")?;
        if x.len() != self.n {
            return Err(DybmError::DimensionMismatch {
                what: "training pattern",
                expected: self.n,
                actual: x.len(),
            });
        }
        let m = self.negative_energy(state)?;
        let n = self.n;
        let residual: Vec<f64> = x
            .iter()
            .zip(&m)
            .map(|(&x_j, &m_j)| x_j - sigmoid(m_j))
            .collect();
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
