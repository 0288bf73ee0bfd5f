//! Delay lines and eligibility traces.
//!
//! A DyBM remembers recent history through two mechanisms. A FIFO delay
//! line of `d - 1` slots holds the last patterns verbatim; a pattern pushed
//! at time `t` travels through the line and is evicted at time `t + d - 1`,
//! the moment it "arrives" at the far end. Eligibility traces are
//! exponentially decaying sums: a synaptic trace accumulates the patterns
//! evicted from the line, a neural trace accumulates the observed patterns
//! directly.
//!
//! Both trace kinds obey the same recursion
//!
//! ```text
//! trace <- decay * (trace + input)
//! ```
//!
//! where `input` is the evicted pattern (synaptic) or the current pattern
//! (neural). [`synaptic_trace_reference`] and [`neural_trace_reference`]
//! evaluate the unrolled sums directly and serve as oracles for tests.

use crate::error::{DybmError, Result};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Exponentially decaying eligibility trace over an `n`-dimensional series.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TraceVector {
    values: Vec<f64>,
    decay: f64,
}

impl TraceVector {
    /// Zero-initialized trace. `decay` must lie in `[0, 1)`.
    pub fn zeros(n: usize, decay: f64) -> Result<Self> {
        Self::new(vec![0.0; n], decay)
    }

    /// Trace with explicit initial values.
    pub fn new(values: Vec<f64>, decay: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&decay) {
            return Err(DybmError::InvalidParameter(format!(
                "trace decay must be in [0, 1), got {decay}"
            )));
        }
        Ok(TraceVector { values, decay })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Applies one step of the trace recursion with the given input pattern.
    ///
    /// For a synaptic trace the input is the pattern evicted from the delay
    /// line this step; for a neural trace it is the currently observed
    /// pattern.
    pub fn update(&mut self, input: &[f64]) -> Result<()> {
        if input.len() != self.values.len() {
            return Err(DybmError::DimensionMismatch {
                what: "trace input",
                expected: self.values.len(),
                actual: input.len(),
            });
        }
        for (v, &x) in self.values.iter_mut().zip(input) {
            *v = self.decay * (*v + x);
        }
        Ok(())
    }
}

/// FIFO delay line holding the last `d - 1` patterns of width `n`.
///
/// Slot 1 is the most recently pushed pattern, slot `d - 1` the oldest.
/// Pushing evicts the oldest slot's contents. With `d = 1` the line has no
/// storage and every pushed pattern is evicted immediately.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct DelayLine {
    /// Row-major ring storage, `capacity` rows of width `width`.
    data: Vec<f64>,
    /// Physical row index of logical slot 1.
    head: usize,
    width: usize,
    capacity: usize,
}

impl DelayLine {
    /// Empty line for conduction delay `d >= 1` over `n`-dimensional patterns.
    pub fn zeros(d: usize, n: usize) -> Result<Self> {
        if d == 0 {
            return Err(DybmError::InvalidParameter(
                "conduction delay d must be at least 1".to_string(),
            ));
        }
        if n == 0 {
            return Err(DybmError::InvalidParameter(
                "pattern width n must be at least 1".to_string(),
            ));
        }
        Ok(DelayLine {
            data: vec![0.0; (d - 1) * n],
            head: 0,
            width: n,
            capacity: d - 1,
        })
    }

    /// Rebuilds a line from slot contents ordered most recent first.
    pub fn from_slots(slots: &[Vec<f64>], d: usize, n: usize) -> Result<Self> {
        let mut line = Self::zeros(d, n)?;
        if slots.len() != line.capacity {
            return Err(DybmError::DimensionMismatch {
                what: "delay line slots",
                expected: line.capacity,
                actual: slots.len(),
            });
        }
        for (delta, slot) in slots.iter().enumerate() {
            if slot.len() != n {
                return Err(DybmError::DimensionMismatch {
                    what: "delay line slot width",
                    expected: n,
                    actual: slot.len(),
                });
            }
            line.data[delta * n..(delta + 1) * n].copy_from_slice(slot);
        }
        line.head = 0;
        Ok(line)
    }

    /// Conduction delay `d` this line was built for.
    pub fn delay(&self) -> usize {
        self.capacity + 1
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Pattern at logical slot `delta` in `1..=d-1` (1 = most recent).
    pub fn slot(&self, delta: usize) -> &[f64] {
        assert!(
            delta >= 1 && delta <= self.capacity,
            "slot index {delta} out of range 1..={}",
            self.capacity
        );
        let row = (self.head + delta - 1) % self.capacity;
        &self.data[row * self.width..(row + 1) * self.width]
    }

    /// Slots in order `delta = 1..=d-1`.
    pub fn slots(&self) -> impl Iterator<Item = &[f64]> {
        (1..=self.capacity).map(move |delta| self.slot(delta))
    }

    /// Slot contents as owned vectors, most recent first.
    pub fn to_slots(&self) -> Vec<Vec<f64>> {
        self.slots().map(|s| s.to_vec()).collect()
    }

    /// Pushes `pattern`, writing the evicted oldest pattern into `evicted`.
    ///
    /// With `d = 1`, `pattern` is copied straight to `evicted`.
    pub fn push(&mut self, pattern: &[f64], evicted: &mut [f64]) -> Result<()> {
        if pattern.len() != self.width {
            return Err(DybmError::DimensionMismatch {
                what: "pushed pattern",
                expected: self.width,
                actual: pattern.len(),
            });
        }
        if evicted.len() != self.width {
            return Err(DybmError::DimensionMismatch {
                what: "eviction buffer",
                expected: self.width,
                actual: evicted.len(),
            });
        }
        if self.capacity == 0 {
            evicted.copy_from_slice(pattern);
            return Ok(());
        }
        let oldest = (self.head + self.capacity - 1) % self.capacity;
        let row = &mut self.data[oldest * self.width..(oldest + 1) * self.width];
        evicted.copy_from_slice(row);
        row.copy_from_slice(pattern);
        self.head = oldest;
        Ok(())
    }
}

/// Future-arrival summary `beta_i = sum_{delta=1}^{d-1} mu^{-delta} * slot_delta[i]`.
///
/// Weights the patterns still travelling through the line by how much
/// neural-trace decay they will have escaped on arrival. Requires
/// `mu` in `(0, 1)`; with `d = 1` the sum is empty and the result is zero.
pub fn compute_beta(line: &DelayLine, mu: f64) -> Result<Vec<f64>> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(DybmError::InvalidParameter(format!(
            "beta requires trace decay mu in (0, 1), got {mu}"
        )));
    }
    let mut beta = vec![0.0; line.width()];
    let mut factor = 1.0;
    for slot in line.slots() {
        factor /= mu;
        for (b, &x) in beta.iter_mut().zip(slot) {
            *b += factor * x;
        }
    }
    Ok(beta)
}

/// Delay line plus a bank of synaptic traces with distinct decay rates,
/// advanced together as patterns are observed.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct LagTraceState {
    line: DelayLine,
    traces: Vec<TraceVector>,
    #[cfg_attr(feature = "serde", serde(skip))]
    scratch: Vec<f64>,
}

impl LagTraceState {
    /// Zero state for delay `d`, width `n`, one trace per decay rate.
    pub fn zeros(d: usize, n: usize, decays: &[f64]) -> Result<Self> {
        let line = DelayLine::zeros(d, n)?;
        let traces = decays
            .iter()
            .map(|&decay| TraceVector::zeros(n, decay))
            .collect::<Result<Vec<_>>>()?;
        Ok(LagTraceState {
            line,
            traces,
            scratch: vec![0.0; n],
        })
    }

    pub fn line(&self) -> &DelayLine {
        &self.line
    }

    pub fn traces(&self) -> &[TraceVector] {
        &self.traces
    }

    pub fn from_parts(line: DelayLine, traces: Vec<TraceVector>) -> Result<Self> {
        let n = line.width();
        for trace in &traces {
            if trace.len() != n {
                return Err(DybmError::DimensionMismatch {
                    what: "trace width",
                    expected: n,
                    actual: trace.len(),
                });
            }
        }
        Ok(LagTraceState {
            line,
            traces,
            scratch: vec![0.0; n],
        })
    }

    /// Observes `pattern`: pushes it into the line and feeds the evicted
    /// pattern to every trace.
    pub fn advance(&mut self, pattern: &[f64]) -> Result<()> {
        if self.scratch.len() != self.line.width() {
            self.scratch.resize(self.line.width(), 0.0);
        }
        let mut evicted = std::mem::take(&mut self.scratch);
        let pushed = self.line.push(pattern, &mut evicted);
        let mut result = pushed;
        if result.is_ok() {
            for trace in &mut self.traces {
                result = trace.update(&evicted);
                if result.is_err() {
                    break;
                }
            }
        }
        self.scratch = evicted;
        result
    }
}

/// Trace value reached by feeding `history` (oldest first) through a
/// zero-initialized delay line of conduction delay `d` and a synaptic trace
/// with the given decay, evaluated as the explicit unrolled sum
/// `sum_t decay^(T-t+1) * x^[t-d+1]`.
pub fn synaptic_trace_reference(history: &[Vec<f64>], decay: f64, d: usize) -> Vec<f64> {
    let steps = history.len();
    let n = history.first().map_or(0, Vec::len);
    let mut total = vec![0.0; n];
    for t in 1..=steps {
        if t < d {
            continue;
        }
        let weight = decay.powi((steps - t + 1) as i32);
        for (acc, &x) in total.iter_mut().zip(&history[t - d]) {
            *acc += weight * x;
        }
    }
    total
}

/// Trace value reached by feeding `history` (oldest first) to a neural trace
/// with the given decay, evaluated as `sum_t decay^(T-t+1) * x^[t]`.
pub fn neural_trace_reference(history: &[Vec<f64>], decay: f64) -> Vec<f64> {
    let steps = history.len();
    let n = history.first().map_or(0, Vec::len);
    let mut total = vec![0.0; n];
    for t in 1..=steps {
        let weight = decay.powi((steps - t + 1) as i32);
        for (acc, &x) in total.iter_mut().zip(&history[t - 1]) {
            *acc += weight * x;
        }
    }
    total
}
