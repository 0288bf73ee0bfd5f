//! AdaGrad step-size adaptation.
//!
//! Each parameter keeps a running sum of its squared raw gradients; the
//! applied step divides the base rate by the square root of that sum. Early
//! steps are close to `eta0` per unit gradient and the effective rate only
//! ever shrinks, which is what makes fixed-horizon online training stable
//! across the wide range of feature scales a delay line produces.

use crate::error::{DybmError, Result};

/// Default denominator guard.
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Per-parameter AdaGrad state wrapping a raw update direction.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdaGrad {
    accum: Vec<f64>,
    eta0: f64,
    epsilon: f64,
    adaptive: bool,
}

impl AdaGrad {
    /// Fresh state for `count` parameters with base rate `eta0`.
    pub fn new(count: usize, eta0: f64) -> Result<Self> {
        Self::with_epsilon(count, eta0, DEFAULT_EPSILON)
    }

    pub fn with_epsilon(count: usize, eta0: f64, epsilon: f64) -> Result<Self> {
        if !eta0.is_finite() || eta0 < 0.0 {
            return Err(DybmError::InvalidParameter(format!(
                "base rate eta0 must be finite and non-negative, got {eta0}"
            )));
        }
        if !epsilon.is_finite() || epsilon <= 0.0 {
            return Err(DybmError::InvalidParameter(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        Ok(AdaGrad {
            accum: vec![0.0; count],
            eta0,
            epsilon,
            adaptive: true,
        })
    }

    /// Degenerate state that never accumulates, so every step is exactly
    /// `eta0` times the raw direction. Plain SGD, useful as a reference
    /// in tests and baselines.
    pub fn fixed_rate(count: usize, eta0: f64) -> Result<Self> {
        let mut state = Self::new(count, eta0)?;
        state.adaptive = false;
        Ok(state)
    }

    pub fn from_parts(accum: Vec<f64>, eta0: f64, epsilon: f64, adaptive: bool) -> Result<Self> {
        let mut state = Self::with_epsilon(accum.len(), eta0, epsilon)?;
        if accum.iter().any(|&a| !a.is_finite() || a < 0.0) {
            return Err(DybmError::InvalidParameter(
                "accumulators must be finite and non-negative".to_string(),
            ));
        }
        state.accum = accum;
        state.adaptive = adaptive;
        Ok(state)
    }

    pub fn len(&self) -> usize {
        self.accum.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accum.is_empty()
    }

    pub fn eta0(&self) -> f64 {
        self.eta0
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn is_adaptive(&self) -> bool {
        self.adaptive
    }

    pub fn accumulators(&self) -> &[f64] {
        &self.accum
    }

    /// Clears the accumulated history, restoring the initial step sizes.
    pub fn reset(&mut self) {
        self.accum.fill(0.0);
    }

    /// Turns the raw direction in `grad` into the applied step, in place:
    /// the accumulator first absorbs the squared entry, then
    /// `step = eta0 * raw / (sqrt(accum) + epsilon)`.
    ///
    /// A non-finite raw entry is rejected before any state changes.
    pub fn scale_in_place(&mut self, grad: &mut [f64]) -> Result<()> {
        if grad.len() != self.accum.len() {
            return Err(DybmError::DimensionMismatch {
                what: "gradient",
                expected: self.accum.len(),
                actual: grad.len(),
            });
        }
        if let Some(pos) = grad.iter().position(|g| !g.is_finite()) {
            return Err(DybmError::NonFinite {
                what: format!("gradient entry {pos}"),
                step: None,
            });
        }
        if !self.adaptive {
            for g in grad.iter_mut() {
                *g *= self.eta0;
            }
            return Ok(());
        }
        for (g, a) in grad.iter_mut().zip(&mut self.accum) {
            *a += *g * *g;
            *g = self.eta0 * *g / (a.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn first_step_is_almost_the_sign_of_the_gradient() {
        let mut opt = AdaGrad::new(1, 0.1).unwrap();
        let mut grad = vec![2.0];
        opt.scale_in_place(&mut grad).unwrap();
        assert_eq!(grad[0], 0.1 * 2.0 / (2.0 + DEFAULT_EPSILON));
        assert_eq!(opt.accumulators(), &[4.0]);
    }

    #[test]
    fn zero_gradient_takes_no_step_and_leaves_no_trace() {
        let mut opt = AdaGrad::new(2, 0.5).unwrap();
        let mut grad = vec![0.0, 0.0];
        opt.scale_in_place(&mut grad).unwrap();
        assert_eq!(grad, vec![0.0, 0.0]);
        assert_eq!(opt.accumulators(), &[0.0, 0.0]);
    }

    #[test]
    fn constant_gradient_steps_shrink_as_inverse_square_root() {
        let eta0 = 0.2;
        let g = -1.5;
        let mut opt = AdaGrad::new(1, eta0).unwrap();
        for k in 1..=20 {
            let mut grad = vec![g];
            opt.scale_in_place(&mut grad).unwrap();
            let expected = eta0 * g / (g.abs() * (k as f64).sqrt() + DEFAULT_EPSILON);
            assert!(
                (grad[0] - expected).abs() <= 1e-15 * expected.abs(),
                "call {k}: {} vs {expected}",
                grad[0]
            );
        }
    }

    #[test]
    fn coordinates_adapt_independently() {
        let mut opt = AdaGrad::new(2, 0.1).unwrap();
        let mut grad = vec![3.0, 0.0];
        opt.scale_in_place(&mut grad).unwrap();
        assert_eq!(opt.accumulators()[1], 0.0);
        // An untouched coordinate still gets the fresh first-step rate.
        let mut grad = vec![0.0, 1.0];
        opt.scale_in_place(&mut grad).unwrap();
        assert_eq!(grad[1], 0.1 * 1.0 / (1.0 + DEFAULT_EPSILON));
    }

    #[test]
    fn effective_rate_never_increases_and_sign_is_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut opt = AdaGrad::new(3, 0.05).unwrap();
        let mut last_rate = vec![f64::INFINITY; 3];
        for _ in 0..500 {
            let raw: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let mut grad = raw.clone();
            opt.scale_in_place(&mut grad).unwrap();
            for i in 0..3 {
                assert!(grad[i] * raw[i] >= 0.0, "sign flipped");
                if raw[i] != 0.0 {
                    let rate = (grad[i] / raw[i]).abs();
                    assert!(rate <= last_rate[i] + 1e-15, "rate grew");
                    last_rate[i] = rate;
                }
            }
        }
    }

    #[test]
    fn non_finite_gradient_is_rejected_before_accumulating() {
        let mut opt = AdaGrad::new(2, 0.1).unwrap();
        let mut grad = vec![1.0, f64::NAN];
        let err = opt.scale_in_place(&mut grad).unwrap_err();
        assert!(matches!(err, DybmError::NonFinite { .. }));
        assert_eq!(opt.accumulators(), &[0.0, 0.0]);
    }

    #[test]
    fn fixed_rate_mode_is_plain_sgd() {
        let mut opt = AdaGrad::fixed_rate(1, 0.25).unwrap();
        for g in [3.0, -1.0, 0.5, 100.0] {
            let mut grad = vec![g];
            opt.scale_in_place(&mut grad).unwrap();
            assert_eq!(grad[0], 0.25 * g);
        }
        assert_eq!(opt.accumulators(), &[0.0]);
    }

    #[test]
    fn reset_restores_initial_step_sizes() {
        let mut opt = AdaGrad::new(1, 0.1).unwrap();
        let mut grad = vec![5.0];
        opt.scale_in_place(&mut grad).unwrap();
        opt.reset();
        let mut grad = vec![2.0];
        opt.scale_in_place(&mut grad).unwrap();
        assert_eq!(grad[0], 0.1 * 2.0 / (2.0 + DEFAULT_EPSILON));
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        assert!(AdaGrad::new(1, -0.1).is_err());
        assert!(AdaGrad::new(1, f64::NAN).is_err());
        assert!(AdaGrad::with_epsilon(1, 0.1, 0.0).is_err());
    }
}
