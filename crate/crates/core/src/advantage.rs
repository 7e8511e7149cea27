//! Generalized advantage estimation and per-batch z-score normalization.

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdvantageError {
    #[error("segment lengths disagree: {rewards} rewards, {dones} dones, {values} values (want T, T, T+1)")]
    Shape {
        rewards: usize,
        dones: usize,
        values: usize,
    },
    #[error("{name} must lie in [0, 1], got {value}")]
    Range { name: &'static str, value: f64 },
    #[error("advantage normalization needs at least 2 entries, got {0}")]
    BatchTooSmall(usize),
}

/// Standard deviation below which a batch counts as constant.
pub const DEGENERATE_SIGMA: f64 = 1e-8;

/// A contiguous stretch of experience; `values` carries one extra bootstrap entry.
#[derive(Clone, Debug, PartialEq)]
pub struct RolloutSegment<T> {
    pub rewards: Vec<T>,
    pub values: Vec<T>,
    pub dones: Vec<bool>,
    pub gamma_discount: T,
    pub lambda_gae: T,
}

impl<T: Scalar> RolloutSegment<T> {
    pub fn validate(&self) -> Result<(), AdvantageError> {
        let t = self.rewards.len();
        if self.dones.len() != t || self.values.len() != t + 1 {
            return Err(AdvantageError::Shape {
                rewards: t,
                dones: self.dones.len(),
                values: self.values.len(),
            });
        }
        for (name, v) in [("gamma_discount", self.gamma_discount), ("lambda_gae", self.lambda_gae)] {
            if !(v >= T::zero() && v <= T::one()) {
                return Err(AdvantageError::Range {
                    name,
                    value: v.to_f64_lossy(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdvantageBatch<T> {
    pub advantages: Vec<T>,
    pub returns: Vec<T>,
    /// Mean of the advantages before the most recent normalization.
    pub mu_a: T,
    /// Population standard deviation before the most recent normalization.
    pub sigma_a: T,
}

fn mean_std<T: Scalar>(xs: &[T]) -> (T, T) {
    let n = T::lit(xs.len() as f64);
    let mean = xs.iter().copied().sum::<T>() / n;
    let var = xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / n;
    (mean, var.sqrt())
}

/// Backward recursion `A_t = δ_t + γλ(1 − done_t) A_{t+1}` with
/// `δ_t = r_t + γ V_{t+1} (1 − done_t) − V_t`; returns are `A_t + V_t`.
pub fn compute_gae<T: Scalar>(segment: &RolloutSegment<T>) -> Result<AdvantageBatch<T>, AdvantageError> {
    segment.validate()?;
    let RolloutSegment {
        rewards,
        values,
        dones,
        gamma_discount: gamma,
        lambda_gae: lambda,
    } = segment;
    let n = rewards.len();
    let mut advantages = vec![T::zero(); n];
    let mut next = T::zero();
    for t in (0..n).rev() {
        let live = if dones[t] { T::zero() } else { T::one() };
        let delta = rewards[t] + *gamma * values[t + 1] * live - values[t];
        next = delta + *gamma * *lambda * live * next;
        advantages[t] = next;
    }
    let returns = advantages.iter().zip(values).map(|(&a, &v)| a + v).collect();
    let (mu_a, sigma_a) = if n > 0 {
        mean_std(&advantages)
    } else {
        (T::zero(), T::zero())
    };
    Ok(AdvantageBatch {
        advantages,
        returns,
        mu_a,
        sigma_a,
    })
}

/// Replaces each advantage by `(A − μ_A) / σ_A` (population σ). A batch with
/// `σ_A < 1e-8` becomes all zeros. Returns are left untouched.
pub fn normalize_advantages<T: Scalar>(
    batch: &AdvantageBatch<T>,
) -> Result<AdvantageBatch<T>, AdvantageError> {
    let n = batch.advantages.len();
    if n < 2 {
        return Err(AdvantageError::BatchTooSmall(n));
    }
    let (mu, sigma) = mean_std(&batch.advantages);
    let advantages = if sigma < T::lit(DEGENERATE_SIGMA) {
        vec![T::zero(); n]
    } else {
        batch.advantages.iter().map(|&a| (a - mu) / sigma).collect()
    };
    Ok(AdvantageBatch {
        advantages,
        returns: batch.returns.clone(),
        mu_a: mu,
        sigma_a: sigma,
    })
}

/// Normalizes a bare slice of advantages.
pub fn normalize_slice<T: Scalar>(xs: &[T]) -> Result<Vec<T>, AdvantageError> {
    let batch = AdvantageBatch {
        advantages: xs.to_vec(),
        returns: Vec::new(),
        mu_a: T::zero(),
        sigma_a: T::zero(),
    };
    normalize_advantages(&batch).map(|b| b.advantages)
}
