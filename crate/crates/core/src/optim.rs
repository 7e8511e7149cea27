//! SGD and Adam over flat parameter vectors.

use thiserror::Error;

use crate::nn::{MlpParams, NnError};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimError {
    #[error("learning rate must be positive and finite, got {0}")]
    LearningRate(f64),
    #[error("invalid Adam hyperparameter {name} = {value}")]
    Hyper { name: &'static str, value: f64 },
    #[error("gradient length {got} does not match parameter count {expected}")]
    Shape { expected: usize, got: usize },
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizerConfig<T> {
    pub kind: OptimizerKind,
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
}

impl<T: Scalar> OptimizerConfig<T> {
    pub fn sgd(lr: T) -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            ..Self::adam(lr)
        }
    }

    pub fn adam(lr: T) -> Self {
        Self {
            kind: OptimizerKind::Adam,
            lr,
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(1e-8),
        }
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        if !(self.lr > T::zero() && self.lr.is_finite()) {
            return Err(OptimError::LearningRate(self.lr.to_f64_lossy()));
        }
        if self.kind == OptimizerKind::Adam {
            for (name, value) in [("beta1", self.beta1), ("beta2", self.beta2)] {
                if !(value >= T::zero() && value < T::one()) {
                    return Err(OptimError::Hyper {
                        name,
                        value: value.to_f64_lossy(),
                    });
                }
            }
            if !(self.eps > T::zero()) {
                return Err(OptimError::Hyper {
                    name: "eps",
                    value: self.eps.to_f64_lossy(),
                });
            }
        }
        Ok(())
    }
}

/// Optimizer state for one parameter vector.
#[derive(Clone, Debug)]
pub struct Optimizer<T> {
    config: OptimizerConfig<T>,
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(config: OptimizerConfig<T>, num_params: usize) -> Result<Self, OptimError> {
        config.validate()?;
        Ok(Self {
            config,
            m: vec![T::zero(); num_params],
            v: vec![T::zero(); num_params],
            t: 0,
        })
    }

    pub fn config(&self) -> &OptimizerConfig<T> {
        &self.config
    }

    pub fn steps_taken(&self) -> i32 {
        self.t
    }

    /// One update at the configured learning rate.
    pub fn step(&mut self, params: &mut [T], grads: &[T]) -> Result<(), OptimError> {
        self.step_scaled(params, grads, T::one())
    }

    /// One update at `lr_scale * lr`; schedules pass a factor in `[0, 1]`.
    pub fn step_scaled(
        &mut self,
        params: &mut [T],
        grads: &[T],
        lr_scale: T,
    ) -> Result<(), OptimError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(OptimError::Shape {
                expected: self.m.len(),
                got: if params.len() != self.m.len() {
                    params.len()
                } else {
                    grads.len()
                },
            });
        }
        let lr = self.config.lr * lr_scale;
        self.t += 1;
        match self.config.kind {
            OptimizerKind::Sgd => {
                for (p, &g) in params.iter_mut().zip(grads) {
                    *p -= lr * g;
                }
            }
            OptimizerKind::Adam => {
                let OptimizerConfig {
                    beta1, beta2, eps, ..
                } = self.config;
                let bc1 = T::one() - beta1.powi(self.t);
                let bc2 = T::one() - beta2.powi(self.t);
                for k in 0..params.len() {
                    let g = grads[k];
                    self.m[k] = beta1 * self.m[k] + (T::one() - beta1) * g;
                    self.v[k] = beta2 * self.v[k] + (T::one() - beta2) * g * g;
                    let m_hat = self.m[k] / bc1;
                    let v_hat = self.v[k] / bc2;
                    params[k] -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
        Ok(())
    }
}

/// Applies one optimizer step to a network given gradients in flat order.
pub fn optimizer_step<T: Scalar>(
    params: &mut MlpParams<T>,
    grads: &[T],
    opt: &mut Optimizer<T>,
    lr_scale: T,
) -> Result<(), OptimError> {
    let mut flat = params.to_flat();
    opt.step_scaled(&mut flat, grads, lr_scale)?;
    params.load_flat(&flat)?;
    Ok(())
}

/// Rescales `grads` in place so its L2 norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_grad_norm<T: Scalar>(grads: &mut [T], max_norm: T) -> T {
    let norm = grads.iter().map(|&g| g * g).sum::<T>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        for g in grads.iter_mut() {
            *g *= s;
        }
    }
    norm
}

/// Cosine decay factor from 1 at `step = 0` to 0 at `step = total`.
pub fn cosine_decay<T: Scalar>(step: usize, total: usize) -> T {
    if total == 0 {
        return T::one();
    }
    let frac = (step.min(total) as f64) / total as f64;
    T::lit(0.5 * (1.0 + (std::f64::consts::PI * frac).cos()))
}
