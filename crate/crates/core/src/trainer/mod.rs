//! A2C, PPO and supervised training loops.

mod a2c;
mod checkpoint;
mod metrics;
mod ppo;
mod rollout;
mod supervised;

pub use a2c::train_a2c;
pub use checkpoint::{CheckpointError, config_hash, load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint};
pub use metrics::{policy_entropy_metric, read_metrics_csv, write_metrics_csv, MetricsRow, METRICS_HEADER};
pub use ppo::{ppo_minibatch, train_ppo, PpoSample, MinibatchStats};
pub use rollout::{collect_rollout, Collector, Rollout};
pub use supervised::{accuracy, predict, train_supervised, SupervisedOutput};

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::advantage::AdvantageError;
use crate::autodiff::AutodiffError;
use crate::env::EnvError;
use crate::losses::{LossError, LossKind};
use crate::nn::{Activation, NnError};
use crate::optim::{cosine_decay, OptimError};
use crate::{LossConfig, Mlp, Real};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Advantage(#[from] AdvantageError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algo {
    A2c,
    Ppo,
    Supervised,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::A2c => "a2c",
            Algo::Ppo => "ppo",
            Algo::Supervised => "supervised",
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algo {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "a2c" => Ok(Algo::A2c),
            "ppo" => Ok(Algo::Ppo),
            "supervised" => Ok(Algo::Supervised),
            _ => Err(format!("unknown algorithm `{s}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LrSchedule {
    Constant,
    CosineDecayToZero,
}

impl LrSchedule {
    pub fn name(self) -> &'static str {
        match self {
            LrSchedule::Constant => "constant",
            LrSchedule::CosineDecayToZero => "cosine_decay_to_zero",
        }
    }

    /// Learning-rate multiplier for optimizer step `step` of `total`.
    pub fn factor(self, step: usize, total: usize) -> Real {
        match self {
            LrSchedule::Constant => 1.0,
            LrSchedule::CosineDecayToZero => cosine_decay(step, total.saturating_sub(1)),
        }
    }
}

impl FromStr for LrSchedule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "constant" => Ok(LrSchedule::Constant),
            "cosine_decay_to_zero" | "cosine" => Ok(LrSchedule::CosineDecayToZero),
            _ => Err(format!("unknown lr schedule `{s}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub loss_kind: LossKind,
    pub algo: Algo,
    pub loss: LossConfig,
    /// Base learning rate; 0 freezes the network (no optimizer steps).
    pub lr: Real,
    pub gamma_discount: Real,
    pub lambda_gae: Real,
    /// Environment steps collected per update (RL only).
    pub rollout_length: usize,
    /// PPO minibatch or supervised batch size.
    pub batch_size: usize,
    /// Environment steps for RL trainers.
    pub total_steps: usize,
    /// Passes over the training split for supervised runs.
    pub epochs: usize,
    pub epochs_per_update: usize,
    pub seed: u64,
    pub lr_schedule: LrSchedule,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    /// Global gradient-norm bound applied before each optimizer step.
    pub grad_clip: Real,
    /// Keep per-update diagnostics in the training output.
    pub record_traces: bool,
}

impl TrainConfig {
    fn base(loss_kind: LossKind, algo: Algo, seed: u64) -> Self {
        Self {
            loss_kind,
            algo,
            loss: LossConfig::rl_defaults(),
            lr: 1e-4,
            gamma_discount: 0.999,
            lambda_gae: 0.95,
            rollout_length: 256,
            batch_size: 64,
            total_steps: 50_000,
            epochs: 30,
            epochs_per_update: 4,
            seed,
            lr_schedule: LrSchedule::Constant,
            hidden: vec![64, 64],
            activation: Activation::Tanh,
            grad_clip: 5.0,
            record_traces: false,
        }
    }

    pub fn a2c(loss_kind: LossKind, seed: u64) -> Self {
        Self {
            rollout_length: 16,
            total_steps: 2000,
            epochs_per_update: 1,
            ..Self::base(loss_kind, Algo::A2c, seed)
        }
    }

    pub fn ppo(loss_kind: LossKind, seed: u64) -> Self {
        Self::base(loss_kind, Algo::Ppo, seed)
    }

    pub fn supervised(loss_kind: LossKind, seed: u64) -> Self {
        Self {
            loss: LossConfig::supervised_defaults(),
            lr: 1e-3,
            gamma_discount: 0.0,
            lambda_gae: 0.0,
            ..Self::base(loss_kind, Algo::Supervised, seed)
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        self.loss.validate()?;
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be finite and >= 0, got {}", self.lr));
        }
        if !(0.0..=1.0).contains(&self.gamma_discount) || !(0.0..=1.0).contains(&self.lambda_gae) {
            return bad("gamma_discount and lambda_gae must lie in [0, 1]".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.grad_clip > 0.0) {
            return bad("grad_clip must be positive".into());
        }
        match self.algo {
            Algo::A2c | Algo::Ppo => {
                if self.rollout_length < 2 {
                    return bad("rollout_length must be at least 2".into());
                }
                if self.total_steps < self.rollout_length {
                    return bad("total_steps must cover at least one rollout".into());
                }
                if self.algo == Algo::Ppo && self.epochs_per_update == 0 {
                    return bad("ppo needs epochs_per_update >= 1".into());
                }
                if self.loss_kind == LossKind::CrossEntropy {
                    return Err(LossError::Unsupported {
                        kind: self.loss_kind,
                        algo: self.algo.name(),
                    }
                    .into());
                }
            }
            Algo::Supervised => {
                if self.epochs == 0 {
                    return bad("epochs must be positive".into());
                }
                if self.loss_kind == LossKind::Policy {
                    return Err(LossError::Unsupported {
                        kind: self.loss_kind,
                        algo: "supervised",
                    }
                    .into());
                }
            }
        }
        Ok(())
    }

    /// Stable `key=value` rendering used for hashing.
    pub fn canonical(&self) -> String {
        let l = &self.loss;
        format!(
            "loss_kind={}\nalgo={}\nalpha_scope={:?}\nalpha_entropy={:?}\ngamma_focal={:?}\nalpha_focal={:?}\nepsilon_clip={:?}\nalpha_value={:?}\nlr={:?}\ngamma_discount={:?}\nlambda_gae={:?}\nrollout_length={}\nbatch_size={}\ntotal_steps={}\nepochs={}\nepochs_per_update={}\nseed={}\nlr_schedule={}\nhidden={:?}\nactivation={}\ngrad_clip={:?}\n",
            self.loss_kind,
            self.algo,
            l.alpha_scope,
            l.alpha_entropy,
            l.gamma_focal,
            l.alpha_focal,
            l.epsilon_clip,
            l.alpha_value,
            self.lr,
            self.gamma_discount,
            self.lambda_gae,
            self.rollout_length,
            self.batch_size,
            self.total_steps,
            self.epochs,
            self.epochs_per_update,
            self.seed,
            self.lr_schedule.name(),
            self.hidden,
            self.activation.name(),
            self.grad_clip,
        )
    }

    /// Seeded initial network and the rng that continues from it.
    pub fn init_network(&self, input_dim: usize, outputs: usize) -> (Mlp, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let params = Mlp::new(input_dim, &self.hidden, outputs, self.activation, &mut rng);
        (params, rng)
    }
}

/// Diagnostics of one optimizer update.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct UpdateTrace {
    /// Advantages fed to the loss, after normalization.
    pub advantages: Vec<Real>,
    /// Per-transition policy-family loss values, in rollout order.
    pub policy_losses: Vec<Real>,
    /// PPO: per-minibatch clipped flags, and the sample indices they refer to.
    pub minibatches: Vec<MinibatchTrace>,
    /// A2C: network parameters (flat) before the update.
    pub params_before: Vec<Real>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MinibatchTrace {
    pub epoch: usize,
    pub indices: Vec<usize>,
    pub clipped: Vec<bool>,
    /// Network parameters (flat) before this minibatch's step.
    pub params_before: Vec<Real>,
}

/// Result of an RL training run.
#[derive(Clone, Debug)]
pub struct RlOutput {
    pub metrics: Vec<MetricsRow>,
    pub params: Mlp,
    /// Every transition collected, in order.
    pub transitions: Vec<crate::env::Transition>,
    pub traces: Vec<UpdateTrace>,
    /// Per update: the rollout samples PPO trained on (only with `record_traces`).
    pub samples: Vec<Vec<PpoSample>>,
}

pub(crate) fn grads_and_step(
    tape: &mut crate::Tape,
    root: crate::autodiff::Var,
    param_vars: &[crate::autodiff::Var],
    params: &mut Mlp,
    opt: Option<&mut crate::Optimizer>,
    grad_clip: Real,
    lr_scale: Real,
) -> Result<(), TrainError> {
    let Some(opt) = opt else {
        return Ok(());
    };
    let mut grads = tape.backward(root)?.collect(param_vars);
    crate::optim::clip_grad_norm(&mut grads, grad_clip);
    crate::optim::optimizer_step(params, &grads, opt, lr_scale)?;
    Ok(())
}

pub(crate) fn make_optimizer(config: &TrainConfig, params: &Mlp) -> Result<Option<crate::Optimizer>, TrainError> {
    if config.lr == 0.0 {
        return Ok(None);
    }
    Ok(Some(crate::Optimizer::new(
        crate::OptimizerConfig::adam(config.lr),
        params.num_params(),
    )?))
}
