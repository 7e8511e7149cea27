use rand::seq::SliceRandom;

use super::a2c::{rl_metrics_row, rollout_advantages};
use super::rollout::{collect_rollout, Collector};
use super::{grads_and_step, make_optimizer, MinibatchTrace, RlOutput, TrainConfig, TrainError, UpdateTrace};
use crate::autodiff::Var;
use crate::env::Environment;
use crate::losses::{ppo_is_clipped, ppo_loss, value_loss, LossKind};
use crate::nn::{forward_mlp, softmax};
use crate::scalar::{PROB_CEIL, PROB_FLOOR};
use crate::{LossConfig, Mlp, Real, Tape};

/// One stored rollout step, as PPO trains on it.
#[derive(Clone, Debug, PartialEq)]
pub struct PpoSample {
    pub observation: Vec<Real>,
    pub action: usize,
    /// Probability of `action` under the policy that collected the sample.
    pub behavior_prob: Real,
    /// Normalized advantage.
    pub advantage: Real,
    pub ret: Real,
}

/// The graph of one minibatch loss, left on the tape for the caller to
/// differentiate.
#[derive(Clone, Debug)]
pub struct MinibatchStats {
    pub root: Var,
    pub param_vars: Vec<Var>,
    pub loss: Real,
    /// Per sample: whether the clip bound won the PPO minimum.
    pub clipped: Vec<bool>,
    pub policy_losses: Vec<Real>,
    /// Current probability of each sample's action.
    pub probs: Vec<Real>,
}

/// Builds `mean(policy-family loss + α_value · (V − G)²)` over `batch`.
pub fn ppo_minibatch(
    tape: &mut Tape,
    params: &Mlp,
    kind: LossKind,
    cfg: &LossConfig,
    batch: &[&PpoSample],
) -> Result<MinibatchStats, TrainError> {
    tape.clear();
    let net = params.bind(tape);
    let param_vars = net.param_vars();
    let mut terms = Vec::with_capacity(batch.len());
    let mut clipped = Vec::with_capacity(batch.len());
    let mut policy_losses = Vec::with_capacity(batch.len());
    let mut chosen = Vec::with_capacity(batch.len());
    for s in batch {
        let (logits, value) = forward_mlp(tape, &net, &s.observation)?;
        let probs = softmax(tape, &logits)?;
        let p = tape
            .value(*probs.get(s.action).ok_or_else(|| {
                TrainError::Config(format!("sample action {} out of range", s.action))
            })?)
            .clamp(PROB_FLOOR, PROB_CEIL);
        chosen.push(p);
        clipped.push(ppo_is_clipped(p, s.behavior_prob, s.advantage, cfg.epsilon_clip));
        let pl = ppo_loss(kind, tape, &probs, s.behavior_prob, s.action, s.advantage, cfg)?;
        policy_losses.push(tape.value(pl));
        let vl = value_loss(tape, value, s.ret);
        let vl = tape.scale(vl, cfg.alpha_value);
        terms.push(tape.add(pl, vl));
    }
    let root = tape.mean(&terms);
    Ok(MinibatchStats {
        root,
        param_vars,
        loss: tape.value(root),
        clipped,
        policy_losses,
        probs: chosen,
    })
}

/// Clipped-surrogate PPO: per update, one rollout, then `epochs_per_update`
/// passes of shuffled minibatches over it.
pub fn train_ppo<E: Environment>(config: &TrainConfig, env: E) -> Result<RlOutput, TrainError> {
    config.validate()?;
    let (mut params, mut rng) = config.init_network(env.observation_dim(), env.num_actions());
    let mut opt = make_optimizer(config, &params)?;
    let mut collector = Collector::new(env);
    let updates = config.total_steps / config.rollout_length;
    let batches_per_epoch = config.rollout_length.div_ceil(config.batch_size);
    let total_steps = updates * config.epochs_per_update * batches_per_epoch;
    let mut step = 0;
    let mut tape = Tape::new();
    let mut out = RlOutput {
        metrics: Vec::with_capacity(updates),
        params: params.clone(),
        transitions: Vec::with_capacity(updates * config.rollout_length),
        traces: Vec::new(),
        samples: Vec::new(),
    };

    for u in 0..updates {
        let rollout = collect_rollout(&mut collector, &params, config.rollout_length, &mut rng)?;
        let batch = rollout_advantages(&rollout, config)?;
        let samples: Vec<PpoSample> = rollout
            .transitions
            .iter()
            .enumerate()
            .map(|(k, t)| PpoSample {
                observation: t.state.observation.clone(),
                action: t.action,
                behavior_prob: t.behavior_prob,
                advantage: batch.advantages[k],
                ret: batch.returns[k],
            })
            .collect();

        let mut trace = UpdateTrace {
            advantages: batch.advantages.clone(),
            ..UpdateTrace::default()
        };
        let mut loss_sum = 0.0;
        let mut loss_count = 0;
        let mut order: Vec<usize> = (0..samples.len()).collect();
        for epoch in 0..config.epochs_per_update {
            order.shuffle(&mut rng);
            for chunk in order.chunks(config.batch_size) {
                let mb: Vec<&PpoSample> = chunk.iter().map(|&i| &samples[i]).collect();
                let stats = ppo_minibatch(&mut tape, &params, config.loss_kind, &config.loss, &mb)?;
                loss_sum += stats.loss;
                loss_count += 1;
                if config.record_traces {
                    if epoch == 0 {
                        trace.policy_losses.extend_from_slice(&stats.policy_losses);
                    }
                    trace.minibatches.push(MinibatchTrace {
                        epoch,
                        indices: chunk.to_vec(),
                        clipped: stats.clipped.clone(),
                        params_before: params.to_flat(),
                    });
                }
                grads_and_step(
                    &mut tape,
                    stats.root,
                    &stats.param_vars,
                    &mut params,
                    opt.as_mut(),
                    config.grad_clip,
                    config.lr_schedule.factor(step, total_steps),
                )?;
                step += 1;
            }
        }

        out.metrics.push(rl_metrics_row(
            collector.env(),
            &rollout,
            config,
            (u + 1) * config.rollout_length,
            loss_sum / loss_count as Real,
        ));
        if config.record_traces {
            out.traces.push(trace);
            out.samples.push(samples);
        }
        out.transitions.extend(rollout.transitions);
    }
    out.params = params;
    Ok(out)
}
