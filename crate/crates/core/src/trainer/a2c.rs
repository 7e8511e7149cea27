use super::rollout::{collect_rollout, Collector, Rollout};
use super::{grads_and_step, make_optimizer, policy_entropy_metric, MetricsRow, RlOutput, TrainConfig, TrainError, UpdateTrace};
use crate::advantage::{compute_gae, normalize_advantages};
use crate::env::{buffer_class_histogram, Environment};
use crate::losses::{actor_critic_loss, value_loss};
use crate::nn::{forward_mlp, softmax};
use crate::{AdvantageBatch, Real, RolloutSegment, Tape};

/// GAE over a rollout followed by per-batch z-score normalization.
pub(crate) fn rollout_advantages(
    rollout: &Rollout,
    config: &TrainConfig,
) -> Result<AdvantageBatch, TrainError> {
    let ts = &rollout.transitions;
    let mut values: Vec<Real> = ts.iter().map(|t| t.value_estimate).collect();
    values.push(rollout.bootstrap_value);
    let segment = RolloutSegment {
        rewards: ts.iter().map(|t| t.reward).collect(),
        values,
        dones: ts.iter().map(|t| t.done).collect(),
        gamma_discount: config.gamma_discount,
        lambda_gae: config.lambda_gae,
    };
    let raw = compute_gae(&segment)?;
    Ok(normalize_advantages(&raw)?)
}

pub(crate) fn rl_metrics_row<E: Environment>(
    env: &E,
    rollout: &Rollout,
    config: &TrainConfig,
    step: usize,
    loss_value: Real,
) -> MetricsRow {
    let hist = buffer_class_histogram(&rollout.transitions, env);
    let dog_fraction = (hist.labels == ["Cat", "Dog"]).then(|| hist.fraction(1));
    let episode_return_mean = (!rollout.episode_returns.is_empty()).then(|| {
        rollout.episode_returns.iter().sum::<Real>() / rollout.episode_returns.len() as Real
    });
    MetricsRow {
        step,
        loss_kind: config.loss_kind,
        seed: config.seed,
        episode_return_mean,
        policy_entropy: policy_entropy_metric(&rollout.probs),
        loss_value,
        dog_fraction,
        val_accuracy: None,
        outcome_histogram: hist.counts,
    }
}

/// Synchronous advantage actor-critic: one gradient step per rollout on
/// `mean(policy-family loss + α_value · (V − G)²)`.
pub fn train_a2c<E: Environment>(config: &TrainConfig, env: E) -> Result<RlOutput, TrainError> {
    config.validate()?;
    let (mut params, mut rng) = config.init_network(env.observation_dim(), env.num_actions());
    let mut opt = make_optimizer(config, &params)?;
    let mut collector = Collector::new(env);
    let updates = config.total_steps / config.rollout_length;
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

        tape.clear();
        let net = params.bind(&mut tape);
        let param_vars = net.param_vars();
        let mut terms = Vec::with_capacity(rollout.transitions.len());
        let mut policy_losses = Vec::with_capacity(rollout.transitions.len());
        for (k, t) in rollout.transitions.iter().enumerate() {
            let (logits, value) = forward_mlp(&mut tape, &net, &t.state.observation)?;
            let probs = softmax(&mut tape, &logits)?;
            let pl = actor_critic_loss(
                config.loss_kind,
                &mut tape,
                &probs,
                t.action,
                batch.advantages[k],
                &config.loss,
            )?;
            policy_losses.push(tape.value(pl));
            let vl = value_loss(&mut tape, value, batch.returns[k]);
            let vl = tape.scale(vl, config.loss.alpha_value);
            terms.push(tape.add(pl, vl));
        }
        let root = tape.mean(&terms);
        let loss_value = tape.value(root);
        if config.record_traces {
            out.traces.push(UpdateTrace {
                advantages: batch.advantages.clone(),
                policy_losses,
                minibatches: Vec::new(),
                params_before: params.to_flat(),
            });
        }
        grads_and_step(
            &mut tape,
            root,
            &param_vars,
            &mut params,
            opt.as_mut(),
            config.grad_clip,
            config.lr_schedule.factor(u, updates),
        )?;

        out.metrics.push(rl_metrics_row(
            collector.env(),
            &rollout,
            config,
            (u + 1) * config.rollout_length,
            loss_value,
        ));
        out.transitions.extend(rollout.transitions);
    }
    out.params = params;
    Ok(out)
}
