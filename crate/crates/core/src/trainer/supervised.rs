use rand::seq::SliceRandom;

use super::{grads_and_step, make_optimizer, policy_entropy_metric, MetricsRow, TrainConfig, TrainError};
use crate::env::Dataset;
use crate::losses::supervised_loss;
use crate::nn::{evaluate, forward_mlp, softmax};
use crate::{Mlp, Real, Tape};

#[derive(Clone, Debug)]
pub struct SupervisedOutput {
    /// One row per epoch, `step` being the number of completed epochs.
    pub metrics: Vec<MetricsRow>,
    /// Parameters from the epoch with the highest validation accuracy
    /// (earliest epoch on ties).
    pub best_params: Mlp,
    pub best_val_accuracy: Real,
    pub best_epoch: usize,
    pub final_params: Mlp,
}

/// Argmax class for each row of `features`.
pub fn predict<'a, I>(params: &Mlp, features: I) -> Result<Vec<usize>, TrainError>
where
    I: IntoIterator<Item = &'a [Real]>,
{
    let mut tape = Tape::new();
    features
        .into_iter()
        .map(|x| Ok(evaluate(params, x, &mut tape)?.argmax()))
        .collect()
}

pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Real {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    hits as Real / labels.len() as Real
}

fn split_eval(params: &Mlp, data: &Dataset, split: &[usize]) -> Result<(Real, Real), TrainError> {
    let mut tape = Tape::new();
    let mut hits = 0;
    let mut probs = Vec::with_capacity(split.len());
    for &i in split {
        let out = evaluate(params, &data.features[i], &mut tape)?;
        if out.argmax() == data.labels[i] {
            hits += 1;
        }
        probs.push(out.probs);
    }
    let acc = if split.is_empty() { 0.0 } else { hits as Real / split.len() as Real };
    Ok((acc, policy_entropy_metric(&probs)))
}

/// Minibatch training on the train split with per-epoch validation; keeps
/// the best-validation parameters.
pub fn train_supervised(config: &TrainConfig, data: &Dataset) -> Result<SupervisedOutput, TrainError> {
    config.validate()?;
    if data.train.is_empty() {
        return Err(TrainError::Config("dataset has no training examples".into()));
    }
    let (mut params, mut rng) = config.init_network(data.feature_dim, data.num_classes);
    let mut opt = make_optimizer(config, &params)?;
    let per_epoch = data.train.len().div_ceil(config.batch_size);
    let total_steps = per_epoch * config.epochs;
    let mut step = 0;
    let mut tape = Tape::new();
    let mut order = data.train.clone();
    let mut metrics = Vec::with_capacity(config.epochs);
    let mut best = (Real::NEG_INFINITY, 0, params.clone());

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            tape.clear();
            let net = params.bind(&mut tape);
            let param_vars = net.param_vars();
            let mut terms = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let (logits, _) = forward_mlp(&mut tape, &net, &data.features[i])?;
                let probs = softmax(&mut tape, &logits)?;
                terms.push(supervised_loss(config.loss_kind, &mut tape, &probs, data.labels[i], &config.loss)?);
            }
            let root = tape.mean(&terms);
            loss_sum += tape.value(root) * chunk.len() as Real;
            grads_and_step(
                &mut tape,
                root,
                &param_vars,
                &mut params,
                opt.as_mut(),
                config.grad_clip,
                config.lr_schedule.factor(step, total_steps),
            )?;
            step += 1;
        }
        let (val_acc, entropy) = split_eval(&params, data, &data.val)?;
        if val_acc > best.0 {
            best = (val_acc, epoch, params.clone());
        }
        metrics.push(MetricsRow {
            step: epoch,
            loss_kind: config.loss_kind,
            seed: config.seed,
            episode_return_mean: None,
            policy_entropy: entropy,
            loss_value: loss_sum / data.train.len() as Real,
            dog_fraction: None,
            val_accuracy: Some(val_acc),
            outcome_histogram: Vec::new(),
        });
    }
    Ok(SupervisedOutput {
        metrics,
        best_val_accuracy: best.0,
        best_epoch: best.1,
        best_params: best.2,
        final_params: params,
    })
}
