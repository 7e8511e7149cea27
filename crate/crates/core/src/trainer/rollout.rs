use rand::Rng;

use super::TrainError;
use crate::env::{EnvState, Environment, Transition};
use crate::nn::{evaluate, NnError};
use crate::{Mlp, Real, Tape};

/// An environment plus the state it was left in, so consecutive rollouts
/// continue the same episodes.
#[derive(Debug)]
pub struct Collector<E> {
    env: E,
    state: EnvState,
    running_return: Real,
    tape: Tape,
}

impl<E: Environment> Collector<E> {
    pub fn new(mut env: E) -> Self {
        let state = env.reset();
        Self {
            env,
            state,
            running_return: 0.0,
            tape: Tape::new(),
        }
    }

    pub fn env(&self) -> &E {
        &self.env
    }

    pub fn into_env(self) -> E {
        self.env
    }
}

#[derive(Clone, Debug, Default)]
pub struct Rollout {
    pub transitions: Vec<Transition>,
    /// Full action distribution at each transition's state.
    pub probs: Vec<Vec<Real>>,
    /// Value estimate of the state following the last transition (0 if it ended an episode).
    pub bootstrap_value: Real,
    /// Returns of the episodes that finished during this rollout.
    pub episode_returns: Vec<Real>,
}

/// Inverse-CDF draw from a categorical distribution.
pub(crate) fn sample_categorical(probs: &[Real], u: Real) -> usize {
    let mut acc = 0.0;
    for (j, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return j;
        }
    }
    probs.len() - 1
}

/// Runs the softmax policy for `rollout_length` steps, resetting the
/// environment whenever an episode ends.
pub fn collect_rollout<E: Environment, R: Rng + ?Sized>(
    collector: &mut Collector<E>,
    params: &Mlp,
    rollout_length: usize,
    rng: &mut R,
) -> Result<Rollout, TrainError> {
    let actions = collector.env.num_actions();
    if params.num_outputs() != actions {
        return Err(NnError::Shape {
            expected: actions,
            got: params.num_outputs(),
        }
        .into());
    }
    let mut out = Rollout {
        transitions: Vec::with_capacity(rollout_length),
        probs: Vec::with_capacity(rollout_length),
        ..Rollout::default()
    };
    for _ in 0..rollout_length {
        let policy = evaluate(params, &collector.state.observation, &mut collector.tape)?;
        let action = sample_categorical(&policy.probs, rng.random::<Real>());
        let step = collector.env.step(action)?;
        collector.running_return += step.reward;
        let state = if step.done {
            out.episode_returns.push(collector.running_return);
            collector.running_return = 0.0;
            collector.env.reset()
        } else {
            step.state
        };
        let prev = std::mem::replace(&mut collector.state, state);
        out.transitions.push(Transition {
            state: prev,
            action,
            reward: step.reward,
            done: step.done,
            behavior_prob: policy.probs[action],
            value_estimate: policy.value,
        });
        out.probs.push(policy.probs);
    }
    out.bootstrap_value = if out.transitions.last().is_some_and(|t| t.done) {
        0.0
    } else {
        evaluate(params, &collector.state.observation, &mut collector.tape)?.value
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{make_binary_maze, DOG};
    use crate::nn::Activation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn categorical_sampling_respects_cdf() {
        assert_eq!(sample_categorical(&[0.2, 0.5, 0.3], 0.0), 0);
        assert_eq!(sample_categorical(&[0.2, 0.5, 0.3], 0.2), 1);
        assert_eq!(sample_categorical(&[0.2, 0.5, 0.3], 0.69), 1);
        assert_eq!(sample_categorical(&[0.2, 0.5, 0.3], 0.999_999), 2);
    }

    #[test]
    fn length_and_behavior_probs() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let params = Mlp::new(1, &[8], 2, Activation::Tanh, &mut rng);
        let mut c = Collector::new(make_binary_maze(0.5, 1.0).unwrap());
        let r = collect_rollout(&mut c, &params, 64, &mut rng).unwrap();
        assert_eq!(r.transitions.len(), 64);
        assert_eq!(r.episode_returns.len(), 64);
        let at_init = evaluate(&params, &[1.0], &mut Tape::new()).unwrap();
        for t in &r.transitions {
            assert_eq!(t.behavior_prob, at_init.probs[t.action]);
            assert_eq!(t.value_estimate, at_init.value);
        }
    }

    #[test]
    fn near_deterministic_policy_repeats_its_action() {
        let mut params = Mlp::zeros(1, &[], 2, Activation::Tanh);
        params.policy_head.bias = vec![-40.0, 40.0];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut c = Collector::new(make_binary_maze(0.5, 1.0).unwrap());
        let r = collect_rollout(&mut c, &params, 50, &mut rng).unwrap();
        assert!(r.transitions.iter().all(|t| t.action == DOG));
    }

    #[test]
    fn output_dimension_must_match_actions() {
        let params = Mlp::zeros(1, &[], 3, Activation::Tanh);
        let mut c = Collector::new(make_binary_maze(0.5, 1.0).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(collect_rollout(&mut c, &params, 4, &mut rng).is_err());
    }
}
