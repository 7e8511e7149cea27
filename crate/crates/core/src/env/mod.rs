//! Desk-scale environments sharing one reset/step contract.

mod chain;
mod classify;
mod dataset;
mod maze;

pub use chain::{make_sparse_chain, SparseChain, LEFT, RIGHT};
pub use classify::{dataset_as_mdp, ClassificationEnv};
pub use dataset::{generate_dataset, Dataset, DatasetSpec};
pub use maze::{make_binary_maze, BinaryMaze, CAT, DOG};

use thiserror::Error;

use crate::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("action {action} out of range for {num_actions} actions")]
    InvalidAction { action: usize, num_actions: usize },
    #[error("step called before reset or after a terminal state")]
    NeedsReset,
    #[error("invalid environment config: {0}")]
    Config(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvState {
    pub observation: Vec<Real>,
    pub terminal: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub state: EnvState,
    pub reward: Real,
    /// Episode over, either at a terminal state or by truncation.
    pub done: bool,
}

/// One environment step as recorded by a rollout.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    /// State the action was taken in.
    pub state: EnvState,
    pub action: usize,
    pub reward: Real,
    pub done: bool,
    /// Probability the behaviour policy assigned to `action`.
    pub behavior_prob: Real,
    pub value_estimate: Real,
}

pub trait Environment: Send {
    fn num_actions(&self) -> usize;

    fn observation_dim(&self) -> usize;

    fn reset(&mut self) -> EnvState;

    fn step(&mut self, action: usize) -> Result<StepResult, EnvError>;

    /// Names of the buckets used by [`buffer_class_histogram`].
    fn outcome_labels(&self) -> Vec<String>;

    /// Bucket a transition falls into, if any.
    fn outcome(&self, transition: &Transition) -> Option<usize>;
}

/// Per-outcome counts over a transition buffer, for measuring imbalance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutcomeHistogram {
    pub labels: Vec<String>,
    pub counts: Vec<usize>,
}

impl OutcomeHistogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn count(&self, label: &str) -> usize {
        self.labels
            .iter()
            .position(|l| l == label)
            .map_or(0, |k| self.counts[k])
    }

    /// Share of bucket `k`; 0 for an empty histogram.
    pub fn fraction(&self, k: usize) -> Real {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            self.counts[k] as Real / total as Real
        }
    }
}

/// Counts terminal outcomes (maze) or visited states (chain).
pub fn buffer_class_histogram<E: Environment + ?Sized>(
    transitions: &[Transition],
    env: &E,
) -> OutcomeHistogram {
    let labels = env.outcome_labels();
    let mut counts = vec![0; labels.len()];
    for t in transitions {
        if let Some(k) = env.outcome(t) {
            counts[k] += 1;
        }
    }
    OutcomeHistogram { labels, counts }
}

fn check_action(action: usize, num_actions: usize) -> Result<(), EnvError> {
    if action < num_actions {
        Ok(())
    } else {
        Err(EnvError::InvalidAction {
            action,
            num_actions,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn episode(env: &mut BinaryMaze, action: usize) -> Transition {
        let state = env.reset();
        let r = env.step(action).unwrap();
        Transition {
            state,
            action,
            reward: r.reward,
            done: r.done,
            behavior_prob: 1.0,
            value_estimate: 0.0,
        }
    }

    #[test]
    fn histogram_of_deterministic_and_alternating_policies() {
        let mut env = make_binary_maze(0.5, 1.0).unwrap();
        let all_dog: Vec<_> = (0..10).map(|_| episode(&mut env, DOG)).collect();
        let h = buffer_class_histogram(&all_dog, &env);
        assert_eq!((h.count("Cat"), h.count("Dog")), (0, 10));

        let alt: Vec<_> = (0..10).map(|k| episode(&mut env, k % 2)).collect();
        let h = buffer_class_histogram(&alt, &env);
        assert_eq!((h.count("Cat"), h.count("Dog")), (5, 5));
        assert_eq!(h.fraction(1), 0.5);
    }
}
