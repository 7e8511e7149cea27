use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_action, Dataset, EnvError, EnvState, Environment, StepResult, Transition};

/// Classification as a one-step episodic MDP: each training example starts
/// an episode, the action is the predicted class, the reward is 1 when it is
/// correct and 0 otherwise, and the episode ends immediately.
#[derive(Clone, Debug)]
pub struct ClassificationEnv {
    data: Arc<Dataset>,
    order: Vec<usize>,
    cursor: usize,
    current: Option<usize>,
    rng: ChaCha8Rng,
}

/// Wraps the training split of `dataset`; epochs are visited in a seeded shuffle.
pub fn dataset_as_mdp(dataset: Arc<Dataset>, seed: u64) -> Result<ClassificationEnv, EnvError> {
    if dataset.train.is_empty() {
        return Err(EnvError::Config("dataset has no training examples".into()));
    }
    let order = dataset.train.clone();
    Ok(ClassificationEnv {
        cursor: order.len(),
        order,
        data: dataset,
        current: None,
        rng: ChaCha8Rng::seed_from_u64(seed),
    })
}

impl ClassificationEnv {
    /// Index into the dataset of the example currently on offer.
    pub fn current_example(&self) -> Option<usize> {
        self.current
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }
}

impl Environment for ClassificationEnv {
    fn num_actions(&self) -> usize {
        self.data.num_classes
    }

    fn observation_dim(&self) -> usize {
        self.data.feature_dim
    }

    fn reset(&mut self) -> EnvState {
        if self.cursor >= self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let idx = self.order[self.cursor];
        self.cursor += 1;
        self.current = Some(idx);
        EnvState {
            observation: self.data.features[idx].clone(),
            terminal: false,
        }
    }

    fn step(&mut self, action: usize) -> Result<StepResult, EnvError> {
        let idx = self.current.ok_or(EnvError::NeedsReset)?;
        check_action(action, self.data.num_classes)?;
        self.current = None;
        let reward = if self.data.labels[idx] == action { 1.0 } else { 0.0 };
        Ok(StepResult {
            state: EnvState {
                observation: vec![0.0; self.data.feature_dim],
                terminal: true,
            },
            reward,
            done: true,
        })
    }

    fn outcome_labels(&self) -> Vec<String> {
        (0..self.data.num_classes).map(|c| format!("class{c}")).collect()
    }

    fn outcome(&self, t: &Transition) -> Option<usize> {
        Some(t.action)
    }
}
