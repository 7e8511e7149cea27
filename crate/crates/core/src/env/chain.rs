use super::{check_action, EnvError, EnvState, Environment, StepResult, Transition};
use crate::Real;

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;

/// Corridor of `n` cells; the agent starts at cell 0 and is paid
/// `goal_reward` on reaching cell `n − 1`. Every step costs `step_penalty`
/// and episodes are cut off after `max_steps`.
#[derive(Clone, Debug)]
pub struct SparseChain {
    n: usize,
    step_penalty: Real,
    goal_reward: Real,
    max_steps: usize,
    pos: usize,
    steps: usize,
    live: bool,
}

pub fn make_sparse_chain(
    n: usize,
    step_penalty: Real,
    goal_reward: Real,
    max_steps: usize,
) -> Result<SparseChain, EnvError> {
    if n < 3 {
        return Err(EnvError::Config(format!("chain length must be at least 3, got {n}")));
    }
    if !(step_penalty <= 0.0) || !(goal_reward > 0.0) || max_steps == 0 {
        return Err(EnvError::Config(format!(
            "need step_penalty <= 0, goal_reward > 0, max_steps > 0 (got {step_penalty}, {goal_reward}, {max_steps})"
        )));
    }
    Ok(SparseChain {
        n,
        step_penalty,
        goal_reward,
        max_steps,
        pos: 0,
        steps: 0,
        live: false,
    })
}

impl Default for SparseChain {
    fn default() -> Self {
        make_sparse_chain(10, -0.01, 1.0, 50).expect("default chain is valid")
    }
}

impl SparseChain {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn goal_reward(&self) -> Real {
        self.goal_reward
    }

    fn observe(&self, terminal: bool) -> EnvState {
        let mut observation = vec![0.0; self.n];
        observation[self.pos] = 1.0;
        EnvState {
            observation,
            terminal,
        }
    }
}

impl Environment for SparseChain {
    fn num_actions(&self) -> usize {
        2
    }

    fn observation_dim(&self) -> usize {
        self.n
    }

    fn reset(&mut self) -> EnvState {
        self.pos = 0;
        self.steps = 0;
        self.live = true;
        self.observe(false)
    }

    fn step(&mut self, action: usize) -> Result<StepResult, EnvError> {
        if !self.live {
            return Err(EnvError::NeedsReset);
        }
        check_action(action, 2)?;
        self.steps += 1;
        if action == RIGHT {
            self.pos += 1;
        } else {
            self.pos = self.pos.saturating_sub(1);
        }
        let at_goal = self.pos == self.n - 1;
        let mut reward = self.step_penalty;
        if at_goal {
            reward += self.goal_reward;
        }
        let done = at_goal || self.steps >= self.max_steps;
        self.live = !done;
        Ok(StepResult {
            state: self.observe(at_goal),
            reward,
            done,
        })
    }

    fn outcome_labels(&self) -> Vec<String> {
        (0..self.n).map(|k| format!("s{k}")).collect()
    }

    fn outcome(&self, t: &Transition) -> Option<usize> {
        t.state
            .observation
            .iter()
            .position(|&x| x == 1.0)
    }
}
