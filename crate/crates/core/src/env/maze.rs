use super::{check_action, EnvError, EnvState, Environment, StepResult, Transition};
use crate::Real;

pub const CAT: usize = 0;
pub const DOG: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    Fresh,
    AtInit,
    Finished,
}

/// One-step maze: from `Init`, action 0 leads to the `Cat` terminal and
/// action 1 to the `Dog` terminal.
#[derive(Clone, Debug)]
pub struct BinaryMaze {
    reward_cat: Real,
    reward_dog: Real,
    phase: Phase,
}

pub fn make_binary_maze(reward_cat: Real, reward_dog: Real) -> Result<BinaryMaze, EnvError> {
    if !(reward_dog > reward_cat) {
        return Err(EnvError::Config(format!(
            "reward_dog ({reward_dog}) must exceed reward_cat ({reward_cat})"
        )));
    }
    Ok(BinaryMaze {
        reward_cat,
        reward_dog,
        phase: Phase::Fresh,
    })
}

impl Default for BinaryMaze {
    fn default() -> Self {
        make_binary_maze(0.5, 1.0).expect("default maze rewards are ordered")
    }
}

impl Environment for BinaryMaze {
    fn num_actions(&self) -> usize {
        2
    }

    fn observation_dim(&self) -> usize {
        1
    }

    fn reset(&mut self) -> EnvState {
        self.phase = Phase::AtInit;
        EnvState {
            observation: vec![1.0],
            terminal: false,
        }
    }

    fn step(&mut self, action: usize) -> Result<StepResult, EnvError> {
        if self.phase != Phase::AtInit {
            return Err(EnvError::NeedsReset);
        }
        check_action(action, 2)?;
        self.phase = Phase::Finished;
        let reward = if action == DOG {
            self.reward_dog
        } else {
            self.reward_cat
        };
        Ok(StepResult {
            state: EnvState {
                observation: vec![0.0],
                terminal: true,
            },
            reward,
            done: true,
        })
    }

    fn outcome_labels(&self) -> Vec<String> {
        vec!["Cat".into(), "Dog".into()]
    }

    fn outcome(&self, t: &Transition) -> Option<usize> {
        t.done.then_some(t.action)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn paths_pay_their_rewards() {
        let mut m = make_binary_maze(0.5, 1.0).unwrap();
        assert_eq!(m.reset().observation, vec![1.0]);
        let r = m.step(DOG).unwrap();
        assert!(r.done && r.state.terminal);
        assert_eq!(r.reward, 1.0);
        m.reset();
        assert_eq!(m.step(CAT).unwrap().reward, 0.5);
    }

    #[test]
    fn terminal_contract() {
        let mut m = BinaryMaze::default();
        assert_eq!(m.step(0).unwrap_err(), EnvError::NeedsReset);
        m.reset();
        m.step(1).unwrap();
        assert_eq!(m.step(1).unwrap_err(), EnvError::NeedsReset);
        m.reset();
        assert!(matches!(m.step(2), Err(EnvError::InvalidAction { .. })));
    }

    #[test]
    fn rejects_unordered_rewards() {
        assert!(make_binary_maze(1.0, 1.0).is_err());
        assert!(make_binary_maze(1.0, 0.5).is_err());
    }

    #[test]
    fn uniform_policy_visits_dog_half_the_time() {
        let mut m = BinaryMaze::default();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 20_000;
        let dogs = (0..n)
            .filter(|_| {
                m.reset();
                let a = rng.random_range(0..2);
                m.step(a).unwrap();
                a == DOG
            })
            .count();
        let frac = dogs as f64 / n as f64;
        let sigma = (0.25 / n as f64).sqrt();
        assert!((frac - 0.5).abs() < 3.0 * sigma, "dog fraction {frac}");
    }
}
