//! Classification and policy-gradient losses over differentiable probability
//! vectors.
//!
//! Every function takes the softmax output `probs`, the chosen action (or
//! target class) `i`, and scalar constants. Advantages and behaviour-policy
//! probabilities are plain values, so no gradient flows through them.
//! Probabilities are clamped to `[PROB_FLOOR, PROB_CEIL]` before use.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::autodiff::{Tape, Var};
use crate::scalar::{Scalar, PROB_CEIL, PROB_FLOOR};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("index {index} out of range for {len} probabilities")]
    Index { index: usize, len: usize },
    #[error("invalid loss hyperparameter {name} = {value}")]
    Config { name: &'static str, value: f64 },
    #[error("behaviour probability must lie in (0, 1], got {0}")]
    BehaviorProb(f64),
    #[error("loss kind {kind} is not defined for {algo}")]
    Unsupported { kind: LossKind, algo: &'static str },
}

/// The loss family a trial trains with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LossKind {
    CrossEntropy,
    Focal,
    Policy,
    PolicyEntropy,
    Scope,
}

impl LossKind {
    pub const ALL: [LossKind; 5] = [
        LossKind::CrossEntropy,
        LossKind::Focal,
        LossKind::Policy,
        LossKind::PolicyEntropy,
        LossKind::Scope,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::CrossEntropy => "cross_entropy",
            LossKind::Focal => "focal",
            LossKind::Policy => "policy",
            LossKind::PolicyEntropy => "policy_entropy",
            LossKind::Scope => "scope",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown loss kind `{s}`"))
    }
}

/// Loss hyperparameters.
///
/// `gamma_focal` is the focal focusing exponent; the MDP discount is a
/// separate setting of the trainer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossConfig<T> {
    pub alpha_scope: T,
    pub alpha_entropy: T,
    pub gamma_focal: T,
    pub alpha_focal: T,
    pub epsilon_clip: T,
    pub alpha_value: T,
}

impl<T: Scalar> LossConfig<T> {
    /// Reinforcement-learning defaults (ε = 0.2 is the usual PPO choice).
    pub fn rl_defaults() -> Self {
        Self {
            alpha_scope: T::lit(0.01),
            alpha_entropy: T::lit(0.01),
            gamma_focal: T::lit(2.0),
            alpha_focal: T::lit(2.0),
            epsilon_clip: T::lit(0.2),
            alpha_value: T::lit(0.5),
        }
    }

    /// Supervised classification defaults.
    pub fn supervised_defaults() -> Self {
        Self {
            alpha_scope: T::one(),
            alpha_entropy: T::lit(8e-6),
            gamma_focal: T::lit(2.0),
            alpha_focal: T::lit(2.0),
            epsilon_clip: T::lit(0.2),
            alpha_value: T::lit(0.5),
        }
    }

    pub fn validate(&self) -> Result<(), LossError> {
        let fields = [
            ("alpha_scope", self.alpha_scope),
            ("alpha_entropy", self.alpha_entropy),
            ("gamma_focal", self.gamma_focal),
            ("alpha_focal", self.alpha_focal),
            ("epsilon_clip", self.epsilon_clip),
            ("alpha_value", self.alpha_value),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value >= T::zero()) {
                return Err(LossError::Config {
                    name,
                    value: value.to_f64_lossy(),
                });
            }
        }
        if self.epsilon_clip <= T::zero() {
            return Err(LossError::Config {
                name: "epsilon_clip",
                value: self.epsilon_clip.to_f64_lossy(),
            });
        }
        Ok(())
    }
}

fn clamp_prob<T: Scalar>(tape: &mut Tape<T>, p: Var) -> Var {
    tape.clamp(p, T::lit(PROB_FLOOR), T::lit(PROB_CEIL))
}

/// Clamped `p_i` and `log p_i`.
fn chosen<T: Scalar>(tape: &mut Tape<T>, probs: &[Var], i: usize) -> Result<(Var, Var), LossError> {
    let p = *probs.get(i).ok_or(LossError::Index {
        index: i,
        len: probs.len(),
    })?;
    let pc = clamp_prob(tape, p);
    let lp = tape.ln(pc);
    Ok((pc, lp))
}

fn non_negative<T: Scalar>(name: &'static str, value: T) -> Result<(), LossError> {
    if value >= T::zero() && value.is_finite() {
        Ok(())
    } else {
        Err(LossError::Config {
            name,
            value: value.to_f64_lossy(),
        })
    }
}

/// `−log p_i`
pub fn cross_entropy<T: Scalar>(tape: &mut Tape<T>, probs: &[Var], i: usize) -> Result<Var, LossError> {
    let (_, lp) = chosen(tape, probs, i)?;
    Ok(tape.neg(lp))
}

/// `−(1 − p_i)^γ · log p_i`
pub fn focal_supervised<T: Scalar>(
    tape: &mut Tape<T>,
    probs: &[Var],
    i: usize,
    gamma_focal: T,
) -> Result<Var, LossError> {
    non_negative("gamma_focal", gamma_focal)?;
    let (pc, lp) = chosen(tape, probs, i)?;
    let base = tape.rsub_const(T::one(), pc);
    let w = tape.signed_pow(base, gamma_focal);
    let wl = tape.mul(w, lp);
    Ok(tape.neg(wl))
}

/// `−A · log p_i`
pub fn policy_loss_ac<T: Scalar>(
    tape: &mut Tape<T>,
    probs: &[Var],
    i: usize,
    advantage: T,
) -> Result<Var, LossError> {
    let (_, lp) = chosen(tape, probs, i)?;
    let al = tape.scale(lp, advantage);
    Ok(tape.neg(al))
}

/// `Σ_j p_j · log p_j` (negative entropy).
pub fn entropy_term<T: Scalar>(tape: &mut Tape<T>, probs: &[Var]) -> Var {
    let clamped: Vec<Var> = probs.iter().map(|&p| clamp_prob(tape, p)).collect();
    let logs: Vec<Var> = clamped.iter().map(|&p| tape.ln(p)).collect();
    let terms: Vec<Var> = clamped
        .iter()
        .zip(&logs)
        .map(|(&p, &l)| tape.mul(p, l))
        .collect();
    tape.sum(&terms)
}

/// `−A · log p_i + α Σ_j p_j log p_j`
pub fn policy_entropy_ac<T: Scalar>(
    tape: &mut Tape<T>,
    probs: &[Var],
    i: usize,
    advantage: T,
    alpha_entropy: T,
) -> Result<Var, LossError> {
    non_negative("alpha_entropy", alpha_entropy)?;
    let policy = policy_loss_ac(tape, probs, i, advantage)?;
    let ent = entropy_term(tape, probs);
    let ent = tape.scale(ent, alpha_entropy);
    Ok(tape.add(policy, ent))
}

/// `−log p_i + α Σ_j p_j log p_j`
pub fn policy_entropy_supervised<T: Scalar>(
    tape: &mut Tape<T>,
    probs: &[Var],
    i: usize,
    alpha_entropy: T,
) -> Result<Var, LossError> {
    policy_entropy_ac(tape, probs, i, T::one(), alpha_entropy)
}

/// `−(A − α p_i)^γ · log p_i`.
///
/// A negative base with a non-integer `γ` uses `sign(base)·|base|^γ`.
pub fn focal_ac<T: Scalar>(
    tape: &mut Tape<T>,
    probs: &[Var],
    i: usize,
    advantage: T,
    alpha_focal: T,
    gamma_focal: T,
) -> Result<Var, LossError> {
    non_negative("alpha_focal", alpha_focal)?;
    non_negative("gamma_focal", gamma_focal)?;
    let (pc, lp) = chosen(tape, probs, i)?;
    let ap = tape.scale(pc, alpha_focal);
    let base = tape.rsub_const(advantage, ap);
    let w = tape.signed_pow(base, gamma_focal);
    let wl = tape.mul(w, lp);
    Ok(tape.neg(wl))
}

/// `−(A − α p_i) · log p_i`; the gradient flows through both factors.
pub fn scope_ac<T: Scalar>(
    tape: &mut Tape<T>,
    probs: &[Var],
    i: usize,
    advantage: T,
    alpha_scope: T,
) -> Result<Var, LossError> {
    non_negative("alpha_scope", alpha_scope)?;
    let (pc, lp) = chosen(tape, probs, i)?;
    let ap = tape.scale(pc, alpha_scope);
    let factor = tape.rsub_const(advantage, ap);
    let fl = tape.mul(factor, lp);
    Ok(tape.neg(fl))
}

/// `−(1 − p_i) · log p_i`
pub fn scope_supervised<T: Scalar>(
    tape: &mut Tape<T>,
    probs: &[Var],
    i: usize,
) -> Result<Var, LossError> {
    scope_ac(tape, probs, i, T::one(), T::one())
}

/// PPO clip bound: `A(1 + ε)` for `A ≥ 0`, `A(1 − ε)` otherwise.
pub fn ppo_clip_g<T: Scalar>(epsilon_clip: T, advantage: T) -> T {
    if advantage >= T::zero() {
        advantage * (T::one() + epsilon_clip)
    } else {
        advantage * (T::one() - epsilon_clip)
    }
}

/// Whether the clip bound attains the PPO minimum, i.e.
/// `p_i / p_k_i · A ≥ g(ε, A)`.
pub fn ppo_is_clipped<T: Scalar>(p_i: T, p_k_i: T, advantage: T, epsilon_clip: T) -> bool {
    p_i / p_k_i * advantage >= ppo_clip_g(epsilon_clip, advantage)
}

fn check_behavior<T: Scalar>(p_k_i: T) -> Result<(), LossError> {
    if p_k_i > T::zero() && p_k_i <= T::one() {
        Ok(())
    } else {
        Err(LossError::BehaviorProb(p_k_i.to_f64_lossy()))
    }
}

/// `M = min(p_i / p_k_i · A, g(ε, A))`, plus the clamped `p_i` and `log p_i`.
fn ppo_min<T: Scalar>(
    tape: &mut Tape<T>,
    probs: &[Var],
    p_k_i: T,
    i: usize,
    advantage: T,
    epsilon_clip: T,
) -> Result<(Var, Var, Var), LossError> {
    check_behavior(p_k_i)?;
    if !(epsilon_clip > T::zero()) {
        return Err(LossError::Config {
            name: "epsilon_clip",
            value: epsilon_clip.to_f64_lossy(),
        });
    }
    let (pc, lp) = chosen(tape, probs, i)?;
    let ratio = tape.div_const(pc, p_k_i);
    let surrogate = tape.scale(ratio, advantage);
    let m = tape.min_const(surrogate, ppo_clip_g(epsilon_clip, advantage));
    Ok((m, pc, lp))
}

/// `−min(p_i / p_k_i · A, g(ε, A))`
pub fn ppo_policy<T: Scalar>(
    tape: &mut Tape<T>,
    probs: &[Var],
    p_k_i: T,
    i: usize,
    advantage: T,
    epsilon_clip: T,
) -> Result<Var, LossError> {
    let (m, _, _) = ppo_min(tape, probs, p_k_i, i, advantage, epsilon_clip)?;
    Ok(tape.neg(m))
}

/// PPO policy loss plus `α Σ_j p_j log p_j`.
pub fn ppo_policy_entropy<T: Scalar>(
    tape: &mut Tape<T>,
    probs: &[Var],
    p_k_i: T,
    i: usize,
    advantage: T,
    epsilon_clip: T,
    alpha_entropy: T,
) -> Result<Var, LossError> {
    non_negative("alpha_entropy", alpha_entropy)?;
    let policy = ppo_policy(tape, probs, p_k_i, i, advantage, epsilon_clip)?;
    let ent = entropy_term(tape, probs);
    let ent = tape.scale(ent, alpha_entropy);
    Ok(tape.add(policy, ent))
}

/// PPO policy loss plus `α p_i log p_i` (the chosen-action entropy term only).
pub fn ppo_scope<T: Scalar>(
    tape: &mut Tape<T>,
    probs: &[Var],
    p_k_i: T,
    i: usize,
    advantage: T,
    epsilon_clip: T,
    alpha_scope: T,
) -> Result<Var, LossError> {
    non_negative("alpha_scope", alpha_scope)?;
    let (m, pc, lp) = ppo_min(tape, probs, p_k_i, i, advantage, epsilon_clip)?;
    let policy = tape.neg(m);
    let plp = tape.mul(pc, lp);
    let scope = tape.scale(plp, alpha_scope);
    Ok(tape.add(policy, scope))
}

/// Scaling factor `A − α · p_k_i · log p_i` of the unclipped PPO scope loss.
pub fn ppo_scope_factor<T: Scalar>(p_i: T, p_k_i: T, advantage: T, alpha_scope: T) -> T {
    advantage - alpha_scope * p_k_i * p_i.ln()
}

/// Focal loss for PPO with the focusing exponent fixed at 2:
/// `−M·A + 2α·M·p_i − α²·p_i²·log p_i` with `M` the PPO minimum.
pub fn ppo_focal<T: Scalar>(
    tape: &mut Tape<T>,
    probs: &[Var],
    p_k_i: T,
    i: usize,
    advantage: T,
    epsilon_clip: T,
    alpha_focal: T,
) -> Result<Var, LossError> {
    non_negative("alpha_focal", alpha_focal)?;
    let (m, pc, lp) = ppo_min(tape, probs, p_k_i, i, advantage, epsilon_clip)?;
    let first = tape.scale(m, -advantage);
    let mp = tape.mul(m, pc);
    let second = tape.scale(mp, T::lit(2.0) * alpha_focal);
    let p2 = tape.square(pc);
    let p2l = tape.mul(p2, lp);
    let third = tape.scale(p2l, -(alpha_focal * alpha_focal));
    let s = tape.add(first, second);
    Ok(tape.add(s, third))
}

/// `(V − G)²` with the return target `G` held constant.
pub fn value_loss<T: Scalar>(tape: &mut Tape<T>, value: Var, target: T) -> Var {
    let diff = tape.add_const(value, -target);
    tape.square(diff)
}

/// Supervised dispatch: cross entropy, focal, policy-and-entropy, scope.
pub fn supervised_loss<T: Scalar>(
    kind: LossKind,
    tape: &mut Tape<T>,
    probs: &[Var],
    label: usize,
    cfg: &LossConfig<T>,
) -> Result<Var, LossError> {
    match kind {
        LossKind::CrossEntropy => cross_entropy(tape, probs, label),
        LossKind::Focal => focal_supervised(tape, probs, label, cfg.gamma_focal),
        LossKind::PolicyEntropy => {
            policy_entropy_supervised(tape, probs, label, cfg.alpha_entropy)
        }
        LossKind::Scope => scope_supervised(tape, probs, label),
        LossKind::Policy => Err(LossError::Unsupported {
            kind,
            algo: "supervised",
        }),
    }
}

/// Actor-critic dispatch: policy, policy-and-entropy, scope, focal.
pub fn actor_critic_loss<T: Scalar>(
    kind: LossKind,
    tape: &mut Tape<T>,
    probs: &[Var],
    action: usize,
    advantage: T,
    cfg: &LossConfig<T>,
) -> Result<Var, LossError> {
    match kind {
        LossKind::Policy => policy_loss_ac(tape, probs, action, advantage),
        LossKind::PolicyEntropy => {
            policy_entropy_ac(tape, probs, action, advantage, cfg.alpha_entropy)
        }
        LossKind::Scope => scope_ac(tape, probs, action, advantage, cfg.alpha_scope),
        LossKind::Focal => focal_ac(
            tape,
            probs,
            action,
            advantage,
            cfg.alpha_focal,
            cfg.gamma_focal,
        ),
        LossKind::CrossEntropy => Err(LossError::Unsupported {
            kind,
            algo: "actor-critic",
        }),
    }
}

/// PPO dispatch: policy, policy-and-entropy, scope, focal.
pub fn ppo_loss<T: Scalar>(
    kind: LossKind,
    tape: &mut Tape<T>,
    probs: &[Var],
    behavior_prob: T,
    action: usize,
    advantage: T,
    cfg: &LossConfig<T>,
) -> Result<Var, LossError> {
    let eps = cfg.epsilon_clip;
    match kind {
        LossKind::Policy => ppo_policy(tape, probs, behavior_prob, action, advantage, eps),
        LossKind::PolicyEntropy => ppo_policy_entropy(
            tape,
            probs,
            behavior_prob,
            action,
            advantage,
            eps,
            cfg.alpha_entropy,
        ),
        LossKind::Scope => ppo_scope(
            tape,
            probs,
            behavior_prob,
            action,
            advantage,
            eps,
            cfg.alpha_scope,
        ),
        LossKind::Focal => ppo_focal(
            tape,
            probs,
            behavior_prob,
            action,
            advantage,
            eps,
            cfg.alpha_focal,
        ),
        LossKind::CrossEntropy => Err(LossError::Unsupported { kind, algo: "ppo" }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN2: f64 = std::f64::consts::LN_2;

    fn eval<F>(probs: &[f64], f: F) -> f64
    where
        F: FnOnce(&mut Tape<f64>, &[Var]) -> Result<Var, LossError>,
    {
        let mut t = Tape::new();
        let p = t.vars(probs);
        let l = f(&mut t, &p).unwrap();
        t.value(l)
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn cross_entropy_examples() {
        assert!(eval(&[1.0, 0.0], |t, p| cross_entropy(t, p, 0)).abs() < 1e-11);
        assert!(close(eval(&[0.5, 0.5], |t, p| cross_entropy(t, p, 0)), 0.6931472, 5e-8));
        let mut t = Tape::<f64>::new();
        let p = t.vars(&[0.5, 0.5]);
        assert_eq!(
            cross_entropy(&mut t, &p, 2).unwrap_err(),
            LossError::Index { index: 2, len: 2 }
        );
    }

    #[test]
    fn focal_supervised_examples() {
        let probs = [0.3, 0.7];
        let ce = eval(&probs, |t, p| cross_entropy(t, p, 1));
        assert_eq!(eval(&probs, |t, p| focal_supervised(t, p, 1, 0.0)), ce);
        let v = eval(&[0.5, 0.5], |t, p| focal_supervised(t, p, 0, 2.0));
        assert!(close(v, 0.1732868, 5e-8));
        assert_eq!(
            eval(&probs, |t, p| focal_supervised(t, p, 1, 1.0)),
            eval(&probs, |t, p| scope_supervised(t, p, 1))
        );
        let mut t = Tape::<f64>::new();
        let p = t.vars(&probs);
        assert!(matches!(
            focal_supervised(&mut t, &p, 0, -1.0),
            Err(LossError::Config { .. })
        ));
    }

    #[test]
    fn policy_loss_examples() {
        let probs = [0.5, 0.5];
        assert_eq!(eval(&probs, |t, p| policy_loss_ac(t, p, 0, 0.0)), 0.0);
        assert_eq!(
            eval(&probs, |t, p| policy_loss_ac(t, p, 0, 1.0)),
            eval(&probs, |t, p| cross_entropy(t, p, 0))
        );
        assert!(close(eval(&probs, |t, p| policy_loss_ac(t, p, 0, 2.0)), 1.3862944, 5e-8));
    }

    #[test]
    fn entropy_term_examples() {
        assert!(close(eval(&[0.5, 0.5], |t, p| Ok(entropy_term(t, p))), -0.6931472, 5e-8));
        assert!(eval(&[1.0, 0.0, 0.0], |t, p| Ok(entropy_term(t, p))).abs() < 1e-10);
    }

    #[test]
    fn policy_entropy_examples() {
        let probs = [0.5, 0.5];
        assert_eq!(
            eval(&probs, |t, p| policy_entropy_ac(t, p, 0, 1.3, 0.0)),
            eval(&probs, |t, p| policy_loss_ac(t, p, 0, 1.3))
        );
        let v = eval(&probs, |t, p| policy_entropy_ac(t, p, 0, 1.0, 0.01));
        assert!(close(v, 0.6862157, 5e-8));
        let v = eval(&probs, |t, p| policy_entropy_supervised(t, p, 0, 8e-6));
        assert!(close(v, 0.6931416, 5e-8));
        assert!(eval(&[1.0, 0.0], |t, p| policy_entropy_supervised(t, p, 0, 0.01)).abs() < 1e-9);
        assert_eq!(
            eval(&[0.2, 0.8], |t, p| policy_entropy_supervised(t, p, 1, 0.0)),
            eval(&[0.2, 0.8], |t, p| cross_entropy(t, p, 1))
        );
    }

    #[test]
    fn focal_ac_examples() {
        let probs = [0.35, 0.65];
        assert_eq!(
            eval(&probs, |t, p| focal_ac(t, p, 1, 1.0, 1.0, 1.0)),
            eval(&probs, |t, p| scope_ac(t, p, 1, 1.0, 1.0))
        );
        let v = eval(&probs, |t, p| focal_ac(t, p, 1, 1.7, 0.0, 0.6));
        assert!(close(v, -(1.7f64.powf(0.6)) * 0.65f64.ln(), 1e-14));
        let v = eval(&[0.5, 0.5], |t, p| focal_ac(t, p, 0, 2.0, 2.0, 2.0));
        assert!(close(v, LN2, 1e-15));
    }

    #[test]
    fn focal_ac_negative_base_fractional_gamma() {
        // base = −1 − 0.5 = −1.5; sign-preserving power keeps the loss real.
        let v = eval(&[0.5, 0.5], |t, p| focal_ac(t, p, 0, -1.0, 1.0, 0.5));
        assert!(v.is_finite());
        assert!(close(v, 1.5f64.sqrt() * 0.5f64.ln(), 1e-14));
    }

    #[test]
    fn scope_examples() {
        let v = eval(&[0.5, 0.5], |t, p| scope_ac(t, p, 0, 1.0, 0.01));
        assert!(close(v, 0.6896814, 5e-8));
        assert!(eval(&[1.0, 0.0], |t, p| scope_supervised(t, p, 0)).abs() < 1e-11);
        assert!(close(eval(&[0.5, 0.5], |t, p| scope_supervised(t, p, 0)), 0.3465736, 5e-8));
    }

    #[test]
    fn clip_bound() {
        assert!(close(ppo_clip_g(0.2, 1.0), 1.2, 1e-15));
        assert!(close(ppo_clip_g(0.2, -1.0), -0.8, 1e-15));
        assert_eq!(ppo_clip_g(0.37, 0.0), 0.0);
    }

    #[test]
    fn ppo_policy_examples() {
        let v = eval(&[0.6, 0.4], |t, p| ppo_policy(t, p, 0.5, 0, 1.0, 0.2));
        assert!(close(v, -1.2, 1e-12));
        let mut t = Tape::new();
        let p = t.vars(&[0.8, 0.2]);
        let l = ppo_policy(&mut t, &p, 0.5, 0, 1.0, 0.2).unwrap();
        assert!(close(t.value(l), -1.2, 1e-12));
        assert_eq!(t.backward(l).unwrap().get(p[0]), 0.0);
        let v = eval(&[0.5, 0.5], |t, p| ppo_policy(t, p, 0.5, 0, 1.0, 0.2));
        assert_eq!(v, -1.0);
        let mut t = Tape::new();
        let p = t.vars(&[0.5, 0.5]);
        assert_eq!(
            ppo_policy(&mut t, &p, 0.0, 0, 1.0, 0.2).unwrap_err(),
            LossError::BehaviorProb(0.0)
        );
    }

    #[test]
    fn ppo_entropy_and_scope_examples() {
        let probs = [0.6, 0.4];
        assert_eq!(
            eval(&probs, |t, p| ppo_policy_entropy(t, p, 0.5, 0, 1.0, 0.2, 0.0)),
            eval(&probs, |t, p| ppo_policy(t, p, 0.5, 0, 1.0, 0.2))
        );
        let v = eval(&probs, |t, p| ppo_policy_entropy(t, p, 0.5, 0, 1.0, 0.2, 0.01));
        assert!(close(v, -1.2067301, 5e-8));
        let v = eval(&probs, |t, p| ppo_scope(t, p, 0.5, 0, 1.0, 0.2, 0.01));
        assert!(close(v, -1.2030650, 5e-8));
        assert_eq!(
            eval(&probs, |t, p| ppo_scope(t, p, 0.5, 0, 1.0, 0.2, 0.0)),
            eval(&probs, |t, p| ppo_policy(t, p, 0.5, 0, 1.0, 0.2))
        );
    }

    #[test]
    fn ppo_scope_factor_examples() {
        assert_eq!(ppo_scope_factor(0.3, 0.4, 0.7, 0.0), 0.7);
        assert!(close(ppo_scope_factor(0.9, 0.5, 1.0, 0.01), 1.0005268, 5e-8));
    }

    #[test]
    fn ppo_focal_examples() {
        let probs = [0.6, 0.4];
        let v = eval(&probs, |t, p| ppo_focal(t, p, 0.5, 0, 1.0, 0.2, 2.0));
        // −1.2 + 2·2·1.2·0.6 − 4·0.36·ln 0.6
        assert!(close(v, 2.4155889, 5e-8));
        let a = 1.7;
        let zero_alpha = eval(&probs, |t, p| ppo_focal(t, p, 0.5, 0, a, 0.2, 0.0));
        let policy = eval(&probs, |t, p| ppo_policy(t, p, 0.5, 0, a, 0.2));
        assert!(close(zero_alpha, a * policy, 1e-14));
        let v = eval(&probs, |t, p| ppo_focal(t, p, 0.5, 0, 0.0, 0.2, 2.0));
        assert!(close(v, -4.0 * 0.36 * 0.6f64.ln(), 1e-14));
    }

    #[test]
    fn value_loss_examples() {
        let mut t = Tape::<f64>::new();
        let v = t.var(1.0);
        let l = value_loss(&mut t, v, 1.0);
        assert_eq!(t.value(l), 0.0);
        let v = t.var(0.0);
        let l = value_loss(&mut t, v, 1.0);
        assert_eq!(t.value(l), 1.0);
        let v = t.var(0.5);
        let l = value_loss(&mut t, v, 1.0);
        assert_eq!(0.5 * t.value(l), 0.125);
    }

    #[test]
    fn dispatch_rejects_foreign_kinds() {
        let cfg = LossConfig::<f64>::rl_defaults();
        let mut t = Tape::new();
        let p = t.vars(&[0.5, 0.5]);
        assert!(supervised_loss(LossKind::Policy, &mut t, &p, 0, &cfg).is_err());
        assert!(actor_critic_loss(LossKind::CrossEntropy, &mut t, &p, 0, 1.0, &cfg).is_err());
        assert!(ppo_loss(LossKind::CrossEntropy, &mut t, &p, 0.5, 0, 1.0, &cfg).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(LossConfig::<f64>::rl_defaults().validate().is_ok());
        assert!(LossConfig::<f64>::supervised_defaults().validate().is_ok());
        let mut c = LossConfig::<f64>::rl_defaults();
        c.epsilon_clip = 0.0;
        assert!(c.validate().is_err());
        c.epsilon_clip = 0.2;
        c.alpha_scope = -1.0;
        assert!(c.validate().is_err());
        c.alpha_scope = f64::NAN;
        assert!(c.validate().is_err());
    }

    #[test]
    fn loss_kind_names_roundtrip() {
        for k in LossKind::ALL {
            assert_eq!(k.name().parse::<LossKind>().unwrap(), k);
        }
        assert!("hinge".parse::<LossKind>().is_err());
    }
}
