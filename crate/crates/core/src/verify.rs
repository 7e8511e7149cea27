//! Loss identities and gradient checks, runnable as one suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Var;
use crate::gradcheck::{finite_difference_gradient, max_relative_error};
use crate::losses::*;
use crate::nn::softmax;
use crate::{Real, Tape};

/// Finite-difference step used by the gradient checks.
pub const FD_STEP: Real = 1e-6;
/// Derivatives smaller than this are compared on an absolute scale.
pub const GRAD_FLOOR: Real = 1e-4;
pub const IDENTITY_TOL: Real = 1e-12;
pub const GRADIENT_TOL: Real = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub trials: usize,
    /// Largest observed deviation (absolute for identities, relative for gradients).
    pub max_error: Real,
    pub tolerance: Real,
    pub passed: bool,
}

impl CheckResult {
    fn new(name: &str, trials: usize, max_error: Real, tolerance: Real) -> Self {
        Self {
            name: name.to_owned(),
            trials,
            max_error,
            tolerance,
            passed: max_error < tolerance,
        }
    }
}

/// Random logits of dimension 2..=10 turned into a probability vector.
fn random_probs(rng: &mut ChaCha8Rng, dims: usize) -> Vec<Real> {
    let logits: Vec<Real> = (0..dims).map(|_| rng.random_range(-4.0..4.0)).collect();
    let max = logits.iter().cloned().fold(Real::NEG_INFINITY, Real::max);
    let exps: Vec<Real> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: Real = exps.iter().sum();
    exps.iter().map(|e| e / total).collect()
}

/// Evaluates `f` on fresh leaves holding `probs`.
fn on_probs<F>(probs: &[Real], f: F) -> Real
where
    F: FnOnce(&mut Tape, &[Var]) -> Result<Var, LossError>,
{
    let mut tape = Tape::new();
    let vars = tape.vars(probs);
    let out = f(&mut tape, &vars).expect("loss inputs are valid");
    tape.value(out)
}

fn clamp(p: Real) -> Real {
    p.clamp(crate::scalar::PROB_FLOOR, crate::scalar::PROB_CEIL)
}

/// The five loss identities, each over `trials` seeded random inputs.
pub fn identity_checks(trials: usize, seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [0.0 as Real; 5];
    let mut bump = |k: usize, a: Real, b: Real| worst[k] = worst[k].max((a - b).abs());

    for t in 0..trials {
        let dims = 2 + t % 9;
        let probs = random_probs(&mut rng, dims);
        let i = rng.random_range(0..dims);
        let adv: Real = rng.random_range(-3.0..3.0);
        let alpha: Real = rng.random_range(0.0..1.0);
        let adv = if adv == 0.0 { 1.0 } else { adv };

        let scope = on_probs(&probs, |t, p| scope_supervised(t, p, i));
        let focal1 = on_probs(&probs, |t, p| focal_supervised(t, p, i, 1.0));
        bump(0, scope, focal1);

        let pel0 = on_probs(&probs, |t, p| policy_entropy_supervised(t, p, i, 0.0));
        let ce = on_probs(&probs, |t, p| cross_entropy(t, p, i));
        bump(1, pel0, ce);

        let scope_ac_v = on_probs(&probs, |t, p| scope_ac(t, p, i, adv, alpha));
        let bias: Real = (0..dims)
            .filter(|&j| j != i)
            .map(|j| clamp(probs[j]) * clamp(probs[j]).ln())
            .sum();
        let pel = on_probs(&probs, |t, p| policy_entropy_ac(t, p, i, adv, alpha));
        bump(2, scope_ac_v + alpha * bias, pel);

        // Draw a behaviour probability that leaves the ratio on the unclipped side.
        let eps: Real = rng.random_range(0.05..0.4);
        let p_i = clamp(probs[i]);
        // Unclipped iff p_k > p_i / (1 + ε) for A ≥ 0, p_k < p_i / (1 − ε) for A < 0.
        let (lo, hi) = if adv >= 0.0 {
            (p_i / (1.0 + eps), 1.0)
        } else {
            (0.0, (p_i / (1.0 - eps)).min(1.0))
        };
        let p_k = lo + (hi - lo) * rng.random_range(0.05..0.95);
        assert!(!ppo_is_clipped(p_i, p_k, adv, eps));
        let clipped_form = on_probs(&probs, |t, p| ppo_scope(t, p, p_k, i, adv, eps, alpha));
        let factored = -(p_i / p_k) * ppo_scope_factor(p_i, p_k, adv, alpha);
        bump(3, clipped_form, factored);

        let focal_ac1 = on_probs(&probs, |t, p| focal_ac(t, p, i, 1.0, 1.0, 1.0));
        bump(4, focal_ac1, scope);
    }
    let names = [
        "scope = focal(gamma=1)",
        "policy_entropy(alpha=0) = cross_entropy",
        "scope_ac + entropy bias = policy_entropy_ac",
        "ppo_scope = ratio-factored form (unclipped)",
        "focal_ac(A=1,alpha=1,gamma=1) = scope",
    ];
    names
        .iter()
        .zip(worst)
        .map(|(n, w)| CheckResult::new(n, trials, w, IDENTITY_TOL))
        .collect()
}

type LossFn = Box<dyn Fn(&mut Tape, &[Var]) -> Result<Var, LossError>>;

/// One instance of every loss with randomly drawn constants.
fn loss_zoo(rng: &mut ChaCha8Rng, dims: usize) -> Vec<(&'static str, LossFn)> {
    let i = rng.random_range(0..dims);
    let adv: Real = rng.random_range(-2.0..2.0);
    let alpha: Real = rng.random_range(0.0..1.0);
    let gamma = [0.5, 1.0, 2.0, 2.5][rng.random_range(0..4)];
    let eps: Real = rng.random_range(0.1..0.3);
    let p_k: Real = rng.random_range(0.05..1.0);
    vec![
        ("cross_entropy", Box::new(move |t: &mut Tape, p: &[Var]| cross_entropy(t, p, i)) as LossFn),
        ("focal_supervised", Box::new(move |t: &mut Tape, p: &[Var]| focal_supervised(t, p, i, gamma))),
        ("policy_entropy_supervised", Box::new(move |t: &mut Tape, p: &[Var]| policy_entropy_supervised(t, p, i, alpha))),
        ("scope_supervised", Box::new(move |t: &mut Tape, p: &[Var]| scope_supervised(t, p, i))),
        ("policy_loss_ac", Box::new(move |t: &mut Tape, p: &[Var]| policy_loss_ac(t, p, i, adv))),
        ("policy_entropy_ac", Box::new(move |t: &mut Tape, p: &[Var]| policy_entropy_ac(t, p, i, adv, alpha))),
        ("focal_ac", Box::new(move |t: &mut Tape, p: &[Var]| focal_ac(t, p, i, adv, alpha, gamma))),
        ("scope_ac", Box::new(move |t: &mut Tape, p: &[Var]| scope_ac(t, p, i, adv, alpha))),
        ("ppo_policy", Box::new(move |t: &mut Tape, p: &[Var]| ppo_policy(t, p, p_k, i, adv, eps))),
        ("ppo_policy_entropy", Box::new(move |t: &mut Tape, p: &[Var]| ppo_policy_entropy(t, p, p_k, i, adv, eps, alpha))),
        ("ppo_scope", Box::new(move |t: &mut Tape, p: &[Var]| ppo_scope(t, p, p_k, i, adv, eps, alpha))),
        ("ppo_focal", Box::new(move |t: &mut Tape, p: &[Var]| ppo_focal(t, p, p_k, i, adv, eps, alpha))),
    ]
}

fn loss_of_logits(f: &LossFn, logits: &[Real], tape: &mut Tape) -> (Var, Vec<Var>) {
    tape.clear();
    let z = tape.vars(logits);
    let probs = softmax(tape, &z).expect("finite logits");
    (f(tape, &probs).expect("valid loss inputs"), z)
}

/// Reverse-mode logit gradients against central differences for every loss.
pub fn gradient_checks(trials: usize, seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: Vec<(&'static str, Real)> = Vec::new();
    let mut tape = Tape::new();
    for t in 0..trials {
        let dims = 2 + t % 9;
        let logits: Vec<Real> = (0..dims).map(|_| rng.random_range(-3.0..3.0)).collect();
        for (k, (name, f)) in loss_zoo(&mut rng, dims).into_iter().enumerate() {
            let (root, z) = loss_of_logits(&f, &logits, &mut tape);
            let analytic = tape.backward(root).expect("root on tape").collect(&z);
            let numeric = finite_difference_gradient(
                |x: &[Real]| {
                    let mut tape = Tape::new();
                    let (root, _) = loss_of_logits(&f, x, &mut tape);
                    tape.value(root)
                },
                &logits,
                FD_STEP,
            );
            let err = max_relative_error(&analytic, &numeric, GRAD_FLOOR);
            if worst.len() <= k {
                worst.push((name, 0.0));
            }
            worst[k].1 = worst[k].1.max(err);
        }
    }
    worst
        .into_iter()
        .map(|(n, w)| CheckResult::new(&format!("gradient {n}"), trials, w, GRADIENT_TOL))
        .collect()
}

/// Logit gradient magnitude of the scope loss at the labelled index when
/// that class has probability `p` (other classes share the rest equally).
pub fn scope_logit_gradient(p: Real, dims: usize) -> Real {
    let z0 = ((dims - 1) as Real * p / (1.0 - p)).ln();
    let mut logits = vec![0.0; dims];
    logits[0] = z0;
    let mut tape = Tape::new();
    let z = tape.vars(&logits);
    let probs = softmax(&mut tape, &z).expect("finite logits");
    let root = scope_supervised(&mut tape, &probs, 0).expect("valid index");
    tape.backward(root).expect("root on tape").get(z[0]).abs()
}

/// Scope gradient at the labelled logit shrinks strictly as `p → 1`.
pub fn vanishing_gradient_check() -> CheckResult {
    let g: Vec<Real> = [0.99, 0.999, 0.9999].iter().map(|&p| scope_logit_gradient(p, 4)).collect();
    let decreasing = g.windows(2).all(|w| w[1] < w[0]);
    CheckResult {
        name: "scope gradient vanishes as p -> 1".into(),
        trials: g.len(),
        max_error: g[2],
        tolerance: g[0],
        passed: decreasing,
    }
}

/// On the clipped branch the PPO policy loss has exactly zero logit gradient.
pub fn clipped_gradient_check(trials: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: Real = 0.0;
    let mut done = 0;
    let mut tape = Tape::new();
    while done < trials {
        let dims = 2 + done % 9;
        let logits: Vec<Real> = (0..dims).map(|_| rng.random_range(-3.0..3.0)).collect();
        let i = rng.random_range(0..dims);
        let adv: Real = rng.random_range(-2.0..2.0);
        let p_k: Real = rng.random_range(0.01..1.0);
        tape.clear();
        let z = tape.vars(&logits);
        let probs = softmax(&mut tape, &z).expect("finite logits");
        if !ppo_is_clipped(clamp(tape.value(probs[i])), p_k, adv, 0.2) {
            continue;
        }
        let root = ppo_policy(&mut tape, &probs, p_k, i, adv, 0.2).expect("valid inputs");
        let grads = tape.backward(root).expect("root on tape").collect(&z);
        worst = grads.iter().fold(worst, |m, g| m.max(g.abs()));
        done += 1;
    }
    CheckResult::new("clipped ppo branch has zero gradient", trials, worst, IDENTITY_TOL)
}

/// Every check, with the seeded trial counts used by `scope-lab verify`.
pub fn run_identity_suite(seed: u64) -> Vec<CheckResult> {
    let mut out = identity_checks(1000, seed);
    out.extend(gradient_checks(100, seed.wrapping_add(1)));
    out.push(vanishing_gradient_check());
    out.push(clipped_gradient_check(200, seed.wrapping_add(2)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes() {
        for c in identity_checks(50, 3).into_iter().chain(gradient_checks(10, 4)) {
            assert!(c.passed, "{c:?}");
        }
        assert!(vanishing_gradient_check().passed);
        assert!(clipped_gradient_check(20, 5).passed);
    }

    #[test]
    fn scope_gradient_matches_closed_form() {
        // d/dz_0 of −(1−p) log p with p = softmax(z)_0 is (1−p)(p log p − (1 − p)).
        let p: Real = 0.9;
        let want = ((1.0 - p) * (p * p.ln() - (1.0 - p))).abs();
        assert!((scope_logit_gradient(p, 3) - want).abs() < 1e-12);
    }
}
