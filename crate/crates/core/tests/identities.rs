use proptest::prelude::*;
use scope_lab_core::autodiff::Var;
use scope_lab_core::losses::*;
use scope_lab_core::verify::*;
use scope_lab_core::Tape;

#[test]
fn identities_hold_over_a_thousand_inputs() {
    for seed in [0, 1] {
        for check in identity_checks(1000, seed) {
            assert!(check.passed, "{check:?}");
        }
    }
}

#[test]
fn every_loss_matches_central_differences() {
    for check in gradient_checks(100, 7) {
        assert!(check.passed, "{check:?}");
        assert_eq!(check.trials, 100);
    }
}

#[test]
fn scope_gradient_shrinks_towards_certainty() {
    let g: Vec<f64> = [0.99, 0.999, 0.9999].iter().map(|&p| scope_logit_gradient(p, 5)).collect();
    assert!(g[0] > g[1] && g[1] > g[2], "{g:?}");
    // Closed form (1−p)(1 − p − p ln p) as an independent check.
    for (&p, &got) in [0.99f64, 0.999, 0.9999].iter().zip(&g) {
        let want = (1.0 - p) * (1.0 - p - p * p.ln());
        assert!((got - want).abs() < 1e-12 * want.max(1.0), "p={p}: {got} vs {want}");
    }
}

#[test]
fn clipped_branch_has_exactly_zero_gradient() {
    let c = clipped_gradient_check(500, 11);
    assert!(c.passed, "{c:?}");
    assert_eq!(c.max_error, 0.0);
}

#[test]
fn suite_is_fast_and_green() {
    let t = std::time::Instant::now();
    let all = run_identity_suite(42);
    assert!(all.iter().all(|c| c.passed), "{all:#?}");
    assert!(t.elapsed().as_secs_f64() < 5.0);
}

fn eval(probs: &[f64], f: impl FnOnce(&mut Tape, &[Var]) -> Result<Var, LossError>) -> f64 {
    let mut tape = Tape::new();
    let v = tape.vars(probs);
    let out = f(&mut tape, &v).unwrap();
    tape.value(out)
}

fn prob_vector() -> impl Strategy<Value = (Vec<f64>, usize)> {
    prop::collection::vec(0.001f64..1.0, 2..=10).prop_flat_map(|raw| {
        let total: f64 = raw.iter().sum();
        let probs: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let n = probs.len();
        (Just(probs), 0..n)
    })
}

/// Gradient of `f` with respect to the probability leaves.
fn prob_grads(probs: &[f64], f: impl FnOnce(&mut Tape, &[Var]) -> Result<Var, LossError>) -> Vec<f64> {
    let mut tape = Tape::new();
    let v = tape.vars(probs);
    let out = f(&mut tape, &v).unwrap();
    tape.backward(out).unwrap().collect(&v)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn scope_equals_focal_with_unit_gamma((probs, i) in prob_vector()) {
        let a = eval(&probs, |t, p| scope_supervised(t, p, i));
        let b = eval(&probs, |t, p| focal_supervised(t, p, i, 1.0));
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn entropy_free_policy_loss_is_cross_entropy((probs, i) in prob_vector()) {
        let a = eval(&probs, |t, p| policy_entropy_supervised(t, p, i, 0.0));
        let b = eval(&probs, |t, p| cross_entropy(t, p, i));
        prop_assert_eq!(a, b);
    }

    #[test]
    fn unit_focal_actor_critic_is_scope((probs, i) in prob_vector()) {
        let a = eval(&probs, |t, p| focal_ac(t, p, i, 1.0, 1.0, 1.0));
        let b = eval(&probs, |t, p| scope_supervised(t, p, i));
        prop_assert_eq!(a, b);
    }

    #[test]
    fn ppo_entropy_splits_into_scope_plus_bias(
        (probs, i) in prob_vector(),
        adv in -3.0f64..3.0,
        p_k in 0.05f64..1.0,
        alpha in 0.0f64..1.0,
    ) {
        let full = eval(&probs, |t, p| ppo_policy_entropy(t, p, p_k, i, adv, 0.2, alpha));
        let scope = eval(&probs, |t, p| ppo_scope(t, p, p_k, i, adv, 0.2, alpha));
        let bias: f64 = probs.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &q)| q * q.ln()).sum();
        prop_assert!((full - (scope + alpha * bias)).abs() < 1e-12);
    }

    #[test]
    fn zero_alpha_collapses_to_ppo_policy(
        (probs, i) in prob_vector(),
        adv in -3.0f64..3.0,
        p_k in 0.05f64..1.0,
    ) {
        let base = eval(&probs, |t, p| ppo_policy(t, p, p_k, i, adv, 0.2));
        prop_assert_eq!(eval(&probs, |t, p| ppo_scope(t, p, p_k, i, adv, 0.2, 0.0)), base);
        prop_assert_eq!(eval(&probs, |t, p| ppo_policy_entropy(t, p, p_k, i, adv, 0.2, 0.0)), base);
        let focal = eval(&probs, |t, p| ppo_focal(t, p, p_k, i, adv, 0.2, 0.0));
        prop_assert!((focal - adv * base).abs() < 1e-12);
    }

    #[test]
    fn losses_stay_finite_inside_the_clamp(
        (probs, i) in prob_vector(),
        adv in -5.0f64..5.0,
        p_k in 1e-6f64..1.0,
    ) {
        let cfg = LossConfig::rl_defaults();
        for kind in [LossKind::Policy, LossKind::PolicyEntropy, LossKind::Scope, LossKind::Focal] {
            prop_assert!(eval(&probs, |t, p| actor_critic_loss(kind, t, p, i, adv, &cfg)).is_finite());
            prop_assert!(eval(&probs, |t, p| ppo_loss(kind, t, p, p_k, i, adv, &cfg)).is_finite());
        }
        let cfg = LossConfig::supervised_defaults();
        for kind in [LossKind::CrossEntropy, LossKind::Focal, LossKind::PolicyEntropy, LossKind::Scope] {
            prop_assert!(eval(&probs, |t, p| supervised_loss(kind, t, p, i, &cfg)).is_finite());
        }
    }
}

/// dL/dp_i of the unclipped PPO policy and scope losses at one configuration.
fn chosen_grads(p_i: f64, p_k: f64, adv: f64, alpha: f64) -> (f64, f64) {
    let probs = [p_i, 1.0 - p_i];
    assert!(!ppo_is_clipped(p_i, p_k, adv, 0.2));
    let policy = prob_grads(&probs, |t, p| ppo_policy(t, p, p_k, 0, adv, 0.2))[0];
    let scope = prob_grads(&probs, |t, p| ppo_scope(t, p, p_k, 0, adv, 0.2, alpha))[0];
    (policy, scope)
}

#[test]
fn scope_damps_gradient_for_confident_main_model_with_positive_advantage() {
    let (policy, scope) = chosen_grads(0.9, 0.8, 1.0, 0.01);
    assert!(scope.abs() < policy.abs(), "{scope} vs {policy}");
}

#[test]
fn scope_damps_gradient_when_worker_is_less_certain_and_advantage_positive() {
    let (policy, scope) = chosen_grads(0.7, 0.65, 0.5, 0.01);
    assert!(scope.abs() < policy.abs(), "{scope} vs {policy}");
}

#[test]
fn scope_damps_gradient_when_worker_is_more_certain_and_advantage_negative() {
    let (policy, scope) = chosen_grads(0.3, 0.35, -1.0, 0.01);
    assert!(scope.abs() < policy.abs(), "{scope} vs {policy}");
}

#[test]
fn scope_factor_examples() {
    assert_eq!(ppo_scope_factor(0.9, 0.5, 1.0, 0.0), 1.0);
    assert!((ppo_scope_factor(0.9f64, 0.5, 1.0, 0.01) - 1.0005268).abs() < 5e-8);
    // The factor times the ratio is the derivative-free form of the scope loss.
    let probs = [0.6, 0.4];
    let direct = eval(&probs, |t, p| ppo_scope(t, p, 0.55, 0, 1.0, 0.2, 0.01));
    let factored = -(0.6 / 0.55) * ppo_scope_factor(0.6, 0.55, 1.0, 0.01);
    assert!((direct - factored).abs() < 1e-12);
}
