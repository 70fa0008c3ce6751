use proptest::prelude::*;
use silab_core::mdp::{exact_q, optimal_q, random_mdp, random_policy, RandomMdpSpec};
use silab_core::operators::{
    alpha_threshold, combined_fixed_point, contraction_bound, estimate_contraction,
    mixture_fixed_point, nstep_fixed_point, Bellman, Combined, FixedPointOptions, NStep, QOperator,
};
use silab_core::seeding::rng_from_seed;
use silab_core::{FiniteMdp, OperatorSpec, Policy, QTable};

fn instance(seed: u64) -> (FiniteMdp, Policy, Policy) {
    let mdp = random_mdp(&RandomMdpSpec::default(), seed).unwrap();
    let mut rng = rng_from_seed(seed.wrapping_add(1));
    let pi = random_policy(5, 3, 1.0, &mut rng);
    let mu = random_policy(5, 3, 1.0, &mut rng);
    (mdp, pi, mu)
}

fn contractive_spec() -> impl Strategy<Value = OperatorSpec> {
    (0.0f64..=1.0, 0.0f64..0.95, 1usize..7)
        .prop_map(|(a, b, n)| OperatorSpec::new(a, b, n).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sampled_contraction_respects_bound(seed in any::<u64>(), spec in contractive_spec()) {
        let (mdp, pi, mu) = instance(seed);
        let op = Combined::new(&mdp, spec, &pi, &mu).unwrap();
        let est = estimate_contraction(&op, (5, 3), 0.9, 200, seed).unwrap();
        prop_assert!(est <= contraction_bound(&spec, 0.9) + 1e-9);
    }

    #[test]
    fn fixed_point_is_sandwiched(seed in any::<u64>(), spec in contractive_spec()) {
        let (mdp, pi, mu) = instance(seed);
        let q = combined_fixed_point(&mdp, &spec, &pi, &mu, FixedPointOptions::default()).unwrap().q;
        let lower = mixture_fixed_point(&mdp, &pi, &mu, spec.n, spec.eta().unwrap()).unwrap();
        prop_assert!(q.min_diff(&lower) >= -1e-8);
        prop_assert!(optimal_q(&mdp).unwrap().min_diff(&q) >= -1e-8);
    }

    #[test]
    fn combined_operator_is_monotone(seed in any::<u64>(), spec in contractive_spec(), shift in 0.0f64..3.0) {
        let (mdp, pi, mu) = instance(seed);
        let op = Combined::new(&mdp, spec, &pi, &mu).unwrap();
        let q1 = QTable::from_fn(5, 3, |x, a| ((x * 3 + a) as f64 * 0.37).sin() * 4.0);
        let bump = QTable::from_fn(5, 3, |x, a| shift * (((x + 2 * a) % 3) as f64));
        let q2 = q1.zip_with(&bump, |a, b| a + b);
        prop_assert!(op.apply(&q2).min_diff(&op.apply(&q1)) >= -1e-12);
    }

    #[test]
    fn unbiased_when_beta_is_zero(seed in any::<u64>(), alpha in 0.0f64..=1.0, n in 1usize..7) {
        let (mdp, pi, mu) = instance(seed);
        let spec = OperatorSpec::new(alpha, 0.0, n).unwrap();
        let q = combined_fixed_point(&mdp, &spec, &pi, &mu, FixedPointOptions::default()).unwrap().q;
        prop_assert!(q.max_abs_diff(&exact_q(&mdp, &pi).unwrap()) < 1e-10);
    }

    #[test]
    fn pure_nstep_reduction(seed in any::<u64>(), n in 1usize..7) {
        let (mdp, pi, mu) = instance(seed);
        let spec = OperatorSpec::new(1.0, 1.0, n).unwrap();
        let q = combined_fixed_point(&mdp, &spec, &pi, &mu, FixedPointOptions::default()).unwrap().q;
        prop_assert!(q.max_abs_diff(&nstep_fixed_point(&mdp, &pi, &mu, n).unwrap()) < 1e-10);
    }

    #[test]
    fn on_policy_fixed_point_is_q_pi(seed in any::<u64>(), spec in contractive_spec()) {
        let (mdp, pi, _) = instance(seed);
        let q = combined_fixed_point(&mdp, &spec, &pi, &pi, FixedPointOptions::default()).unwrap().q;
        prop_assert!(q.max_abs_diff(&exact_q(&mdp, &pi).unwrap()) < 1e-10);
    }

    #[test]
    fn threshold_separates_fast_contraction(gamma in 0.5f64..0.99, n in 2usize..10, beta in 0.01f64..0.99, offset in 1e-3f64..0.5) {
        let thr = alpha_threshold(gamma, n);
        let above = OperatorSpec::new((thr + offset).min(1.0), beta, n).unwrap();
        if above.alpha > thr {
            prop_assert!(contraction_bound(&above, gamma) < gamma);
        }
        let below = OperatorSpec::new((thr - offset).max(0.0), beta, n).unwrap();
        if below.alpha < thr {
            prop_assert!(contraction_bound(&below, gamma) > gamma);
        }
    }

    #[test]
    fn nstep_operator_contracts_at_gamma_to_the_n(seed in any::<u64>(), n in 1usize..7) {
        let (mdp, pi, mu) = instance(seed);
        let op = NStep::new(&mdp, &pi, &mu, n).unwrap();
        let est = estimate_contraction(&op, (5, 3), 0.9, 200, seed ^ 7).unwrap();
        prop_assert!(est <= 0.9f64.powi(n as i32) + 1e-12);
    }
}

#[test]
fn bellman_contraction_is_attained() {
    let (mdp, pi, _) = instance(3);
    let op = Bellman::new(&mdp, &pi).unwrap();
    // A constant shift is contracted by exactly γ.
    let q = QTable::zeros(5, 3);
    let shifted = QTable::constant(5, 3, 1.0);
    let ratio = op.apply(&shifted).max_abs_diff(&op.apply(&q));
    assert!((ratio - 0.9).abs() < 1e-12);
}

#[test]
fn bound_formula_examples() {
    for n in [1, 2, 5] {
        let spec = OperatorSpec::new(0.3, 0.0, n).unwrap();
        assert!((contraction_bound(&spec, 0.9) - 0.9).abs() < 1e-15);
    }
    let spec = OperatorSpec::new(1.0, 1.0, 5).unwrap();
    assert!((contraction_bound(&spec, 0.9) - 0.59049).abs() < 1e-15);
    assert_eq!(alpha_threshold(0.9, 1), 1.0);
    assert!((alpha_threshold(0.9, 2) - 0.1 / 0.19).abs() < 1e-15);
}
