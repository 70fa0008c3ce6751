use proptest::prelude::*;
use silab_core::bounds::{
    check_instance_bounds, nstep_lower_bound, nstep_lower_bound_maxent, nstep_value_lower_bound,
    BoundKind,
};
use silab_core::maxent::{maxent_q_of_policy, MaxEntConfig};
use silab_core::mdp::{
    exact_q, exact_v, greedy_policy, optimal_q, random_mdp, random_policy, BatchConfig,
    RandomMdpSpec,
};
use silab_core::operators::apply_nstep;
use silab_core::seeding::rng_from_seed;
use silab_core::{FiniteMdp, Policy, QTable};

fn instance(seed: u64, conc: f64) -> (FiniteMdp, Policy, Policy) {
    let mdp = random_mdp(&RandomMdpSpec::default(), seed).unwrap();
    let mut rng = rng_from_seed(seed.wrapping_mul(3).wrapping_add(1));
    let pi = random_policy(5, 3, conc, &mut rng);
    let mu = random_policy(5, 3, conc, &mut rng);
    (mdp, pi, mu)
}

/// Independent evaluation of `E_μ[Σ_{t<n} γ^t r_t + γ^n Q^π(x_n, a_n)]` by
/// propagating the joint state-action distribution forward.
fn forward_lower_bound(mdp: &FiniteMdp, pi: &Policy, mu: &Policy, n: usize) -> QTable {
    let q_pi = exact_q(mdp, pi).unwrap();
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    QTable::from_fn(ns, na, |x0, a0| {
        let mut dist = vec![0.0; ns * na];
        dist[x0 * na + a0] = 1.0;
        let mut total = 0.0;
        let mut disc = 1.0;
        for _ in 0..n {
            let mut next = vec![0.0; ns * na];
            for x in 0..ns {
                for a in 0..na {
                    let w = dist[x * na + a];
                    if w == 0.0 {
                        continue;
                    }
                    total += disc * w * mdp.reward(x, a);
                    for (y, p) in mdp.next_dist(x, a).iter().enumerate() {
                        for b in 0..na {
                            next[y * na + b] += w * p * mu.prob(y, b);
                        }
                    }
                }
            }
            dist = next;
            disc *= mdp.gamma();
        }
        total
            + disc
                * dist
                    .iter()
                    .zip(q_pi.values())
                    .map(|(w, q)| w * q)
                    .sum::<f64>()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn all_bounds_hold(seed in any::<u64>(), conc in 0.2f64..4.0, n in 1usize..30, c in 0.0f64..1.5) {
        let batch = BatchConfig { policy_concentration: conc, ..Default::default() };
        let inst = batch.instance(seed, 0).unwrap();
        for report in check_instance_bounds(&inst, &[n], &[0.0, c]).unwrap() {
            prop_assert!(report.passed(), "{:?}", report);
        }
    }

    #[test]
    fn lower_bound_matches_forward_oracle(seed in any::<u64>(), n in 1usize..8) {
        let (mdp, pi, mu) = instance(seed, 1.0);
        let lb = nstep_lower_bound(&mdp, &pi, &mu, n).unwrap();
        prop_assert!(lb.max_abs_diff(&forward_lower_bound(&mdp, &pi, &mu, n)) < 1e-10);
    }

    #[test]
    fn zero_temperature_matches_standard(seed in any::<u64>(), n in 1usize..8) {
        let (mdp, pi, mu) = instance(seed, 1.0);
        let soft = nstep_lower_bound_maxent(&mdp, &pi, &mu, n, 0.0).unwrap();
        prop_assert!(soft.max_abs_diff(&nstep_lower_bound(&mdp, &pi, &mu, n).unwrap()) < 1e-10);
        let q_ent = maxent_q_of_policy(&mdp, &pi, &MaxEntConfig::new(0.0)).unwrap();
        prop_assert!(q_ent.max_abs_diff(&exact_q(&mdp, &pi).unwrap()) < 1e-10);
    }

    #[test]
    fn long_horizon_envelope(seed in any::<u64>(), n in 1usize..40) {
        let (mdp, pi, mu) = instance(seed, 1.0);
        let lb = nstep_lower_bound(&mdp, &pi, &mu, n).unwrap();
        let q_pi = exact_q(&mdp, &pi).unwrap();
        let q_mu = exact_q(&mdp, &mu).unwrap();
        let envelope = 0.9f64.powi(n as i32) * q_pi.max_abs_diff(&q_mu);
        prop_assert!(lb.max_abs_diff(&q_mu) <= envelope + 1e-10);
    }

    #[test]
    fn on_policy_bound_is_exact(seed in any::<u64>(), n in 1usize..10) {
        let (mdp, pi, _) = instance(seed, 1.0);
        let lb = nstep_lower_bound(&mdp, &pi, &pi, n).unwrap();
        prop_assert!(lb.max_abs_diff(&exact_q(&mdp, &pi).unwrap()) < 1e-10);
        let v = nstep_value_lower_bound(&mdp, &pi, &pi, n).unwrap();
        prop_assert!(v.max_abs_diff(&exact_v(&mdp, &pi).unwrap()) < 1e-10);
    }
}

#[test]
fn bounds_are_tight_for_optimal_policies() {
    let mdp = random_mdp(&RandomMdpSpec::default(), 23).unwrap();
    let q_star = optimal_q(&mdp).unwrap();
    let star = greedy_policy(&q_star);
    for n in [1, 3, 10] {
        let lb = nstep_lower_bound(&mdp, &star, &star, n).unwrap();
        assert!(lb.max_abs_diff(&q_star) < 1e-10);
        let op = apply_nstep(&mdp, &star, &star, n, &q_star).unwrap();
        assert!(op.max_abs_diff(&q_star) < 1e-10);
    }
}

#[test]
fn every_bound_kind_is_reported() {
    let inst = BatchConfig::default().instance(7, 0).unwrap();
    let reports = check_instance_bounds(&inst, &[1, 2], &[0.0, 0.1]).unwrap();
    for kind in [
        BoundKind::MaxEntQ,
        BoundKind::StandardQ,
        BoundKind::OperatorQ,
        BoundKind::Value,
    ] {
        assert!(reports.iter().any(|r| r.kind == kind));
    }
    assert_eq!(reports.len(), 2 * 2 + 3 * 2);
}
