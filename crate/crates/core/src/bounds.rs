//! Exact n-step lower bounds on optimal value functions.
//!
//! With the entropy-augmented behaviour backup
//! `B_μ q(x,a) = r(x,a) + γ E_{x'}[c H^μ(x') + E_{a'~μ} q(x',a')]`,
//! the max-entropy bound is `L_ent^{π,μ,n} = B_μ^n Q_ent^π` and satisfies
//! `L_ent^{π,μ,n} ≤ Q_ent^{π*_ent}` for every n. At `c = 0` this is the
//! standard bound `L^{π,μ,n} ≤ Q^{π*}`.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maxent::{entropy_backup, maxent_q_of_policy_linear, soft_optimal_q, MaxEntConfig};
use crate::mdp::solve::backup_with_values;
use crate::mdp::{
    exact_q, exact_v, optimal_q, optimal_v, BatchConfig, FiniteMdp, Instance, Policy, QTable,
    VTable,
};
use crate::operators::apply_nstep;

/// Allowed negative slack for an inequality to count as satisfied.
pub const BOUND_SLACK: f64 = 1e-8;

fn check_horizon(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidHorizon(0))
    } else {
        Ok(())
    }
}

/// `L_ent^{π,μ,n}`: n entropy-augmented μ-backups applied to `Q_ent^π`.
pub fn nstep_lower_bound_maxent(
    mdp: &FiniteMdp,
    pi: &Policy,
    mu: &Policy,
    n: usize,
    c: f64,
) -> Result<QTable> {
    check_horizon(n)?;
    mdp.check_policy(mu)?;
    let mut q = maxent_q_of_policy_linear(mdp, pi, c)?;
    for _ in 0..n {
        q = entropy_backup(mdp, mu, c, &q)?;
    }
    Ok(q)
}

/// `L^{π,μ,n}(x,a) = E_μ[Σ_{t<n} γ^t r_t + γ^n Q^π(x_n,a_n)]`.
pub fn nstep_lower_bound(mdp: &FiniteMdp, pi: &Policy, mu: &Policy, n: usize) -> Result<QTable> {
    nstep_lower_bound_maxent(mdp, pi, mu, n, 0.0)
}

/// `E_μ[Σ_{t<n} γ^t r_t + γ^n V^π(x_n)]` from each start state, with every
/// action (including the first) drawn from μ.
pub fn nstep_value_lower_bound(
    mdp: &FiniteMdp,
    pi: &Policy,
    mu: &Policy,
    n: usize,
) -> Result<VTable> {
    check_horizon(n)?;
    mdp.check_policy(mu)?;
    let mut v = exact_v(mdp, pi)?;
    for _ in 0..n {
        let q = backup_with_values(mdp, v.values());
        v = VTable::new(
            (0..mdp.num_states())
                .map(|x| q.row(x).iter().zip(mu.row(x)).map(|(q, p)| q * p).sum())
                .collect(),
        );
    }
    Ok(v)
}

/// Which inequality a [`BoundReport`] checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundKind {
    /// `L_ent^{π,μ,n} ≤ Q_ent^{π*_ent}` (at `c = 0`, against `Q^{π*}`).
    MaxEntQ,
    /// `L^{π,μ,n} ≤ Q^{π*}`.
    StandardQ,
    /// `(T^μ)^{n−1} T^π Q^π ≤ Q^{π*}`: the operator form, bootstrapping
    /// the last action under π.
    OperatorQ,
    /// `E_μ[Σ γ^t r_t + γ^n V^π] ≤ V^{π*}`.
    Value,
}

impl BoundKind {
    pub fn id(&self) -> &'static str {
        match self {
            BoundKind::MaxEntQ => "maxent_q",
            BoundKind::StandardQ => "standard_q",
            BoundKind::OperatorQ => "operator_q",
            BoundKind::Value => "value",
        }
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundViolation {
    pub state: usize,
    /// `None` for state-value bounds.
    pub action: Option<usize>,
    pub slack: f64,
}

/// Outcome of checking one inequality on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub instance: usize,
    pub seed: u64,
    pub kind: BoundKind,
    pub n: usize,
    pub c: f64,
    /// `min over entries of (upper − lower)`.
    pub min_slack: f64,
    pub violations: Vec<BoundViolation>,
}

impl BoundReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Slack of `lower ≤ upper` entrywise, listing entries below `−tol`.
pub fn compare_q_bound(lower: &QTable, upper: &QTable, tol: f64) -> (f64, Vec<BoundViolation>) {
    let mut min_slack = f64::INFINITY;
    let mut violations = Vec::new();
    for x in 0..lower.num_states() {
        for a in 0..lower.num_actions() {
            let slack = upper.get(x, a) - lower.get(x, a);
            min_slack = min_slack.min(slack);
            if !(slack >= -tol) {
                violations.push(BoundViolation {
                    state: x,
                    action: Some(a),
                    slack,
                });
            }
        }
    }
    (min_slack, violations)
}

pub fn compare_v_bound(lower: &VTable, upper: &VTable, tol: f64) -> (f64, Vec<BoundViolation>) {
    let mut min_slack = f64::INFINITY;
    let mut violations = Vec::new();
    for x in 0..lower.len() {
        let slack = upper.get(x) - lower.get(x);
        min_slack = min_slack.min(slack);
        if !(slack >= -tol) {
            violations.push(BoundViolation {
                state: x,
                action: None,
                slack,
            });
        }
    }
    (min_slack, violations)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsSuiteConfig {
    pub batch: BatchConfig,
    pub ns: Vec<usize>,
    pub cs: Vec<f64>,
}

impl Default for BoundsSuiteConfig {
    fn default() -> Self {
        Self {
            batch: BatchConfig::default(),
            ns: vec![1, 2, 5, 20],
            cs: vec![0.0, 0.01, 0.1, 1.0],
        }
    }
}

impl BoundsSuiteConfig {
    pub fn validate(&self) -> Result<()> {
        self.batch.validate()?;
        if self.ns.is_empty() || self.ns.contains(&0) {
            return Err(Error::InvalidSpec(
                "horizon grid must be nonempty and >= 1".into(),
            ));
        }
        if self.cs.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
            return Err(Error::InvalidSpec(
                "entropy weights must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Checks every bound on one instance.
pub fn check_instance_bounds(
    inst: &Instance,
    ns: &[usize],
    cs: &[f64],
) -> Result<Vec<BoundReport>> {
    let Instance { mdp, pi, mu, .. } = inst;
    let q_star = optimal_q(mdp)?;
    let v_star = optimal_v(mdp)?;
    let q_pi = exact_q(mdp, pi)?;
    let mut reports = Vec::new();
    let mut push = |kind, n, c, (min_slack, violations)| {
        reports.push(BoundReport {
            instance: inst.index,
            seed: inst.seed,
            kind,
            n,
            c,
            min_slack,
            violations,
        })
    };

    for &c in cs {
        let upper = if c == 0.0 {
            q_star.clone()
        } else {
            soft_optimal_q(mdp, &MaxEntConfig::new(c))?
        };
        for &n in ns {
            let lower = nstep_lower_bound_maxent(mdp, pi, mu, n, c)?;
            push(
                BoundKind::MaxEntQ,
                n,
                c,
                compare_q_bound(&lower, &upper, BOUND_SLACK),
            );
        }
    }
    for &n in ns {
        let lower = nstep_lower_bound(mdp, pi, mu, n)?;
        push(
            BoundKind::StandardQ,
            n,
            0.0,
            compare_q_bound(&lower, &q_star, BOUND_SLACK),
        );
        let op_form = apply_nstep(mdp, pi, mu, n, &q_pi)?;
        push(
            BoundKind::OperatorQ,
            n,
            0.0,
            compare_q_bound(&op_form, &q_star, BOUND_SLACK),
        );
        let v_lower = nstep_value_lower_bound(mdp, pi, mu, n)?;
        push(
            BoundKind::Value,
            n,
            0.0,
            compare_v_bound(&v_lower, &v_star, BOUND_SLACK),
        );
    }
    Ok(reports)
}

/// Runs [`check_instance_bounds`] over a random batch, in parallel over
/// instances; reports come back in instance order.
pub fn verify_bounds_suite(cfg: &BoundsSuiteConfig, master_seed: u64) -> Result<Vec<BoundReport>> {
    cfg.validate()?;
    let instances = cfg.batch.instances(master_seed)?;
    let nested: Vec<Vec<BoundReport>> = instances
        .par_iter()
        .map(|inst| check_instance_bounds(inst, &cfg.ns, &cfg.cs))
        .collect::<Result<_>>()?;
    Ok(nested.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{greedy_policy, random_mdp, random_policy, RandomMdpSpec};
    use crate::seeding::rng_from_seed;
    use approx::assert_abs_diff_eq;

    #[test]
    fn on_policy_bound_is_q_pi() {
        let mdp = random_mdp(&RandomMdpSpec::default(), 4).unwrap();
        let pi = random_policy(5, 3, 1.0, &mut rng_from_seed(1));
        let q_pi = exact_q(&mdp, &pi).unwrap();
        for n in [1, 3, 10] {
            assert!(
                nstep_lower_bound(&mdp, &pi, &pi, n)
                    .unwrap()
                    .max_abs_diff(&q_pi)
                    < 1e-10
            );
            let v = nstep_value_lower_bound(&mdp, &pi, &pi, n).unwrap();
            assert!(v.max_abs_diff(&exact_v(&mdp, &pi).unwrap()) < 1e-10);
        }
        let q_ent = maxent_q_of_policy_linear(&mdp, &pi, 0.3).unwrap();
        let l = nstep_lower_bound_maxent(&mdp, &pi, &pi, 4, 0.3).unwrap();
        assert!(l.max_abs_diff(&q_ent) < 1e-10);
    }

    #[test]
    fn geometric_identity() {
        let mdp = FiniteMdp::new(1, 1, vec![1.0], vec![1.0], 0.9).unwrap();
        let p = Policy::uniform(1, 1);
        for n in [1, 2, 7] {
            let l = nstep_lower_bound_maxent(&mdp, &p, &p, n, 0.0).unwrap();
            assert_abs_diff_eq!(l.get(0, 0), 10.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn one_step_value_expansion() {
        // Single state, two actions with rewards (1, 3): r̄_μ + γ V^π.
        let mdp = FiniteMdp::new(1, 2, vec![1.0, 1.0], vec![1.0, 3.0], 0.5).unwrap();
        let pi = Policy::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let mu = Policy::from_rows(&[vec![0.25, 0.75]]).unwrap();
        let v_pi = exact_v(&mdp, &pi).unwrap().get(0);
        let v = nstep_value_lower_bound(&mdp, &pi, &mu, 1).unwrap();
        assert_abs_diff_eq!(
            v.get(0),
            0.25 * 1.0 + 0.75 * 3.0 + 0.5 * v_pi,
            epsilon = 1e-12
        );
    }

    #[test]
    fn horizon_zero_is_rejected() {
        let mdp = FiniteMdp::new(1, 1, vec![1.0], vec![1.0], 0.9).unwrap();
        let p = Policy::uniform(1, 1);
        assert!(nstep_lower_bound(&mdp, &p, &p, 0).is_err());
        assert!(nstep_value_lower_bound(&mdp, &p, &p, 0).is_err());
    }

    #[test]
    fn bound_is_tight_at_the_optimum() {
        let mdp = random_mdp(&RandomMdpSpec::default(), 8).unwrap();
        let q_star = optimal_q(&mdp).unwrap();
        let pi = greedy_policy(&q_star);
        for n in [1, 2, 5, 20] {
            let (min_slack, violations) = compare_q_bound(
                &nstep_lower_bound(&mdp, &pi, &pi, n).unwrap(),
                &q_star,
                BOUND_SLACK,
            );
            assert!(violations.is_empty());
            assert!(min_slack.abs() < 1e-10, "n={n} slack={min_slack}");
        }
    }

    #[test]
    fn negated_inequality_is_caught() {
        let mdp = random_mdp(&RandomMdpSpec::default(), 8).unwrap();
        let mut rng = rng_from_seed(2);
        let pi = random_policy(5, 3, 1.0, &mut rng);
        let mu = random_policy(5, 3, 1.0, &mut rng);
        let q_star = optimal_q(&mdp).unwrap();
        let lower = nstep_lower_bound(&mdp, &pi, &mu, 2).unwrap();
        // Swapping the roles must register violations wherever the bound is strict.
        let (min_slack, violations) = compare_q_bound(&q_star, &lower, BOUND_SLACK);
        assert!(min_slack < -BOUND_SLACK);
        assert!(!violations.is_empty());
    }
}
