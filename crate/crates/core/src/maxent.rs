//! Maximum-entropy quantities.
//!
//! Entropy enters from the second step on: `Q_ent^π(x0,a0) = E[r0 +
//! Σ_{t≥1} γ^t (r_t + c H^π(x_t))]`, so the evaluation backup is
//! `Q(x,a) = r(x,a) + γ E_{x'}[c H^π(x') + E_{a'~π} Q(x',a')]`.

use crate::error::{Error, Result};
use crate::mdp::solve::{backup_with_values, iterate, state_values};
use crate::mdp::{policy_entropy, AffineOperator, FiniteMdp, Policy, QTable, SolverOptions};

/// Entropy weight and solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxEntConfig {
    /// Entropy weight `c ≥ 0`; `c = 0` recovers standard RL.
    pub c: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl MaxEntConfig {
    pub fn new(c: f64) -> Self {
        Self {
            c,
            ..Self::default()
        }
    }

    fn solver(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            max_iters: self.max_iters,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "entropy weight must be >= 0, got {}",
                self.c
            )));
        }
        if !(self.tol > 0.0) || self.max_iters == 0 {
            return Err(Error::InvalidSpec(
                "tolerance and max_iters must be positive".into(),
            ));
        }
        Ok(())
    }
}

impl Default for MaxEntConfig {
    fn default() -> Self {
        Self {
            c: 0.0,
            tol: 1e-12,
            max_iters: 1_000_000,
        }
    }
}

/// One entropy-augmented evaluation backup under `policy`:
/// `r(x,a) + γ E_{x'}[c H^policy(x') + E_{a'~policy} q(x',a')]`.
pub fn entropy_backup(mdp: &FiniteMdp, policy: &Policy, c: f64, q: &QTable) -> Result<QTable> {
    mdp.check_q(q)?;
    mdp.check_policy(policy)?;
    let values = state_values(policy, q);
    let next: Vec<f64> = (0..mdp.num_states())
        .map(|x| {
            if c == 0.0 {
                values.get(x)
            } else {
                c * policy_entropy(policy, x) + values.get(x)
            }
        })
        .collect();
    Ok(backup_with_values(mdp, &next))
}

/// `Q_ent^π` by iterating the entropy-augmented evaluation backup.
pub fn maxent_q_of_policy(mdp: &FiniteMdp, policy: &Policy, cfg: &MaxEntConfig) -> Result<QTable> {
    cfg.validate()?;
    mdp.check_policy(policy)?;
    let q0 = QTable::zeros(mdp.num_states(), mdp.num_actions());
    iterate(q0, cfg.solver(), |q| {
        entropy_backup(mdp, policy, cfg.c, q).expect("shapes checked above")
    })
}

/// `Q_ent^π` by one linear solve with entropy-augmented rewards
/// `r(x,a) + γ c E_{x'} H^π(x')`.
pub fn maxent_q_of_policy_linear(mdp: &FiniteMdp, policy: &Policy, c: f64) -> Result<QTable> {
    MaxEntConfig::new(c).validate()?;
    mdp.check_policy(policy)?;
    let entropies: Vec<f64> = (0..mdp.num_states())
        .map(|x| c * policy_entropy(policy, x))
        .collect();
    // backup_with_values adds r(x,a), giving r + γ E[c H^π(x')] directly.
    let rewards = backup_with_values(mdp, &entropies);
    AffineOperator::bellman_with_rewards(mdp, policy, &rewards)?.fixed_point()
}

/// `c log Σ_a exp(row[a]/c)`, evaluated with max subtraction.
pub fn soft_max_value(row: &[f64], c: f64) -> f64 {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = row.iter().map(|&v| ((v - m) / c).exp()).sum();
    m + c * sum.ln()
}

/// Soft-optimal `Q_ent^{π*_ent}` by soft value iteration. Requires `c > 0`.
pub fn soft_optimal_q(mdp: &FiniteMdp, cfg: &MaxEntConfig) -> Result<QTable> {
    cfg.validate()?;
    if cfg.c == 0.0 {
        return Err(Error::ZeroEntropyWeight);
    }
    let c = cfg.c;
    let q0 = QTable::zeros(mdp.num_states(), mdp.num_actions());
    iterate(q0, cfg.solver(), |q| {
        let soft: Vec<f64> = (0..q.num_states())
            .map(|x| soft_max_value(q.row(x), c))
            .collect();
        backup_with_values(mdp, &soft)
    })
}

/// Boltzmann policy `π(a|x) ∝ exp(q(x,a)/c)`.
pub fn soft_policy_from_q(q: &QTable, c: f64) -> Result<Policy> {
    if !(c > 0.0) {
        return Err(Error::InvalidTemperature(c));
    }
    let mut probs = Vec::with_capacity(q.len());
    for x in 0..q.num_states() {
        let row = q.row(x);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = row.iter().map(|&v| ((v - m) / c).exp()).collect();
        let total: f64 = weights.iter().sum();
        probs.extend(weights.iter().map(|w| w / total));
    }
    Policy::new(q.num_states(), q.num_actions(), probs)
}
