//! Finite MDPs, policies and value tables.

mod io;
mod random;
pub(crate) mod solve;
mod tables;

use std::fmt;

use crate::error::{Error, Result};

pub use io::{read_mdp, write_mdp, MdpFile};
pub use random::{dirichlet_row, random_mdp, random_policy, BatchConfig, Instance, RandomMdpSpec};
pub use solve::{
    bellman_backup, exact_q, exact_q_iterative, exact_q_linear, exact_v, greedy_policy, optimal_q,
    optimal_v, optimality_backup, policy_entropy, solve_affine_fixed_point, state_values,
    AffineOperator, SolverOptions,
};
pub use tables::{Policy, QTable, VTable};

/// Tolerance on transition and policy row sums.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// A complete tabular MDP: `p(x'|x,a)`, `r(x,a)` and the discount.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMdp {
    num_states: usize,
    num_actions: usize,
    /// Flattened `[state][action][next_state]`.
    transitions: Vec<f64>,
    /// Flattened `[state][action]`.
    rewards: Vec<f64>,
    gamma: f64,
}

impl FiniteMdp {
    /// Builds and validates an MDP from flattened tables.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
        gamma: f64,
    ) -> Result<Self> {
        let mdp = Self::new_unchecked(num_states, num_actions, transitions, rewards, gamma)?;
        let report = validate_mdp(&mdp);
        if report.is_ok() {
            Ok(mdp)
        } else {
            Err(Error::InvalidMdp(report))
        }
    }

    /// Builds an MDP checking only the table shapes. Use [`validate_mdp`] to
    /// inspect the remaining invariants.
    pub fn new_unchecked(
        num_states: usize,
        num_actions: usize,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
        gamma: f64,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::DimensionMismatch(
                "an MDP needs at least one state and one action".into(),
            ));
        }
        let sa = num_states * num_actions;
        if transitions.len() != sa * num_states {
            return Err(Error::DimensionMismatch(format!(
                "transition tensor has {} entries, expected {}",
                transitions.len(),
                sa * num_states
            )));
        }
        if rewards.len() != sa {
            return Err(Error::DimensionMismatch(format!(
                "reward table has {} entries, expected {sa}",
                rewards.len()
            )));
        }
        Ok(Self {
            num_states,
            num_actions,
            transitions,
            rewards,
            gamma,
        })
    }

    /// Builds and validates an MDP from nested `[S][A][S]` / `[S][A]` tables.
    pub fn from_nested(
        transitions: &[Vec<Vec<f64>>],
        rewards: &[Vec<f64>],
        gamma: f64,
    ) -> Result<Self> {
        let num_states = transitions.len();
        let num_actions = transitions.first().map_or(0, Vec::len);
        if rewards.len() != num_states {
            return Err(Error::DimensionMismatch(format!(
                "{} reward rows for {num_states} states",
                rewards.len()
            )));
        }
        let mut flat_p = Vec::with_capacity(num_states * num_actions * num_states);
        for (x, row) in transitions.iter().enumerate() {
            if row.len() != num_actions {
                return Err(Error::DimensionMismatch(format!(
                    "state {x} has {} actions, expected {num_actions}",
                    row.len()
                )));
            }
            for (a, dist) in row.iter().enumerate() {
                if dist.len() != num_states {
                    return Err(Error::DimensionMismatch(format!(
                        "transition row ({x}, {a}) has length {}, expected {num_states}",
                        dist.len()
                    )));
                }
                flat_p.extend_from_slice(dist);
            }
        }
        let mut flat_r = Vec::with_capacity(num_states * num_actions);
        for (x, row) in rewards.iter().enumerate() {
            if row.len() != num_actions {
                return Err(Error::DimensionMismatch(format!(
                    "reward row {x} has length {}, expected {num_actions}",
                    row.len()
                )));
            }
            flat_r.extend_from_slice(row);
        }
        Self::new(num_states, num_actions, flat_p, flat_r, gamma)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn reward(&self, state: usize, action: usize) -> f64 {
        self.rewards[state * self.num_actions + action]
    }

    /// The next-state distribution `p(·|state, action)`.
    pub fn next_dist(&self, state: usize, action: usize) -> &[f64] {
        let start = (state * self.num_actions + action) * self.num_states;
        &self.transitions[start..start + self.num_states]
    }

    /// Rewards as a Q-shaped table.
    pub fn reward_table(&self) -> QTable {
        QTable::from_vec(self.num_states, self.num_actions, self.rewards.clone())
            .expect("reward table shape is checked at construction")
    }

    pub fn r_max(&self) -> f64 {
        self.rewards
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn r_min(&self) -> f64 {
        self.rewards.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Same dynamics and discount with a replaced reward table.
    pub fn with_rewards(&self, rewards: &QTable) -> Result<Self> {
        self.check_q(rewards)?;
        let mut out = self.clone();
        out.rewards = rewards.values().to_vec();
        Ok(out)
    }

    /// `true` iff every transition row is a point mass.
    pub fn is_deterministic(&self) -> bool {
        self.transitions
            .chunks(self.num_states)
            .all(|row| row.iter().filter(|&&p| p != 0.0).count() == 1)
    }

    pub(crate) fn check_q(&self, q: &QTable) -> Result<()> {
        if q.num_states() != self.num_states || q.num_actions() != self.num_actions {
            return Err(Error::DimensionMismatch(format!(
                "table is {}x{}, MDP is {}x{}",
                q.num_states(),
                q.num_actions(),
                self.num_states,
                self.num_actions
            )));
        }
        Ok(())
    }

    pub(crate) fn check_policy(&self, policy: &Policy) -> Result<()> {
        if policy.num_states() != self.num_states || policy.num_actions() != self.num_actions {
            return Err(Error::DimensionMismatch(format!(
                "policy is {}x{}, MDP is {}x{}",
                policy.num_states(),
                policy.num_actions(),
                self.num_states,
                self.num_actions
            )));
        }
        Ok(())
    }
}

/// A single broken MDP invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NegativeProbability {
        state: usize,
        action: usize,
        next_state: usize,
        value: f64,
    },
    RowSum {
        state: usize,
        action: usize,
        sum: f64,
    },
    NonFiniteReward {
        state: usize,
        action: usize,
    },
    Discount {
        gamma: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NegativeProbability {
                state,
                action,
                next_state,
                value,
            } => write!(
                f,
                "p({next_state}|{state},{action}) = {value} is not a probability"
            ),
            Violation::RowSum { state, action, sum } => {
                write!(f, "transition row ({state},{action}) sums to {sum}")
            }
            Violation::NonFiniteReward { state, action } => {
                write!(f, "reward ({state},{action}) is not finite")
            }
            Violation::Discount { gamma } => write!(f, "discount not in (0,1): {gamma}"),
        }
    }
}

/// Outcome of [`validate_mdp`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks every MDP invariant and lists the violations.
pub fn validate_mdp(mdp: &FiniteMdp) -> ValidationReport {
    let mut violations = Vec::new();
    for x in 0..mdp.num_states {
        for a in 0..mdp.num_actions {
            let row = mdp.next_dist(x, a);
            for (y, &p) in row.iter().enumerate() {
                if !(p.is_finite() && p >= 0.0) {
                    violations.push(Violation::NegativeProbability {
                        state: x,
                        action: a,
                        next_state: y,
                        value: p,
                    });
                }
            }
            let sum: f64 = row.iter().sum();
            if !((sum - 1.0).abs() <= ROW_SUM_TOL) {
                violations.push(Violation::RowSum {
                    state: x,
                    action: a,
                    sum,
                });
            }
            if !mdp.reward(x, a).is_finite() {
                violations.push(Violation::NonFiniteReward {
                    state: x,
                    action: a,
                });
            }
        }
    }
    if !(mdp.gamma > 0.0 && mdp.gamma < 1.0) {
        violations.push(Violation::Discount { gamma: mdp.gamma });
    }
    ValidationReport { violations }
}
