//! Dynamic-programming oracles: closed-form backups, linear solves and
//! value iteration.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::{FiniteMdp, Policy, QTable, VTable};

/// Agreement required between the linear-solve and value-iteration routes.
const ORACLE_AGREEMENT: f64 = 1e-8;

/// Stopping rule for iterative solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Sup-norm change between successive iterates, relative to `max(1, ‖q‖∞)`.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iters: 1_000_000,
        }
    }
}

/// `V(x) = Σ_a π(a|x) q(x,a)`.
pub fn state_values(policy: &Policy, q: &QTable) -> VTable {
    VTable::new(
        (0..q.num_states())
            .map(|x| q.row(x).iter().zip(policy.row(x)).map(|(v, p)| v * p).sum())
            .collect(),
    )
}

/// `r(x,a) + γ Σ_{x'} p(x'|x,a) v(x')` for every pair.
pub(crate) fn backup_with_values(mdp: &FiniteMdp, next_values: &[f64]) -> QTable {
    let gamma = mdp.gamma();
    QTable::from_fn(mdp.num_states(), mdp.num_actions(), |x, a| {
        let expected: f64 = mdp
            .next_dist(x, a)
            .iter()
            .zip(next_values)
            .map(|(p, v)| p * v)
            .sum();
        mdp.reward(x, a) + gamma * expected
    })
}

/// `(T^π q)(x,a) = r(x,a) + γ E_{x'} E_{a'~π} q(x',a')`, computed in closed form.
pub fn bellman_backup(mdp: &FiniteMdp, policy: &Policy, q: &QTable) -> Result<QTable> {
    mdp.check_q(q)?;
    mdp.check_policy(policy)?;
    Ok(backup_with_values(mdp, state_values(policy, q).values()))
}

/// `(T* q)(x,a) = r(x,a) + γ E_{x'} max_{a'} q(x',a')`.
pub fn optimality_backup(mdp: &FiniteMdp, q: &QTable) -> Result<QTable> {
    mdp.check_q(q)?;
    let maxes: Vec<f64> = (0..q.num_states())
        .map(|x| q.row(x).iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    Ok(backup_with_values(mdp, &maxes))
}

/// An affine map `q ↦ offset + matrix · q` on flattened Q-tables.
///
/// Every policy-evaluation backup is affine, so their compositions and
/// mixtures are too, and fixed points reduce to one linear solve.
#[derive(Debug, Clone)]
pub struct AffineOperator {
    num_states: usize,
    num_actions: usize,
    offset: DVector<f64>,
    matrix: DMatrix<f64>,
}

impl AffineOperator {
    /// The matrix form of `T^π` with the MDP's rewards.
    pub fn bellman(mdp: &FiniteMdp, policy: &Policy) -> Result<Self> {
        Self::bellman_with_rewards(mdp, policy, &mdp.reward_table())
    }

    /// `T^π` with rewards replaced by `rewards`.
    pub fn bellman_with_rewards(
        mdp: &FiniteMdp,
        policy: &Policy,
        rewards: &QTable,
    ) -> Result<Self> {
        mdp.check_policy(policy)?;
        mdp.check_q(rewards)?;
        let (ns, na) = (mdp.num_states(), mdp.num_actions());
        let dim = ns * na;
        let gamma = mdp.gamma();
        let mut matrix = DMatrix::zeros(dim, dim);
        for x in 0..ns {
            for a in 0..na {
                let row = x * na + a;
                for (y, &p) in mdp.next_dist(x, a).iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    for b in 0..na {
                        matrix[(row, y * na + b)] += gamma * p * policy.prob(y, b);
                    }
                }
            }
        }
        Ok(Self {
            num_states: ns,
            num_actions: na,
            offset: DVector::from_column_slice(rewards.values()),
            matrix,
        })
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &AffineOperator) -> AffineOperator {
        AffineOperator {
            num_states: self.num_states,
            num_actions: self.num_actions,
            offset: &self.offset + &self.matrix * &inner.offset,
            matrix: &self.matrix * &inner.matrix,
        }
    }

    /// `weight · self + (1 − weight) · other`.
    pub fn mix(&self, weight: f64, other: &AffineOperator) -> AffineOperator {
        AffineOperator {
            num_states: self.num_states,
            num_actions: self.num_actions,
            offset: &self.offset * weight + &other.offset * (1.0 - weight),
            matrix: &self.matrix * weight + &other.matrix * (1.0 - weight),
        }
    }

    pub fn apply(&self, q: &QTable) -> QTable {
        let v = &self.offset + &self.matrix * DVector::from_column_slice(q.values());
        QTable::from_vec(self.num_states, self.num_actions, v.as_slice().to_vec())
            .expect("affine operator preserves shape")
    }

    /// Solves `(I − M) q = offset`.
    pub fn fixed_point(&self) -> Result<QTable> {
        let dim = self.offset.len();
        let system = DMatrix::<f64>::identity(dim, dim) - &self.matrix;
        let solution = system
            .lu()
            .solve(&self.offset)
            .ok_or(Error::SingularSystem)?;
        Ok(QTable::from_vec(
            self.num_states,
            self.num_actions,
            solution.as_slice().to_vec(),
        )
        .expect("affine operator preserves shape"))
    }
}

/// Fixed point of an affine operator by a single LU solve.
pub fn solve_affine_fixed_point(op: &AffineOperator) -> Result<QTable> {
    op.fixed_point()
}

/// Iterates `step` from `q0` until successive iterates agree within the
/// relative tolerance.
pub(crate) fn iterate(
    q0: QTable,
    opts: SolverOptions,
    mut step: impl FnMut(&QTable) -> QTable,
) -> Result<QTable> {
    let mut q = q0;
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iters {
        let next = step(&q);
        residual = next.max_abs_diff(&q);
        let scale = next.sup_norm().max(1.0);
        q = next;
        if residual <= opts.tol * scale {
            return Ok(q);
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iters,
        residual,
    })
}

/// `Q^π` by solving `(I − γ P_π) Q = r`.
pub fn exact_q_linear(mdp: &FiniteMdp, policy: &Policy) -> Result<QTable> {
    AffineOperator::bellman(mdp, policy)?.fixed_point()
}

/// `Q^π` by iterating `T^π` from zero.
pub fn exact_q_iterative(mdp: &FiniteMdp, policy: &Policy, opts: SolverOptions) -> Result<QTable> {
    mdp.check_policy(policy)?;
    let q0 = QTable::zeros(mdp.num_states(), mdp.num_actions());
    iterate(q0, opts, |q| {
        backup_with_values(mdp, state_values(policy, q).values())
    })
}

/// `Q^π` from the linear solve, cross-checked against value iteration.
pub fn exact_q(mdp: &FiniteMdp, policy: &Policy) -> Result<QTable> {
    let linear = exact_q_linear(mdp, policy)?;
    let iterative = exact_q_iterative(mdp, policy, SolverOptions::default())?;
    let gap = linear.max_abs_diff(&iterative);
    if gap > ORACLE_AGREEMENT {
        return Err(Error::OracleDisagreement(gap));
    }
    Ok(linear)
}

/// `V^π(x) = Σ_a π(a|x) Q^π(x,a)`.
pub fn exact_v(mdp: &FiniteMdp, policy: &Policy) -> Result<VTable> {
    Ok(state_values(policy, &exact_q(mdp, policy)?))
}

/// `Q^{π*}` by value iteration, polished with one exact policy evaluation
/// of the greedy policy.
pub fn optimal_q(mdp: &FiniteMdp) -> Result<QTable> {
    let opts = SolverOptions::default();
    let q0 = QTable::zeros(mdp.num_states(), mdp.num_actions());
    let q_vi = iterate(q0, opts, |q| {
        optimality_backup(mdp, q).expect("shape is fixed by the iteration")
    })?;
    let polished = exact_q_linear(mdp, &greedy_policy(&q_vi))?;
    let residual = optimality_backup(mdp, &polished)?.max_abs_diff(&polished);
    if residual <= opts.tol * polished.sup_norm().max(1.0) {
        Ok(polished)
    } else {
        Ok(q_vi)
    }
}

/// `V^{π*}(x) = max_a Q^{π*}(x,a)`.
pub fn optimal_v(mdp: &FiniteMdp) -> Result<VTable> {
    let q = optimal_q(mdp)?;
    Ok(VTable::new(
        (0..q.num_states())
            .map(|x| q.row(x).iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect(),
    ))
}

/// Deterministic argmax policy; ties go to the lowest action index.
pub fn greedy_policy(q: &QTable) -> Policy {
    let actions: Vec<usize> = (0..q.num_states()).map(|x| argmax(q.row(x))).collect();
    Policy::deterministic(&actions, q.num_actions()).expect("argmax is always in range")
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (a, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = a;
        }
    }
    best
}

/// Shannon entropy of `π(·|state)` in nats, with `0 log 0 = 0`.
pub fn policy_entropy(policy: &Policy, state: usize) -> f64 {
    -policy
        .row(state)
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}
