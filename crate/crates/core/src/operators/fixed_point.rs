use crate::error::{Error, Result};
use crate::mdp::{AffineOperator, FiniteMdp, Policy, QTable};

use super::{check_horizon, Combined, OperatorSpec, QOperator};

/// Default stopping rule for fixed-point iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iters: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointResult {
    pub q: QTable,
    pub iterations: usize,
    /// Sup-norm of the last update.
    pub residual: f64,
}

/// Iterates `op` from `q0` until `‖op(q) − q‖∞ ≤ tol`.
pub fn fixed_point<O: QOperator + ?Sized>(
    op: &O,
    q0: QTable,
    tol: f64,
    max_iters: usize,
) -> Result<FixedPointResult> {
    let mut q = q0;
    let mut residual = f64::INFINITY;
    for iteration in 1..=max_iters {
        let next = op.apply(&q);
        residual = next.max_abs_diff(&q);
        q = next;
        if residual <= tol {
            return Ok(FixedPointResult {
                q,
                iterations: iteration,
                residual,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iters,
        residual,
    })
}

/// `Q̃^{α,β}`, the fixed point of the combined operator, iterated from zero.
pub fn combined_fixed_point(
    mdp: &FiniteMdp,
    spec: &OperatorSpec,
    pi: &Policy,
    mu: &Policy,
    opts: FixedPointOptions,
) -> Result<FixedPointResult> {
    spec.validate_contractive()?;
    let op = Combined::new(mdp, *spec, pi, mu)?;
    let q0 = QTable::zeros(mdp.num_states(), mdp.num_actions());
    fixed_point(&op, q0, opts.tol, opts.max_iters)
}

/// Fixed point of `η T^π + (1 − η) (T^μ)^{n−1} T^π`, solved exactly.
///
/// The operator is affine, so one LU solve replaces iteration.
pub fn mixture_fixed_point(
    mdp: &FiniteMdp,
    pi: &Policy,
    mu: &Policy,
    n: usize,
    eta: f64,
) -> Result<QTable> {
    check_horizon(n)?;
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidSpec(format!(
            "eta must lie in [0,1], got {eta}"
        )));
    }
    let t_pi = AffineOperator::bellman(mdp, pi)?;
    let t_mu = AffineOperator::bellman(mdp, mu)?;
    let mut u = t_pi.clone();
    for _ in 1..n {
        u = t_mu.compose(&u);
    }
    t_pi.mix(eta, &u).fixed_point()
}

/// Fixed point of the uncorrected n-step operator alone.
pub fn nstep_fixed_point(mdp: &FiniteMdp, pi: &Policy, mu: &Policy, n: usize) -> Result<QTable> {
    mixture_fixed_point(mdp, pi, mu, n, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{exact_q, random_mdp, random_policy, RandomMdpSpec};
    use crate::operators::{Bellman, NStep};
    use crate::seeding::rng_from_seed;

    fn fixture() -> (FiniteMdp, Policy, Policy) {
        let mdp = random_mdp(&RandomMdpSpec::default(), 11).unwrap();
        let mut rng = rng_from_seed(5);
        let pi = random_policy(5, 3, 1.0, &mut rng);
        let mu = random_policy(5, 3, 1.0, &mut rng);
        (mdp, pi, mu)
    }

    #[test]
    fn bellman_iteration_reaches_q_pi() {
        let (mdp, pi, _) = fixture();
        let op = Bellman::new(&mdp, &pi).unwrap();
        let start = QTable::constant(5, 3, 42.0);
        let res = fixed_point(&op, start, 1e-12, 1_000_000).unwrap();
        assert!(res.residual <= 1e-12);
        assert!(res.q.max_abs_diff(&exact_q(&mdp, &pi).unwrap()) < 1e-10);
    }

    #[test]
    fn pure_sil_is_rejected() {
        let (mdp, pi, mu) = fixture();
        let spec = OperatorSpec::new(0.0, 1.0, 2).unwrap();
        assert!(matches!(
            combined_fixed_point(&mdp, &spec, &pi, &mu, FixedPointOptions::default()),
            Err(Error::InvalidSpec(_))
        ));
    }

    #[test]
    fn non_convergence_carries_residual() {
        let (mdp, pi, _) = fixture();
        let op = Bellman::new(&mdp, &pi).unwrap();
        match fixed_point(&op, QTable::zeros(5, 3), 1e-12, 3) {
            Err(Error::NonConvergence {
                iterations,
                residual,
            }) => {
                assert_eq!(iterations, 3);
                assert!(residual > 1e-12);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn mixture_endpoints() {
        let (mdp, pi, mu) = fixture();
        let q_pi = exact_q(&mdp, &pi).unwrap();
        assert!(
            mixture_fixed_point(&mdp, &pi, &mu, 4, 1.0)
                .unwrap()
                .max_abs_diff(&q_pi)
                < 1e-12
        );
        assert!(
            mixture_fixed_point(&mdp, &pi, &pi, 4, 0.3)
                .unwrap()
                .max_abs_diff(&q_pi)
                < 1e-12
        );
        assert!(mixture_fixed_point(&mdp, &pi, &mu, 4, 1.5).is_err());
        // Exact solve agrees with iterating the n-step operator.
        let u = NStep::new(&mdp, &pi, &mu, 3).unwrap();
        let iterated = fixed_point(&u, QTable::zeros(5, 3), 1e-13, 100_000).unwrap();
        assert!(
            nstep_fixed_point(&mdp, &pi, &mu, 3)
                .unwrap()
                .max_abs_diff(&iterated.q)
                < 1e-11
        );
    }
}
