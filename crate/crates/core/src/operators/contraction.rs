use rand::Rng as _;

use crate::error::{Error, Result};
use crate::mdp::QTable;
use crate::seeding::rng_from_seed;

use super::{OperatorSpec, QOperator};

/// Closed-form bound `(1 − β) γ + (1 − α) β + α β γ^n` on the contraction
/// rate of the combined operator.
pub fn contraction_bound(spec: &OperatorSpec, gamma: f64) -> f64 {
    let OperatorSpec { alpha, beta, n } = *spec;
    (1.0 - beta) * gamma + (1.0 - alpha) * beta + alpha * beta * gamma.powi(n as i32)
}

/// `(1 − γ) / (1 − γ^n)`: above this α the combined operator contracts
/// strictly faster than `T^π`. Exactly 1 for `n = 1`.
pub fn alpha_threshold(gamma: f64, n: usize) -> f64 {
    if n <= 1 {
        return 1.0;
    }
    (1.0 - gamma) / (1.0 - gamma.powi(n as i32))
}

/// Lower estimate of the contraction rate: the largest ratio
/// `‖op q1 − op q2‖∞ / ‖q1 − q2‖∞` over `num_pairs` random pairs with
/// entries uniform on `[−1/(1−γ), 1/(1−γ)]`.
pub fn estimate_contraction<O: QOperator + ?Sized>(
    op: &O,
    dims: (usize, usize),
    gamma: f64,
    num_pairs: usize,
    seed: u64,
) -> Result<f64> {
    if num_pairs == 0 {
        return Err(Error::InvalidSpec("need at least one sample pair".into()));
    }
    let (ns, na) = dims;
    let half_width = 1.0 / (1.0 - gamma);
    let mut rng = rng_from_seed(seed);
    let mut best = 0.0_f64;
    let mut sampled = 0;
    while sampled < num_pairs {
        let q1 = QTable::from_fn(ns, na, |_, _| rng.random_range(-half_width..=half_width));
        let q2 = QTable::from_fn(ns, na, |_, _| rng.random_range(-half_width..=half_width));
        let gap = q1.max_abs_diff(&q2);
        if gap == 0.0 {
            continue;
        }
        let ratio = op.apply(&q1).max_abs_diff(&op.apply(&q2)) / gap;
        best = best.max(ratio);
        sampled += 1;
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn closed_form_bounds() {
        let spec = |a, b, n| OperatorSpec::new(a, b, n).unwrap();
        assert_abs_diff_eq!(
            contraction_bound(&spec(1.0, 1.0, 5), 0.9),
            0.59049,
            epsilon = 1e-15
        );
        assert_eq!(contraction_bound(&spec(0.3, 0.0, 5), 0.9), 0.9);
        assert_abs_diff_eq!(
            contraction_bound(&spec(0.0, 0.5, 5), 0.9),
            0.95,
            epsilon = 1e-15
        );
    }

    #[test]
    fn thresholds() {
        assert_abs_diff_eq!(alpha_threshold(0.9, 5), 0.1 / 0.40951, epsilon = 1e-15);
        assert_abs_diff_eq!(alpha_threshold(0.9, 5), 0.2441943, epsilon = 1e-7);
        assert_eq!(alpha_threshold(0.9, 1), 1.0);
        assert_abs_diff_eq!(alpha_threshold(0.9, 2000), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn identity_has_unit_rate() {
        let id = |q: &QTable| q.clone();
        assert_eq!(estimate_contraction(&id, (4, 2), 0.9, 50, 3).unwrap(), 1.0);
        assert!(estimate_contraction(&id, (4, 2), 0.9, 0, 3).is_err());
    }

    #[test]
    fn estimate_is_seed_deterministic() {
        let half = |q: &QTable| q.map(|v| 0.5 * v.sin());
        let a = estimate_contraction(&half, (3, 3), 0.9, 100, 17).unwrap();
        let b = estimate_contraction(&half, (3, 3), 0.9, 100, 17).unwrap();
        assert_eq!(a, b);
        assert!(a <= 0.5);
    }
}
