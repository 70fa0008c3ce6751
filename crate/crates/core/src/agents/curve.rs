//! Learning curves and greedy evaluation.

use serde::{Deserialize, Serialize};

use super::env::Environment;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub env_steps: usize,
    pub eval_return: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub points: Vec<CurvePoint>,
}

impl LearningCurve {
    pub fn push(&mut self, env_steps: usize, eval_return: f64) {
        self.points.push(CurvePoint {
            env_steps,
            eval_return,
        });
    }

    /// Environment steps at the first evaluation reaching `threshold`.
    pub fn steps_to_threshold(&self, threshold: f64) -> Option<usize> {
        self.points
            .iter()
            .find(|p| p.eval_return >= threshold)
            .map(|p| p.env_steps)
    }

    pub fn final_return(&self) -> Option<f64> {
        self.points.last().map(|p| p.eval_return)
    }
}

/// Mean undiscounted return of `choose` over `episodes` fresh episodes.
pub fn evaluate<E: Environment + Clone>(
    env: &E,
    episodes: usize,
    mut choose: impl FnMut(usize) -> usize,
) -> f64 {
    let mut eval = env.clone();
    let mut total = 0.0;
    for _ in 0..episodes {
        let mut state = eval.reset();
        loop {
            let out = eval.step(choose(state));
            total += out.reward;
            if out.terminal || out.truncated {
                break;
            }
            state = out.next_state;
        }
    }
    total / episodes.max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::env::{make_chain_env, DelayedChainSpec, LEFT, RIGHT};

    #[test]
    fn threshold_crossing() {
        let mut c = LearningCurve::default();
        for (s, r) in [(10, 0.0), (20, 5.0), (30, 9.0), (40, 8.0)] {
            c.push(s, r);
        }
        assert_eq!(c.steps_to_threshold(8.55), Some(30));
        assert_eq!(c.steps_to_threshold(9.5), None);
        assert_eq!(c.final_return(), Some(8.0));
    }

    #[test]
    fn evaluate_fixed_choices() {
        let env = make_chain_env(DelayedChainSpec {
            delay: 4,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(evaluate(&env, 3, |_| RIGHT), 9.0);
        assert_eq!(evaluate(&env, 1, |_| LEFT), 0.0);
    }
}
