//! Transitions, trajectory segments and self-imitation targets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Policy, QTable};

/// Added to every replay priority so that no stored segment has
/// probability zero.
pub const PRIORITY_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
    /// `next_state` is terminal.
    pub done: bool,
}

/// A contiguous run of steps from one episode, starting at `steps[0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub steps: Vec<Step>,
    /// Whether the target bootstraps from the state after the last step.
    /// Always false when the last step is terminal.
    pub bootstrap: bool,
}

impl Segment {
    pub fn first(&self) -> &Step {
        &self.steps[0]
    }

    pub fn last(&self) -> &Step {
        &self.steps[self.steps.len() - 1]
    }
}

/// How far a self-imitation target looks ahead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SilHorizon {
    /// At most `m` rewards, then bootstrap.
    Steps(usize),
    /// The full remaining episode return, never bootstrapped.
    Episode,
}

impl SilHorizon {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SilHorizon::Steps(0) => Err(Error::InvalidHorizon(0)),
            _ => Ok(()),
        }
    }
}

/// Cuts one segment per start index from a finished episode.
///
/// With [`SilHorizon::Steps`] a segment bootstraps unless its last step is
/// terminal; this includes the short segments cut off by a time limit.
pub fn episode_segments(episode: &[Step], horizon: SilHorizon) -> Vec<Segment> {
    (0..episode.len())
        .map(|t| {
            let (end, may_bootstrap) = match horizon {
                SilHorizon::Steps(m) => ((t + m).min(episode.len()), true),
                SilHorizon::Episode => (episode.len(), false),
            };
            let steps = episode[t..end].to_vec();
            let bootstrap = may_bootstrap && !steps[steps.len() - 1].done;
            Segment { steps, bootstrap }
        })
        .collect()
}

/// Discounted segment return `Σ_t γ^t r_t + γ^len v(x_len)`, where the
/// bootstrap term is present only if `segment.bootstrap`.
///
/// Accumulates from the end, so a segment of length one with bootstrap
/// value `v` yields exactly `r + γ v`.
pub fn sil_target(
    segment: &Segment,
    gamma: f64,
    bootstrap: impl FnOnce(usize) -> f64,
) -> Result<f64> {
    if segment.steps.is_empty() {
        return Err(Error::EmptySegment);
    }
    let mut value = if segment.bootstrap {
        bootstrap(segment.last().next_state)
    } else {
        0.0
    };
    for step in segment.steps.iter().rev() {
        value = step.reward + gamma * value;
    }
    Ok(value)
}

/// Bootstrap by the expected `q` value under `pi`.
pub fn policy_bootstrap<'a>(q: &'a QTable, pi: &'a Policy) -> impl Fn(usize) -> f64 + 'a {
    move |x| q.row(x).iter().zip(pi.row(x)).map(|(v, p)| v * p).sum()
}

/// `[target - current]_+ + PRIORITY_FLOOR`.
pub fn sil_priority(target: f64, current: f64) -> f64 {
    (target - current).max(0.0) + PRIORITY_FLOOR
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{exact_q, FiniteMdp};

    fn step(state: usize, reward: f64, next_state: usize, done: bool) -> Step {
        Step {
            state,
            action: 0,
            reward,
            next_state,
            done,
        }
    }

    #[test]
    fn one_step_target_is_bellman_backup() {
        let mdp = FiniteMdp::new(1, 1, vec![1.0], vec![1.0], 0.9).unwrap();
        let pi = Policy::uniform(1, 1);
        let q = exact_q(&mdp, &pi).unwrap();
        let seg = Segment {
            steps: vec![step(0, 1.0, 0, false)],
            bootstrap: true,
        };
        let t = sil_target(&seg, 0.9, policy_bootstrap(&q, &pi)).unwrap();
        assert!((t - 10.0).abs() < 1e-12);
        assert!((t - q.get(0, 0)).abs() < 1e-12);
    }

    #[test]
    fn discounted_sum_without_bootstrap() {
        let seg = Segment {
            steps: vec![
                step(0, 1.0, 1, false),
                step(1, 2.0, 2, false),
                step(2, 4.0, 3, true),
            ],
            bootstrap: false,
        };
        let t = sil_target(&seg, 0.5, |_| panic!("terminal segment bootstrapped")).unwrap();
        assert_eq!(t, 1.0 + 0.5 * 2.0 + 0.25 * 4.0);
    }

    #[test]
    fn empty_segment_is_error() {
        let seg = Segment {
            steps: vec![],
            bootstrap: false,
        };
        assert!(matches!(
            sil_target(&seg, 0.9, |_| 0.0),
            Err(Error::EmptySegment)
        ));
    }

    #[test]
    fn segments_cut_at_horizon_and_terminal() {
        let ep = vec![
            step(0, 0.0, 1, false),
            step(1, 0.0, 2, false),
            step(2, 1.0, 3, true),
        ];
        let segs = episode_segments(&ep, SilHorizon::Steps(2));
        assert_eq!(segs.len(), 3);
        assert_eq!(segs[0].steps.len(), 2);
        assert!(segs[0].bootstrap);
        assert_eq!(segs[1].steps.len(), 2);
        assert!(!segs[1].bootstrap);
        assert_eq!(segs[2].steps.len(), 1);
        assert!(!segs[2].bootstrap);

        let truncated = vec![step(0, 0.0, 1, false), step(1, 0.0, 0, false)];
        let segs = episode_segments(&truncated, SilHorizon::Steps(5));
        assert!(segs.iter().all(|s| s.bootstrap));
        let segs = episode_segments(&truncated, SilHorizon::Episode);
        assert!(segs.iter().all(|s| !s.bootstrap));
        assert_eq!(segs[0].steps.len(), 2);
    }

    #[test]
    fn priority_is_floored() {
        assert_eq!(sil_priority(1.0, 2.0), PRIORITY_FLOOR);
        assert_eq!(sil_priority(2.0, 1.5), 0.5 + PRIORITY_FLOOR);
        assert!(SilHorizon::Steps(0).validate().is_err());
    }
}
