//! Deterministic chain environments with optionally delayed rewards.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::FiniteMdp;

/// Accumulates rewards over `d` steps and releases the sum on every step
/// `t` (1-indexed) with `t mod d = 0`. A trailing partial window is
/// released on the last step, so the total is preserved.
pub fn delayed_reward_transform(rewards: &[f64], d: usize) -> Result<Vec<f64>> {
    let mut delay = RewardDelay::new(d)?;
    let last = rewards.len().saturating_sub(1);
    Ok(rewards
        .iter()
        .enumerate()
        .map(|(i, &r)| delay.push(r, i == last))
        .collect())
}

/// Streaming form of [`delayed_reward_transform`].
#[derive(Debug, Clone)]
pub struct RewardDelay {
    d: usize,
    t: usize,
    pending: f64,
}

impl RewardDelay {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidSpec("reward delay must be >= 1".into()));
        }
        Ok(Self {
            d,
            t: 0,
            pending: 0.0,
        })
    }

    pub fn reset(&mut self) {
        self.t = 0;
        self.pending = 0.0;
    }

    /// Feeds one dense reward; `flush` marks the final step of the episode.
    pub fn push(&mut self, reward: f64, flush: bool) -> f64 {
        self.t += 1;
        self.pending += reward;
        if self.t.is_multiple_of(self.d) || flush {
            std::mem::take(&mut self.pending)
        } else {
            0.0
        }
    }
}

/// Outcome of one environment step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next_state: usize,
    pub reward: f64,
    /// Reached an absorbing terminal state: no bootstrapping past it.
    pub terminal: bool,
    /// Hit the episode horizon without terminating.
    pub truncated: bool,
}

/// Episodic finite environment.
pub trait Environment {
    fn num_states(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn reset(&mut self) -> usize;
    fn step(&mut self, action: usize) -> StepOutcome;
}

/// Per-transition dense rewards of the chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenseReward {
    /// Moving one state to the right.
    pub right: f64,
    /// Moving one state to the left (not paid when bumping the left wall).
    pub left: f64,
    /// Extra reward on entering the terminal state.
    pub goal: f64,
}

impl Default for DenseReward {
    fn default() -> Self {
        // Telescoping: the undiscounted return equals the final position.
        Self {
            right: 1.0,
            left: -1.0,
            goal: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DelayedChainSpec {
    /// Number of states; the last one is terminal.
    pub length: usize,
    pub dense: DenseReward,
    pub delay: usize,
    pub horizon: usize,
}

impl Default for DelayedChainSpec {
    fn default() -> Self {
        Self {
            length: 10,
            dense: DenseReward::default(),
            delay: 1,
            horizon: 40,
        }
    }
}

impl DelayedChainSpec {
    pub fn validate(&self) -> Result<()> {
        if self.length < 2 {
            return Err(Error::InvalidSpec("chain needs at least two states".into()));
        }
        if self.delay == 0 {
            return Err(Error::InvalidSpec("reward delay must be >= 1".into()));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidSpec("episode horizon must be >= 1".into()));
        }
        let DenseReward { right, left, goal } = self.dense;
        if !(right.is_finite() && left.is_finite() && goal.is_finite()) {
            return Err(Error::InvalidSpec("chain rewards must be finite".into()));
        }
        Ok(())
    }
}

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;

/// A deterministic chain: start at 0, `RIGHT` advances, `LEFT` retreats,
/// the last state is absorbing. Dense rewards pass through a
/// [`RewardDelay`].
#[derive(Debug, Clone)]
pub struct ChainEnv {
    spec: DelayedChainSpec,
    state: usize,
    t: usize,
    delay: RewardDelay,
}

pub fn make_chain_env(spec: DelayedChainSpec) -> Result<ChainEnv> {
    spec.validate()?;
    let delay = RewardDelay::new(spec.delay)?;
    Ok(ChainEnv {
        spec,
        state: 0,
        t: 0,
        delay,
    })
}

impl ChainEnv {
    pub fn spec(&self) -> &DelayedChainSpec {
        &self.spec
    }

    fn terminal_state(&self) -> usize {
        self.spec.length - 1
    }

    /// Dense transition `(next_state, reward)` from a nonterminal state.
    pub fn dense_transition(&self, state: usize, action: usize) -> (usize, f64) {
        let goal = self.terminal_state();
        if state == goal {
            return (goal, 0.0);
        }
        let r = &self.spec.dense;
        if action == RIGHT {
            let next = state + 1;
            let bonus = if next == goal { r.goal } else { 0.0 };
            (next, r.right + bonus)
        } else if state == 0 {
            (0, 0.0)
        } else {
            (state - 1, r.left)
        }
    }

    /// The dense dynamics as an MDP; the terminal state self-loops with
    /// zero reward, so discounted values match episodic returns.
    pub fn dense_mdp(&self, gamma: f64) -> Result<FiniteMdp> {
        let ns = self.spec.length;
        let mut transitions = vec![0.0; ns * 2 * ns];
        let mut rewards = vec![0.0; ns * 2];
        for x in 0..ns {
            for a in [LEFT, RIGHT] {
                let (y, r) = self.dense_transition(x, a);
                transitions[(x * 2 + a) * ns + y] = 1.0;
                rewards[x * 2 + a] = r;
            }
        }
        FiniteMdp::new(ns, 2, transitions, rewards, gamma)
    }

    /// Undiscounted return of always moving right.
    pub fn optimal_return(&self) -> f64 {
        let steps = (self.spec.length - 1).min(self.spec.horizon);
        let mut total = steps as f64 * self.spec.dense.right;
        if steps == self.spec.length - 1 {
            total += self.spec.dense.goal;
        }
        total
    }
}

impl Environment for ChainEnv {
    fn num_states(&self) -> usize {
        self.spec.length
    }

    fn num_actions(&self) -> usize {
        2
    }

    fn reset(&mut self) -> usize {
        self.state = 0;
        self.t = 0;
        self.delay.reset();
        self.state
    }

    fn step(&mut self, action: usize) -> StepOutcome {
        let (next, dense) = self.dense_transition(self.state, action);
        self.t += 1;
        let terminal = next == self.terminal_state();
        let truncated = !terminal && self.t >= self.spec.horizon;
        let reward = self.delay.push(dense, terminal || truncated);
        self.state = next;
        StepOutcome {
            next_state: next,
            reward,
            terminal,
            truncated,
        }
    }
}
