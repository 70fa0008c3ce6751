//! Tabular n-step Q-learning with optional self-imitation replay.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::curve::{evaluate, LearningCurve};
use super::env::{Environment, StepOutcome};
use super::replay::PrioritizedReplay;
use super::trajectory::{episode_segments, sil_priority, sil_target, Segment, SilHorizon, Step};
use crate::error::{Error, Result};
use crate::mdp::solve::argmax;
use crate::mdp::QTable;
use crate::seeding::{child_rng, Rng};

/// Schedule for the table that supplies self-imitation bootstrap values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetUpdate {
    /// Copy the online table every `period` agent updates.
    Copy { period: usize },
    /// `target <- tau * target + (1 - tau) * online` after every update.
    Polyak { tau: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SilConfig {
    /// Scale `η` of the self-imitation update. Zero leaves every table
    /// bit-identical to a run without self-imitation.
    pub weight: f64,
    pub horizon: SilHorizon,
    pub capacity: usize,
    pub batch_size: usize,
    pub updates_per_step: usize,
    pub priority_alpha: f64,
    pub priority_beta: f64,
    pub target_update: TargetUpdate,
}

impl Default for SilConfig {
    fn default() -> Self {
        Self {
            weight: 0.1,
            horizon: SilHorizon::Steps(5),
            capacity: 10_000,
            batch_size: 8,
            updates_per_step: 1,
            priority_alpha: 0.6,
            priority_beta: 0.1,
            target_update: TargetUpdate::Copy { period: 100 },
        }
    }
}

impl SilConfig {
    pub fn validate(&self) -> Result<()> {
        self.horizon.validate()?;
        if !(self.weight >= 0.0 && self.weight.is_finite()) {
            return Err(Error::InvalidConfig(
                "sil weight must be finite and >= 0".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig(
                "sil batch size must be positive".into(),
            ));
        }
        match self.target_update {
            TargetUpdate::Copy { period: 0 } => Err(Error::InvalidConfig(
                "target copy period must be positive".into(),
            )),
            TargetUpdate::Polyak { tau } if !(0.0..=1.0).contains(&tau) => {
                Err(Error::InvalidConfig("polyak tau must lie in [0,1]".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    /// Horizon of the uncorrected base update; 1 is plain Q-learning.
    pub n: usize,
    pub learning_rate: f64,
    /// Exploration rate of the ε-greedy behaviour policy (Q agent only).
    pub epsilon: f64,
    pub gamma: f64,
    pub total_steps: usize,
    pub eval_every: usize,
    pub eval_episodes: usize,
    pub seed: u64,
    /// Whether a time-limit truncation bootstraps from the last state. When
    /// false the horizon is part of the task and truncation ends the return.
    pub bootstrap_on_truncation: bool,
    pub sil: Option<SilConfig>,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            n: 1,
            learning_rate: 0.1,
            epsilon: 0.1,
            gamma: 0.95,
            total_steps: 50_000,
            eval_every: 500,
            eval_episodes: 1,
            seed: 0,
            bootstrap_on_truncation: true,
            sil: None,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidHorizon(0));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidConfig("gamma must lie in (0,1)".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::InvalidConfig(
                "learning rate must lie in (0,1]".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidConfig("epsilon must lie in [0,1]".into()));
        }
        if self.eval_every == 0 || self.eval_episodes == 0 {
            return Err(Error::InvalidConfig(
                "evaluation cadence must be positive".into(),
            ));
        }
        match &self.sil {
            Some(sil) => sil.validate(),
            None => Ok(()),
        }
    }

    /// RNG for environment interaction and exploration.
    pub(crate) fn behaviour_rng(&self) -> Rng {
        child_rng(self.seed, 0)
    }

    /// RNG for replay sampling, independent of the behaviour stream.
    pub(crate) fn replay_rng(&self) -> Rng {
        child_rng(self.seed, 1)
    }

    /// The step record for one environment transition.
    pub(crate) fn record(&self, state: usize, action: usize, out: &StepOutcome) -> Step {
        Step {
            state,
            action,
            reward: out.reward,
            next_state: out.next_state,
            done: out.terminal || (out.truncated && !self.bootstrap_on_truncation),
        }
    }
}

/// Counters of applied self-imitation updates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SilStats {
    pub updates: u64,
    /// Smallest increment applied to a table entry; `+inf` before any update.
    pub min_increment: f64,
    pub total_increment: f64,
}

impl Default for SilStats {
    fn default() -> Self {
        Self {
            updates: 0,
            min_increment: f64::INFINITY,
            total_increment: 0.0,
        }
    }
}

impl SilStats {
    pub(crate) fn record(&mut self, increment: f64) {
        self.updates += 1;
        self.min_increment = self.min_increment.min(increment);
        self.total_increment += increment;
    }
}

pub(crate) fn refresh_target(target: &mut [f64], online: &[f64], rule: TargetUpdate, updates: u64) {
    match rule {
        TargetUpdate::Copy { period } => {
            if updates.is_multiple_of(period as u64) {
                target.copy_from_slice(online);
            }
        }
        TargetUpdate::Polyak { tau } => {
            for (t, &o) in target.iter_mut().zip(online) {
                *t = tau * *t + (1.0 - tau) * o;
            }
        }
    }
}

/// Q-learning state: online table, bootstrap target and replay buffer.
#[derive(Debug, Clone)]
pub struct QLearner {
    cfg: AgentConfig,
    q: QTable,
    target: QTable,
    replay: Option<PrioritizedReplay<Segment>>,
    updates: u64,
    stats: SilStats,
}

impl QLearner {
    pub fn new(num_states: usize, num_actions: usize, cfg: AgentConfig) -> Result<Self> {
        cfg.validate()?;
        let replay = match &cfg.sil {
            Some(sil) => Some(PrioritizedReplay::new(
                sil.capacity,
                sil.priority_alpha,
                sil.priority_beta,
            )?),
            None => None,
        };
        Ok(Self {
            q: QTable::zeros(num_states, num_actions),
            target: QTable::zeros(num_states, num_actions),
            replay,
            updates: 0,
            stats: SilStats::default(),
            cfg,
        })
    }

    pub fn q(&self) -> &QTable {
        &self.q
    }

    pub fn stats(&self) -> SilStats {
        self.stats
    }

    pub fn replay_len(&self) -> usize {
        self.replay.as_ref().map_or(0, |r| r.len())
    }

    /// ε-greedy action with uniformly random tie-breaking.
    pub fn act(&self, state: usize, rng: &mut Rng) -> usize {
        let na = self.q.num_actions();
        if rng.random::<f64>() < self.cfg.epsilon {
            return rng.random_range(0..na);
        }
        let row = self.q.row(state);
        let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ties: Vec<usize> = (0..na).filter(|&a| row[a] == best).collect();
        ties[rng.random_range(0..ties.len())]
    }

    fn after_update(&mut self) {
        self.updates += 1;
        if let Some(sil) = &self.cfg.sil {
            refresh_target(
                self.target.values_mut(),
                self.q.values(),
                sil.target_update,
                self.updates,
            );
        }
    }

    /// Uncorrected update of the first step of `window` towards
    /// `Σ γ^t r_t + γ^k max_a Q(x_k, a)`, without the bootstrap when the
    /// last step is terminal.
    pub fn nstep_update(&mut self, window: &[Step]) {
        let Some(last) = window.last() else { return };
        let gamma = self.cfg.gamma;
        let mut g = if last.done {
            0.0
        } else {
            self.q
                .row(last.next_state)
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max)
        };
        for s in window.iter().rev() {
            g = s.reward + gamma * g;
        }
        let first = window[0];
        let q0 = self.q.get(first.state, first.action);
        self.q.set(
            first.state,
            first.action,
            q0 + self.cfg.learning_rate * (g - q0),
        );
        self.after_update();
    }

    fn bootstrap_value(&self, state: usize) -> f64 {
        self.target.get(state, argmax(self.q.row(state)))
    }

    fn segment_target(&self, segment: &Segment) -> Result<f64> {
        sil_target(segment, self.cfg.gamma, |x| self.bootstrap_value(x))
    }

    /// Pushes every segment of a finished episode into the replay buffer.
    pub fn store_episode(&mut self, episode: &[Step]) -> Result<()> {
        let Some(sil) = &self.cfg.sil else {
            return Ok(());
        };
        let mut prioritized = Vec::with_capacity(episode.len());
        for segment in episode_segments(episode, sil.horizon) {
            let s0 = *segment.first();
            let priority = sil_priority(
                self.segment_target(&segment)?,
                self.q.get(s0.state, s0.action),
            );
            prioritized.push((segment, priority));
        }
        let replay = self
            .replay
            .as_mut()
            .expect("replay exists when sil is configured");
        for (segment, priority) in prioritized {
            replay.push(segment, priority);
        }
        Ok(())
    }

    /// One batch of thresholded updates `Q += lr η w [L̂ - Q]_+`.
    pub fn sil_step(&mut self, rng: &mut Rng) -> Result<()> {
        let (Some(sil), Some(replay)) = (self.cfg.sil.clone(), self.replay.as_ref()) else {
            return Ok(());
        };
        if replay.is_empty() {
            return Ok(());
        }
        let batch = replay.sample(sil.batch_size, rng)?;
        for sample in batch {
            let segment = self
                .replay
                .as_ref()
                .expect("checked above")
                .get(sample.index)
                .clone();
            let target = self.segment_target(&segment)?;
            let s0 = *segment.first();
            let q0 = self.q.get(s0.state, s0.action);
            let increment =
                self.cfg.learning_rate * sil.weight * sample.weight * (target - q0).max(0.0);
            let q1 = q0 + increment;
            self.q.set(s0.state, s0.action, q1);
            self.stats.record(q1 - q0);
            self.replay
                .as_mut()
                .expect("checked above")
                .update_priority(sample.index, sil_priority(target, q1));
            self.after_update();
        }
        Ok(())
    }
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub curve: LearningCurve,
    pub table: T,
    pub sil: SilStats,
}

/// Trains with ε-greedy exploration. The base n-step update runs online on a
/// sliding window; at episode end the remaining partial windows are flushed
/// and the episode is stored for replay. Evaluation uses the greedy policy
/// with lowest-index tie-breaking.
pub fn train_q_agent<E: Environment + Clone>(
    env: &mut E,
    cfg: &AgentConfig,
) -> Result<TrainOutcome<QTable>> {
    train_q_agent_observed(env, cfg, |_, _| {})
}

/// [`train_q_agent`] calling `observe(step, q)` after every environment step.
pub fn train_q_agent_observed<E: Environment + Clone>(
    env: &mut E,
    cfg: &AgentConfig,
    mut observe: impl FnMut(usize, &QTable),
) -> Result<TrainOutcome<QTable>> {
    let mut learner = QLearner::new(env.num_states(), env.num_actions(), cfg.clone())?;
    let mut behaviour = cfg.behaviour_rng();
    let mut replay_rng = cfg.replay_rng();
    let mut curve = LearningCurve::default();
    let mut episode: Vec<Step> = Vec::new();
    let mut window_start = 0;
    let mut state = env.reset();
    for t in 1..=cfg.total_steps {
        let action = learner.act(state, &mut behaviour);
        let out = env.step(action);
        episode.push(cfg.record(state, action, &out));
        if episode.len() - window_start == cfg.n {
            learner.nstep_update(&episode[window_start..]);
            window_start += 1;
        }
        if out.terminal || out.truncated {
            while window_start < episode.len() {
                learner.nstep_update(&episode[window_start..]);
                window_start += 1;
            }
            learner.store_episode(&episode)?;
            episode.clear();
            window_start = 0;
            state = env.reset();
        } else {
            state = out.next_state;
        }
        if let Some(sil) = &cfg.sil {
            for _ in 0..sil.updates_per_step {
                learner.sil_step(&mut replay_rng)?;
            }
        }
        observe(t, learner.q());
        if t % cfg.eval_every == 0 {
            let q = learner.q();
            curve.push(t, evaluate(env, cfg.eval_episodes, |x| argmax(q.row(x))));
        }
    }
    Ok(TrainOutcome {
        curve,
        sil: learner.stats(),
        table: learner.q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::env::{make_chain_env, DelayedChainSpec};

    fn step(state: usize, action: usize, reward: f64, next_state: usize, done: bool) -> Step {
        Step {
            state,
            action,
            reward,
            next_state,
            done,
        }
    }

    #[test]
    fn one_step_update_matches_q_learning() {
        let mut l = QLearner::new(
            2,
            2,
            AgentConfig {
                learning_rate: 0.5,
                gamma: 0.9,
                ..Default::default()
            },
        )
        .unwrap();
        l.q.set(1, 1, 2.0);
        l.nstep_update(&[step(0, 0, 1.0, 1, false)]);
        assert_eq!(l.q().get(0, 0), 0.5 * (1.0 + 0.9 * 2.0));
        l.nstep_update(&[step(1, 0, 1.0, 0, true)]);
        assert_eq!(l.q().get(1, 0), 0.5);
    }

    #[test]
    fn sil_never_lowers_entries() {
        let cfg = AgentConfig {
            sil: Some(SilConfig {
                weight: 1.0,
                ..Default::default()
            }),
            ..Default::default()
        };
        let mut l = QLearner::new(3, 2, cfg).unwrap();
        l.q = QTable::constant(3, 2, 5.0);
        l.store_episode(&[step(0, 0, 0.0, 1, false), step(1, 1, 1.0, 2, true)])
            .unwrap();
        let mut rng = child_rng(0, 0);
        let before = l.q().clone();
        l.sil_step(&mut rng).unwrap();
        assert_eq!(l.q(), &before);
        assert!(l.stats().min_increment >= 0.0);
    }

    #[test]
    fn rejects_bad_config() {
        let bad = [
            AgentConfig {
                n: 0,
                ..Default::default()
            },
            AgentConfig {
                gamma: 1.0,
                ..Default::default()
            },
            AgentConfig {
                epsilon: 1.5,
                ..Default::default()
            },
            AgentConfig {
                sil: Some(SilConfig {
                    horizon: SilHorizon::Steps(0),
                    ..Default::default()
                }),
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(QLearner::new(2, 2, cfg).is_err());
        }
    }

    #[test]
    fn solves_short_dense_chain() {
        let mut env = make_chain_env(DelayedChainSpec {
            length: 5,
            horizon: 20,
            ..Default::default()
        })
        .unwrap();
        let cfg = AgentConfig {
            total_steps: 5_000,
            eval_every: 1_000,
            ..Default::default()
        };
        let out = train_q_agent(&mut env, &cfg).unwrap();
        assert_eq!(out.curve.final_return(), Some(4.0));
    }
}
