//! Tabular advantage actor-critic with optional self-imitation replay.

use rand::Rng as _;

use super::curve::{evaluate, LearningCurve};
use super::env::Environment;
use super::q_agent::{refresh_target, AgentConfig, SilStats, TrainOutcome};
use super::replay::PrioritizedReplay;
use super::trajectory::{episode_segments, sil_priority, sil_target, Segment, Step};
use crate::error::Result;
use crate::mdp::solve::argmax;
use crate::mdp::{QTable, VTable};
use crate::seeding::Rng;

/// State values and softmax policy logits.
#[derive(Debug, Clone, PartialEq)]
pub struct AcTables {
    pub v: VTable,
    pub logits: QTable,
}

impl AcTables {
    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        Self {
            v: VTable::zeros(num_states),
            logits: QTable::zeros(num_states, num_actions),
        }
    }

    /// `softmax(logits(state, ·))`.
    pub fn policy(&self, state: usize) -> Vec<f64> {
        let row = self.logits.row(state);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = row.iter().map(|&l| (l - m).exp()).collect();
        let z: f64 = e.iter().sum();
        e.into_iter().map(|x| x / z).collect()
    }

    pub fn apply(&mut self, update: &AcUpdate) {
        let x = update.state;
        self.v.set(x, self.v.get(x) + update.value_step);
        for (a, &d) in update.logit_steps.iter().enumerate() {
            self.logits.add(x, a, d);
        }
    }
}

/// Increments for `V(state)` and `logits(state, ·)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AcUpdate {
    pub state: usize,
    pub action: usize,
    pub advantage: f64,
    pub value_step: f64,
    pub logit_steps: Vec<f64>,
}

fn update_from_advantage(
    tables: &AcTables,
    first: &Step,
    advantage: f64,
    step_size: f64,
) -> AcUpdate {
    let pi = tables.policy(first.state);
    let logit_steps = pi
        .iter()
        .enumerate()
        .map(|(a, &p)| {
            let indicator = if a == first.action { 1.0 } else { 0.0 };
            step_size * advantage * (indicator - p)
        })
        .collect();
    AcUpdate {
        state: first.state,
        action: first.action,
        advantage,
        value_step: step_size * advantage,
        logit_steps,
    }
}

/// On-policy n-step advantage update: `A = Σ γ^t r_t + γ^k V(x_k) - V(x_0)`.
pub fn a2c_update(tables: &AcTables, segment: &Segment, gamma: f64, lr: f64) -> AcUpdate {
    let mut ret = if segment.bootstrap {
        tables.v.get(segment.last().next_state)
    } else {
        0.0
    };
    for s in segment.steps.iter().rev() {
        ret = s.reward + gamma * ret;
    }
    let first = segment.first();
    update_from_advantage(tables, first, ret - tables.v.get(first.state), lr)
}

/// Self-imitation update scaled by `scale` (η times the importance weight).
/// With `thresholded` the advantage is `[L̂ - V(x_0)]_+`; without it, the
/// update coincides with [`a2c_update`] when bootstrapping from `tables.v`.
pub fn sil_ac_update(
    tables: &AcTables,
    segment: &Segment,
    gamma: f64,
    lr: f64,
    scale: f64,
    bootstrap: impl FnOnce(usize) -> f64,
    thresholded: bool,
) -> Result<AcUpdate> {
    let target = sil_target(segment, gamma, bootstrap)?;
    let first = segment.first();
    let raw = target - tables.v.get(first.state);
    let advantage = if thresholded { raw.max(0.0) } else { raw };
    Ok(update_from_advantage(tables, first, advantage, lr * scale))
}

fn sample_action(pi: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (a, &p) in pi.iter().enumerate() {
        acc += p;
        if u < acc {
            return a;
        }
    }
    pi.len() - 1
}

/// Trains with actions sampled from the softmax policy; `cfg.epsilon` is not
/// used. The base update and replay follow the same schedule as
/// [`super::train_q_agent`], with bootstrap values from a target copy of V.
pub fn train_ac_agent<E: Environment + Clone>(
    env: &mut E,
    cfg: &AgentConfig,
) -> Result<TrainOutcome<AcTables>> {
    cfg.validate()?;
    let (ns, na) = (env.num_states(), env.num_actions());
    let mut tables = AcTables::zeros(ns, na);
    let mut target_v = vec![0.0; ns];
    let mut replay = match &cfg.sil {
        Some(sil) => Some(PrioritizedReplay::<Segment>::new(
            sil.capacity,
            sil.priority_alpha,
            sil.priority_beta,
        )?),
        None => None,
    };
    let mut behaviour = cfg.behaviour_rng();
    let mut replay_rng = cfg.replay_rng();
    let mut stats = SilStats::default();
    let mut updates: u64 = 0;
    let mut curve = LearningCurve::default();
    let mut episode: Vec<Step> = Vec::new();
    let mut window_start = 0;
    let mut state = env.reset();

    let base_update =
        |tables: &mut AcTables, target_v: &mut [f64], updates: &mut u64, steps: &[Step]| {
            let segment = Segment {
                steps: steps.to_vec(),
                bootstrap: !steps[steps.len() - 1].done,
            };
            let u = a2c_update(tables, &segment, cfg.gamma, cfg.learning_rate);
            tables.apply(&u);
            *updates += 1;
            if let Some(sil) = &cfg.sil {
                refresh_target(target_v, tables.v.values(), sil.target_update, *updates);
            }
        };

    for t in 1..=cfg.total_steps {
        let action = sample_action(&tables.policy(state), &mut behaviour);
        let out = env.step(action);
        episode.push(cfg.record(state, action, &out));
        if episode.len() - window_start == cfg.n {
            base_update(
                &mut tables,
                &mut target_v,
                &mut updates,
                &episode[window_start..],
            );
            window_start += 1;
        }
        if out.terminal || out.truncated {
            while window_start < episode.len() {
                base_update(
                    &mut tables,
                    &mut target_v,
                    &mut updates,
                    &episode[window_start..],
                );
                window_start += 1;
            }
            if let (Some(sil), Some(replay)) = (&cfg.sil, replay.as_mut()) {
                for segment in episode_segments(&episode, sil.horizon) {
                    let target = sil_target(&segment, cfg.gamma, |x| target_v[x])?;
                    let priority = sil_priority(target, tables.v.get(segment.first().state));
                    replay.push(segment, priority);
                }
            }
            episode.clear();
            window_start = 0;
            state = env.reset();
        } else {
            state = out.next_state;
        }
        if let (Some(sil), Some(replay)) = (&cfg.sil, replay.as_mut()) {
            for _ in 0..sil.updates_per_step {
                if replay.is_empty() {
                    break;
                }
                for sample in replay.sample(sil.batch_size, &mut replay_rng)? {
                    let segment = replay.get(sample.index);
                    let u = sil_ac_update(
                        &tables,
                        segment,
                        cfg.gamma,
                        cfg.learning_rate,
                        sil.weight * sample.weight,
                        |x| target_v[x],
                        true,
                    )?;
                    let target = sil_target(segment, cfg.gamma, |x| target_v[x])?;
                    tables.apply(&u);
                    stats.record(u.value_step);
                    replay
                        .update_priority(sample.index, sil_priority(target, tables.v.get(u.state)));
                    updates += 1;
                    refresh_target(&mut target_v, tables.v.values(), sil.target_update, updates);
                }
            }
        }
        if t % cfg.eval_every == 0 {
            let logits = &tables.logits;
            curve.push(
                t,
                evaluate(env, cfg.eval_episodes, |x| argmax(logits.row(x))),
            );
        }
    }
    Ok(TrainOutcome {
        curve,
        table: tables,
        sil: stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::env::{make_chain_env, DelayedChainSpec};

    fn segment() -> Segment {
        Segment {
            steps: vec![
                Step {
                    state: 0,
                    action: 1,
                    reward: 0.5,
                    next_state: 1,
                    done: false,
                },
                Step {
                    state: 1,
                    action: 0,
                    reward: -1.0,
                    next_state: 2,
                    done: false,
                },
            ],
            bootstrap: true,
        }
    }

    fn tables() -> AcTables {
        let mut t = AcTables::zeros(3, 2);
        t.v = VTable::new(vec![2.0, 0.3, 1.5]);
        t.logits = QTable::from_rows(&[vec![0.2, -0.4], vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        t
    }

    #[test]
    fn unthresholded_sil_equals_a2c() {
        let t = tables();
        let seg = segment();
        let a2c = a2c_update(&t, &seg, 0.9, 0.1);
        let sil = sil_ac_update(&t, &seg, 0.9, 0.1, 1.0, |x| t.v.get(x), false).unwrap();
        assert_eq!(a2c, sil);
        assert!(a2c.advantage < 0.0);
    }

    #[test]
    fn thresholded_sil_ignores_negative_advantage() {
        let t = tables();
        let u = sil_ac_update(&t, &segment(), 0.9, 0.1, 1.0, |x| t.v.get(x), true).unwrap();
        assert_eq!(u.value_step, 0.0);
        assert!(u.logit_steps.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn logit_steps_sum_to_zero() {
        let mut t = tables();
        t.v.set(0, -3.0);
        let u = a2c_update(&t, &segment(), 0.9, 0.1);
        assert!(u.logit_steps.iter().sum::<f64>().abs() < 1e-15);
        assert!(u.logit_steps[1] > 0.0);
    }

    #[test]
    fn learns_short_chain() {
        let mut env = make_chain_env(DelayedChainSpec {
            length: 4,
            horizon: 12,
            ..Default::default()
        })
        .unwrap();
        let cfg = AgentConfig {
            n: 3,
            total_steps: 20_000,
            eval_every: 2_000,
            learning_rate: 0.2,
            ..Default::default()
        };
        let out = train_ac_agent(&mut env, &cfg).unwrap();
        assert_eq!(out.curve.final_return(), Some(3.0));
    }
}
