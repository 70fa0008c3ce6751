//! Learning agents on episodic chain environments.

mod ac_agent;
mod curve;
mod env;
mod q_agent;
mod replay;
mod trajectory;

pub use ac_agent::{a2c_update, sil_ac_update, train_ac_agent, AcTables, AcUpdate};
pub use curve::{evaluate, CurvePoint, LearningCurve};
pub use env::{
    delayed_reward_transform, make_chain_env, ChainEnv, DelayedChainSpec, DenseReward, Environment,
    RewardDelay, StepOutcome, LEFT, RIGHT,
};
pub use q_agent::{
    train_q_agent, train_q_agent_observed, AgentConfig, QLearner, SilConfig, SilStats,
    TargetUpdate, TrainOutcome,
};
pub use replay::{PrioritizedReplay, Sample, SumTree};
pub use trajectory::{
    episode_segments, policy_bootstrap, sil_priority, sil_target, Segment, SilHorizon, Step,
    PRIORITY_FLOOR,
};
