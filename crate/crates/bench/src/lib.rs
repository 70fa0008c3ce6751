//! Shared fixtures for the benchmarks.

use silab_core::agents::{make_chain_env, ChainEnv, DelayedChainSpec};
use silab_core::mdp::{BatchConfig, Instance, RandomMdpSpec};

/// One random instance of the given size with the default discount.
pub fn instance(num_states: usize, num_actions: usize, seed: u64) -> Instance {
    let batch = BatchConfig {
        mdp: RandomMdpSpec {
            num_states,
            num_actions,
            ..Default::default()
        },
        ..Default::default()
    };
    batch.instance(seed, 0).expect("valid batch")
}

/// The fully delayed chain used by the default sweep.
pub fn delayed_chain() -> ChainEnv {
    make_chain_env(DelayedChainSpec {
        length: 10,
        delay: 10,
        horizon: 10,
        ..Default::default()
    })
    .expect("valid chain")
}
