//! Random instance generation for verification batches.

use rand::Rng as _;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding::{derive_seed, rng_from_seed, Rng};

use super::{FiniteMdp, Policy};

/// Parameters of the random dense MDP family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomMdpSpec {
    pub num_states: usize,
    pub num_actions: usize,
    /// Closed interval `[lo, hi]` for uniform rewards.
    pub reward_range: (f64, f64),
    /// Symmetric Dirichlet concentration of each transition row.
    pub dirichlet_concentration: f64,
    pub gamma: f64,
}

impl Default for RandomMdpSpec {
    fn default() -> Self {
        Self {
            num_states: 5,
            num_actions: 3,
            reward_range: (0.0, 1.0),
            dirichlet_concentration: 1.0,
            gamma: 0.9,
        }
    }
}

impl RandomMdpSpec {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.reward_range;
        if self.num_states == 0 || self.num_actions == 0 {
            return Err(Error::InvalidSpec(
                "need at least one state and one action".into(),
            ));
        }
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidSpec(format!(
                "empty reward range [{lo}, {hi}]"
            )));
        }
        if !(self.dirichlet_concentration > 0.0 && self.dirichlet_concentration.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "Dirichlet concentration must be positive, got {}",
                self.dirichlet_concentration
            )));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidSpec(format!(
                "discount not in (0,1): {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// One draw from a symmetric Dirichlet over `len` outcomes, via normalised
/// Gamma variates.
pub fn dirichlet_row(rng: &mut Rng, len: usize, concentration: f64) -> Vec<f64> {
    let gamma = Gamma::new(concentration, 1.0).expect("concentration validated by caller");
    loop {
        let draws: Vec<f64> = (0..len).map(|_| gamma.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 && total.is_finite() {
            let mut row: Vec<f64> = draws.iter().map(|g| g / total).collect();
            // Push the rounding residue onto the largest entry so rows sum to 1.
            let residue = 1.0 - row.iter().sum::<f64>();
            let big = super::solve::argmax(&row);
            row[big] += residue;
            return row;
        }
    }
}

/// Deterministic function of `(spec, seed)`.
pub fn random_mdp(spec: &RandomMdpSpec, seed: u64) -> Result<FiniteMdp> {
    spec.validate()?;
    let mut rng = rng_from_seed(seed);
    let (ns, na) = (spec.num_states, spec.num_actions);
    let mut transitions = Vec::with_capacity(ns * na * ns);
    for _ in 0..ns * na {
        transitions.extend(dirichlet_row(&mut rng, ns, spec.dirichlet_concentration));
    }
    let (lo, hi) = spec.reward_range;
    let rewards = (0..ns * na)
        .map(|_| {
            if lo == hi {
                lo
            } else {
                rng.random_range(lo..=hi)
            }
        })
        .collect();
    FiniteMdp::new(ns, na, transitions, rewards, spec.gamma)
}

/// A stochastic policy with Dirichlet rows.
pub fn random_policy(
    num_states: usize,
    num_actions: usize,
    concentration: f64,
    rng: &mut Rng,
) -> Policy {
    let probs = (0..num_states)
        .flat_map(|_| dirichlet_row(rng, num_actions, concentration))
        .collect();
    Policy::new(num_states, num_actions, probs).expect("Dirichlet rows are valid")
}

/// A batch of random `(MDP, π, μ)` instances indexed from a master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatchConfig {
    pub count: usize,
    pub mdp: RandomMdpSpec,
    /// Dirichlet concentration of the random target and behaviour policies.
    pub policy_concentration: f64,
}

impl Default for BatchConfig {
    fn default() -> Self {
        Self {
            count: 100,
            mdp: RandomMdpSpec::default(),
            policy_concentration: 1.0,
        }
    }
}

/// One verification instance.
#[derive(Debug, Clone)]
pub struct Instance {
    pub index: usize,
    /// Seed the MDP was generated from; also the instance id in reports.
    pub seed: u64,
    pub mdp: FiniteMdp,
    pub pi: Policy,
    pub mu: Policy,
}

impl BatchConfig {
    pub fn validate(&self) -> Result<()> {
        self.mdp.validate()?;
        if self.count == 0 {
            return Err(Error::InvalidSpec(
                "batch must contain at least one instance".into(),
            ));
        }
        if !(self.policy_concentration > 0.0 && self.policy_concentration.is_finite()) {
            return Err(Error::InvalidSpec(
                "policy concentration must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Instance `index`, independent of every other index.
    pub fn instance(&self, master_seed: u64, index: usize) -> Result<Instance> {
        let seed = derive_seed(master_seed, index as u64);
        let mdp = random_mdp(&self.mdp, seed)?;
        let mut rng = rng_from_seed(derive_seed(seed, 1));
        let (ns, na) = (self.mdp.num_states, self.mdp.num_actions);
        let pi = random_policy(ns, na, self.policy_concentration, &mut rng);
        let mu = random_policy(ns, na, self.policy_concentration, &mut rng);
        Ok(Instance {
            index,
            seed,
            mdp,
            pi,
            mu,
        })
    }

    pub fn instances(&self, master_seed: u64) -> Result<Vec<Instance>> {
        self.validate()?;
        (0..self.count)
            .map(|i| self.instance(master_seed, i))
            .collect()
    }
}
