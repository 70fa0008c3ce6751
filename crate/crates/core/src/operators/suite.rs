//! Batch verification of contraction and fixed-point sandwich properties.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mdp::{exact_q, optimal_q, BatchConfig, Instance};
use crate::seeding::derive_seed;

use super::{
    alpha_threshold, combined_fixed_point, contraction_bound, estimate_contraction,
    mixture_fixed_point, Combined, FixedPointOptions, OperatorSpec,
};

/// Entrywise slack allowed on both sides of the fixed-point sandwich.
pub const SANDWICH_SLACK: f64 = 1e-8;
/// Slack allowed between an empirical contraction estimate and its bound.
pub const CONTRACTION_SLACK: f64 = 1e-9;

/// An α grid entry: a fixed value, or an offset above the n-dependent
/// threshold `(1 − γ)/(1 − γ^n)` (clamped to 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaChoice {
    Value(f64),
    AboveThreshold { above_threshold: f64 },
}

impl AlphaChoice {
    pub fn resolve(&self, gamma: f64, n: usize) -> f64 {
        match *self {
            AlphaChoice::Value(a) => a,
            AlphaChoice::AboveThreshold { above_threshold } => {
                (alpha_threshold(gamma, n) + above_threshold).min(1.0)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorGrid {
    pub alphas: Vec<AlphaChoice>,
    pub betas: Vec<f64>,
    pub ns: Vec<usize>,
}

impl Default for OperatorGrid {
    fn default() -> Self {
        Self {
            alphas: vec![
                AlphaChoice::Value(0.0),
                AlphaChoice::Value(0.25),
                AlphaChoice::AboveThreshold {
                    above_threshold: 0.01,
                },
                AlphaChoice::Value(0.5),
                AlphaChoice::Value(1.0),
            ],
            betas: vec![0.0, 0.25, 0.5, 0.9],
            ns: vec![1, 2, 5],
        }
    }
}

impl OperatorGrid {
    /// All specs of the grid in `(n, α, β)` order.
    pub fn specs(&self, gamma: f64) -> Result<Vec<OperatorSpec>> {
        let mut out = Vec::with_capacity(self.ns.len() * self.alphas.len() * self.betas.len());
        for &n in &self.ns {
            for alpha in &self.alphas {
                for &beta in &self.betas {
                    out.push(OperatorSpec::new(alpha.resolve(gamma, n), beta, n)?);
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorSuiteConfig {
    pub batch: BatchConfig,
    pub grid: OperatorGrid,
    /// Random Q-pairs per cell for the contraction estimate; 0 skips it.
    pub contraction_pairs: usize,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for OperatorSuiteConfig {
    fn default() -> Self {
        Self {
            batch: BatchConfig::default(),
            grid: OperatorGrid::default(),
            contraction_pairs: 1000,
            tol: 1e-12,
            max_iters: 1_000_000,
        }
    }
}

/// Results for one `(instance, spec)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorCellReport {
    pub instance: usize,
    pub mdp_seed: u64,
    pub gamma: f64,
    pub spec: OperatorSpec,
    pub eta: f64,
    pub iterations: usize,
    pub residual: f64,
    /// `min(Q̃ − Q^{mixture})`; the sandwich needs ≥ −[`SANDWICH_SLACK`].
    pub lower_slack: f64,
    /// `min(Q^{π*} − Q̃)`.
    pub upper_slack: f64,
    /// `min(Q̃ − Q^π)`, recorded but not asserted.
    pub above_q_pi: f64,
    pub contraction_estimate: Option<f64>,
    pub contraction_bound: f64,
    /// Whether the closed-form bound is strictly below γ, for cells with
    /// α above threshold and β ∈ (0,1).
    pub faster_than_bellman: Option<bool>,
}

impl OperatorCellReport {
    pub fn sandwich_ok(&self) -> bool {
        self.lower_slack >= -SANDWICH_SLACK && self.upper_slack >= -SANDWICH_SLACK
    }

    pub fn contraction_ok(&self) -> bool {
        self.contraction_estimate
            .is_none_or(|est| est <= self.contraction_bound + CONTRACTION_SLACK)
            && self.faster_than_bellman != Some(false)
    }

    pub fn passed(&self) -> bool {
        self.sandwich_ok() && self.contraction_ok()
    }
}

fn run_instance(
    cfg: &OperatorSuiteConfig,
    specs: &[OperatorSpec],
    inst: &Instance,
) -> Result<Vec<OperatorCellReport>> {
    let Instance { mdp, pi, mu, .. } = inst;
    let gamma = mdp.gamma();
    let q_star = optimal_q(mdp)?;
    let q_pi = exact_q(mdp, pi)?;
    let opts = FixedPointOptions {
        tol: cfg.tol,
        max_iters: cfg.max_iters,
    };
    let dims = (mdp.num_states(), mdp.num_actions());
    specs
        .iter()
        .enumerate()
        .map(|(cell, spec)| {
            let eta = spec.eta()?;
            let fp = combined_fixed_point(mdp, spec, pi, mu, opts)?;
            let lower = mixture_fixed_point(mdp, pi, mu, spec.n, eta)?;
            let bound = contraction_bound(spec, gamma);
            let contraction_estimate = if cfg.contraction_pairs > 0 {
                let op = Combined::new(mdp, *spec, pi, mu)?;
                let seed = derive_seed(inst.seed, 1_000 + cell as u64);
                Some(estimate_contraction(
                    &op,
                    dims,
                    gamma,
                    cfg.contraction_pairs,
                    seed,
                )?)
            } else {
                None
            };
            let faster =
                (spec.alpha > alpha_threshold(gamma, spec.n) && spec.beta > 0.0 && spec.beta < 1.0)
                    .then_some(bound < gamma);
            Ok(OperatorCellReport {
                instance: inst.index,
                mdp_seed: inst.seed,
                gamma,
                spec: *spec,
                eta,
                iterations: fp.iterations,
                residual: fp.residual,
                lower_slack: fp.q.min_diff(&lower),
                upper_slack: q_star.min_diff(&fp.q),
                above_q_pi: fp.q.min_diff(&q_pi),
                contraction_estimate,
                contraction_bound: bound,
                faster_than_bellman: faster,
            })
        })
        .collect()
}

/// Runs every grid cell on every instance of the batch. Instances are
/// evaluated in parallel; the output order is `(instance, n, α, β)`.
pub fn verify_operators_suite(
    cfg: &OperatorSuiteConfig,
    master_seed: u64,
) -> Result<Vec<OperatorCellReport>> {
    let specs = cfg.grid.specs(cfg.batch.mdp.gamma)?;
    for spec in &specs {
        spec.validate_contractive()?;
    }
    let instances = cfg.batch.instances(master_seed)?;
    let per_instance: Vec<Vec<OperatorCellReport>> = instances
        .par_iter()
        .map(|inst| run_instance(cfg, &specs, inst))
        .collect::<Result<_>>()?;
    Ok(per_instance.into_iter().flatten().collect())
}
