//! Training runs over experiment variants and their steps-to-threshold
//! statistics.

use rayon::prelude::*;
use silab_core::agents::{
    make_chain_env, train_ac_agent, train_q_agent, LearningCurve, SilHorizon, SilStats,
};
use silab_core::seeding::derive_seed;

use crate::config::{Algorithm, ExperimentConfig, Variant};
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub variant: String,
    pub algorithm: Algorithm,
    pub replicate: usize,
    pub seed: u64,
    pub n: usize,
    /// `"inf"` for full-episode self-imitation, empty without it.
    pub m: String,
    pub eta: f64,
    pub curve: LearningCurve,
    pub sil: SilStats,
    /// First evaluation step reaching the threshold, or `total_steps + 1`.
    pub steps_to_threshold: usize,
    pub reached: bool,
}

fn sil_columns(variant: &Variant) -> (String, f64) {
    match &variant.sil {
        Some(sil) => (
            match sil.horizon {
                SilHorizon::Steps(m) => m.to_string(),
                SilHorizon::Episode => "inf".to_string(),
            },
            sil.weight,
        ),
        None => (String::new(), 0.0),
    }
}

/// Runs every `(variant, replicate)` pair in parallel; results come back in
/// variant-major order. Replicate `i` trains with `derive_seed(master, i)`.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    master_seed: u64,
) -> Result<Vec<RunResult>, CliError> {
    cfg.validate()?;
    let threshold = cfg.threshold_fraction * make_chain_env(cfg.env.clone())?.optimal_return();
    let jobs: Vec<(&Variant, usize)> = cfg
        .variants
        .iter()
        .flat_map(|v| (0..cfg.replicates).map(move |r| (v, r)))
        .collect();
    jobs.par_iter()
        .map(|&(variant, replicate)| {
            let seed = derive_seed(master_seed, replicate as u64);
            let agent = cfg.variant_agent(variant, seed);
            let mut env = make_chain_env(cfg.env.clone())?;
            let (curve, sil) = match variant.algorithm {
                Algorithm::Q => {
                    let out = train_q_agent(&mut env, &agent)?;
                    (out.curve, out.sil)
                }
                Algorithm::ActorCritic => {
                    let out = train_ac_agent(&mut env, &agent)?;
                    (out.curve, out.sil)
                }
            };
            let hit = curve.steps_to_threshold(threshold);
            let (m, eta) = sil_columns(variant);
            Ok(RunResult {
                variant: variant.name.clone(),
                algorithm: variant.algorithm,
                replicate,
                seed,
                n: agent.n,
                m,
                eta,
                steps_to_threshold: hit.unwrap_or(agent.total_steps + 1),
                reached: hit.is_some(),
                curve,
                sil,
            })
        })
        .collect()
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

/// Median steps-to-threshold of one variant.
pub fn variant_median(results: &[RunResult], variant: &str) -> Option<f64> {
    let mut steps: Vec<f64> = results
        .iter()
        .filter(|r| r.variant == variant)
        .map(|r| r.steps_to_threshold as f64)
        .collect();
    (!steps.is_empty()).then(|| median(&mut steps))
}
