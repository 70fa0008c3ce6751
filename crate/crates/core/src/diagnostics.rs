//! Fixed-point bias, sampled-backup variance and contraction diagnostics of
//! the evaluation operators, and the fixed-point bias-sign experiment.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{
    exact_q, optimal_q, state_values, BatchConfig, FiniteMdp, Instance, Policy, QTable,
};
use crate::operators::{
    combined_fixed_point, contraction_bound, estimate_contraction, fixed_point, Bellman, Combined,
    FixedPointOptions, NStep, OperatorGrid, OperatorSpec, QOperator, SANDWICH_SLACK,
};
use crate::seeding::{derive_seed, rng_from_seed, Rng};

/// `‖q_tilde − q_pi‖₂²`.
pub fn fixed_point_bias(q_tilde: &QTable, q_pi: &QTable) -> Result<f64> {
    if !q_tilde.same_shape(q_pi) {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            q_tilde.num_states(),
            q_tilde.num_actions(),
            q_pi.num_states(),
            q_pi.num_actions()
        )));
    }
    Ok(q_tilde
        .values()
        .iter()
        .zip(q_pi.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}

/// Operators whose sampled backups can be compared with their exact form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Bellman,
    NStep(usize),
    Combined(OperatorSpec),
}

/// Index drawn from `probs`; only indices with positive mass are returned.
fn sample_index(probs: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

/// One-trajectory estimate of `(T^μ)^{n−1} T^π q` at `(x, a)`: next states
/// are sampled, actions after the first are drawn from `μ`, and the final
/// state is valued by `v_pi = E_π q`. Rewards are accumulated from the end,
/// matching the nesting of the exact backups.
fn sampled_nstep(
    mdp: &FiniteMdp,
    mu: &Policy,
    v_pi: &[f64],
    n: usize,
    x: usize,
    a: usize,
    rng: &mut Rng,
) -> f64 {
    let mut rewards = Vec::with_capacity(n);
    let (mut state, mut action) = (x, a);
    for t in 0..n {
        rewards.push(mdp.reward(state, action));
        state = sample_index(mdp.next_dist(state, action), rng);
        if t + 1 < n {
            action = sample_index(mu.row(state), rng);
        }
    }
    let gamma = mdp.gamma();
    rewards
        .iter()
        .rev()
        .fold(v_pi[state], |v, &r| r + gamma * v)
}

/// Monte-Carlo estimate of `E‖T̃q − Tq‖₂²`, where `T̃` replaces every
/// expectation over next states and behaviour actions by a single sampled
/// trajectory per entry. The components of the combined operator are
/// sampled independently. Deterministic given `seed`, and exactly zero when
/// the MDP and `μ` are deterministic.
pub fn estimate_operator_variance(
    mdp: &FiniteMdp,
    kind: OperatorKind,
    pi: &Policy,
    mu: &Policy,
    q: &QTable,
    num_samples: usize,
    seed: u64,
) -> Result<f64> {
    if num_samples == 0 {
        return Err(Error::InvalidConfig(
            "need at least one variance sample".into(),
        ));
    }
    mdp.check_q(q)?;
    mdp.check_policy(pi)?;
    mdp.check_policy(mu)?;
    let exact = match kind {
        OperatorKind::Bellman => Bellman::new(mdp, pi)?.apply(q),
        OperatorKind::NStep(n) => NStep::new(mdp, pi, mu, n)?.apply(q),
        OperatorKind::Combined(spec) => Combined::new(mdp, spec, pi, mu)?.apply(q),
    };
    let v_pi = state_values(pi, q);
    let v_pi = v_pi.values();
    let mut rng = rng_from_seed(seed);
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let mut total = 0.0;
    for _ in 0..num_samples {
        let mut sq = 0.0;
        for x in 0..ns {
            for a in 0..na {
                let sample = match kind {
                    OperatorKind::Bellman => sampled_nstep(mdp, mu, v_pi, 1, x, a, &mut rng),
                    OperatorKind::NStep(n) => sampled_nstep(mdp, mu, v_pi, n, x, a, &mut rng),
                    OperatorKind::Combined(OperatorSpec { alpha, beta, n }) => {
                        let (w_pi, w_sil, w_u) = (1.0 - beta, (1.0 - alpha) * beta, alpha * beta);
                        let t_pi = sampled_nstep(mdp, mu, v_pi, 1, x, a, &mut rng);
                        let u = sampled_nstep(mdp, mu, v_pi, n, x, a, &mut rng);
                        let thresholded = q.get(x, a).max(u);
                        w_pi * t_pi + w_sil * thresholded + w_u * u
                    }
                };
                let d = sample - exact.get(x, a);
                sq += d * d;
            }
        }
        total += sq;
    }
    Ok(total / num_samples as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TradeoffOptions {
    pub variance_samples: usize,
    pub contraction_pairs: usize,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for TradeoffOptions {
    fn default() -> Self {
        Self {
            variance_samples: 1000,
            contraction_pairs: 1000,
            tol: 1e-12,
            max_iters: 1_000_000,
        }
    }
}

impl TradeoffOptions {
    fn fixed_point(&self) -> FixedPointOptions {
        FixedPointOptions {
            tol: self.tol,
            max_iters: self.max_iters,
        }
    }
}

/// Bias, variance and contraction of the combined operator at one spec.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffReport {
    /// `‖Q̃ − Q^π‖₂²`.
    pub bias: f64,
    /// Sampled-backup variance evaluated at `Q̃`.
    pub variance: f64,
    pub contraction_estimate: f64,
    pub contraction_bound: f64,
    pub r_max: f64,
    /// `bias + sqrt(variance) + 2 r_max / (1 − γ) · contraction_bound`.
    pub combined_lhs: f64,
}

impl TradeoffReport {
    pub fn contraction_ok(&self) -> bool {
        self.contraction_estimate <= self.contraction_bound + crate::operators::CONTRACTION_SLACK
    }
}

#[allow(clippy::too_many_arguments)]
fn tradeoff_from_parts(
    mdp: &FiniteMdp,
    spec: &OperatorSpec,
    pi: &Policy,
    mu: &Policy,
    q_tilde: &QTable,
    q_pi: &QTable,
    opts: &TradeoffOptions,
    seed: u64,
) -> Result<TradeoffReport> {
    let gamma = mdp.gamma();
    let bias = fixed_point_bias(q_tilde, q_pi)?;
    let variance = estimate_operator_variance(
        mdp,
        OperatorKind::Combined(*spec),
        pi,
        mu,
        q_tilde,
        opts.variance_samples,
        derive_seed(seed, 0),
    )?;
    let op = Combined::new(mdp, *spec, pi, mu)?;
    let dims = (mdp.num_states(), mdp.num_actions());
    let contraction_estimate = estimate_contraction(
        &op,
        dims,
        gamma,
        opts.contraction_pairs,
        derive_seed(seed, 1),
    )?;
    let bound = contraction_bound(spec, gamma);
    let r_max = mdp.r_max().abs().max(mdp.r_min().abs());
    Ok(TradeoffReport {
        bias,
        variance,
        contraction_estimate,
        contraction_bound: bound,
        r_max,
        combined_lhs: bias + variance.sqrt() + 2.0 * r_max / (1.0 - gamma) * bound,
    })
}

/// Assembles a [`TradeoffReport`] for the combined operator.
/// `r_max` is the largest absolute reward.
pub fn tradeoff_report(
    mdp: &FiniteMdp,
    spec: &OperatorSpec,
    pi: &Policy,
    mu: &Policy,
    opts: &TradeoffOptions,
    seed: u64,
) -> Result<TradeoffReport> {
    let q_tilde = combined_fixed_point(mdp, spec, pi, mu, opts.fixed_point())?.q;
    let q_pi = exact_q(mdp, pi)?;
    tradeoff_from_parts(mdp, spec, pi, mu, &q_tilde, &q_pi, opts, seed)
}

/// Distribution of `Q̃ − Q^π` for one instance and spec, with the slack of
/// the fixed-point sandwich.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasSignRow {
    pub instance: usize,
    pub mdp_seed: u64,
    pub spec: OperatorSpec,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    /// `min(Q̃ − Q^{mixture})`.
    pub lower_slack: f64,
    /// `min(Q^{π*} − Q̃)`.
    pub upper_slack: f64,
}

impl BiasSignRow {
    pub fn sandwich_ok(&self) -> bool {
        self.lower_slack >= -SANDWICH_SLACK && self.upper_slack >= -SANDWICH_SLACK
    }

    /// `Q̃ ≥ Q^π` entrywise, up to the sandwich slack.
    pub fn above_q_pi(&self) -> bool {
        self.min >= -SANDWICH_SLACK
    }
}

fn difference_stats(q_tilde: &QTable, q_pi: &QTable) -> (f64, f64, f64, f64) {
    let d: Vec<f64> = q_tilde
        .values()
        .iter()
        .zip(q_pi.values())
        .map(|(a, b)| a - b)
        .collect();
    let len = d.len() as f64;
    let mean = d.iter().sum::<f64>() / len;
    let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / len;
    let min = d.iter().copied().fold(f64::INFINITY, f64::min);
    let max = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (mean, var.sqrt(), min, max)
}

/// Lower envelope of the sandwich by iterating `η T^π + (1 − η) U` from
/// `Q^π`, independently of the linear solve used elsewhere.
fn iterated_mixture(
    mdp: &FiniteMdp,
    pi: &Policy,
    mu: &Policy,
    spec: &OperatorSpec,
    q_pi: &QTable,
    opts: FixedPointOptions,
) -> Result<QTable> {
    let eta = spec.eta()?;
    let t_pi = Bellman::new(mdp, pi)?;
    let u = NStep::new(mdp, pi, mu, spec.n)?;
    let mixture = |q: &QTable| {
        t_pi.apply(q)
            .zip_with(&u.apply(q), |a, b| eta * a + (1.0 - eta) * b)
    };
    Ok(fixed_point(&mixture, q_pi.clone(), opts.tol, opts.max_iters)?.q)
}

fn bias_sign_row(
    inst: &Instance,
    spec: &OperatorSpec,
    q_tilde: &QTable,
    q_pi: &QTable,
    q_star: &QTable,
    opts: FixedPointOptions,
) -> Result<BiasSignRow> {
    let lower = iterated_mixture(&inst.mdp, &inst.pi, &inst.mu, spec, q_pi, opts)?;
    let (mean, std, min, max) = difference_stats(q_tilde, q_pi);
    Ok(BiasSignRow {
        instance: inst.index,
        mdp_seed: inst.seed,
        spec: *spec,
        mean,
        std,
        min,
        max,
        lower_slack: q_tilde.min_diff(&lower),
        upper_slack: q_star.min_diff(q_tilde),
    })
}

/// Combined-operator fixed point iterated from `Q^π`.
fn q_tilde_from(
    inst: &Instance,
    spec: &OperatorSpec,
    q_pi: &QTable,
    opts: FixedPointOptions,
) -> Result<QTable> {
    spec.validate_contractive()?;
    let op = Combined::new(&inst.mdp, *spec, &inst.pi, &inst.mu)?;
    Ok(fixed_point(&op, q_pi.clone(), opts.tol, opts.max_iters)?.q)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub batch: BatchConfig,
    pub grid: OperatorGrid,
    pub tradeoff: TradeoffOptions,
}

/// For every instance and spec: `Q̃` by iteration, its bias distribution
/// against `Q^π` and the sandwich slacks. Violations are recorded in the
/// rows, not raised.
pub fn bias_sign_experiment(cfg: &DiagnosticsConfig, master_seed: u64) -> Result<Vec<BiasSignRow>> {
    let specs = cfg.grid.specs(cfg.batch.mdp.gamma)?;
    let opts = cfg.tradeoff.fixed_point();
    let instances = cfg.batch.instances(master_seed)?;
    let rows: Vec<Vec<BiasSignRow>> = instances
        .par_iter()
        .map(|inst| {
            let q_pi = exact_q(&inst.mdp, &inst.pi)?;
            let q_star = optimal_q(&inst.mdp)?;
            specs
                .iter()
                .map(|spec| {
                    let q_tilde = q_tilde_from(inst, spec, &q_pi, opts)?;
                    bias_sign_row(inst, spec, &q_tilde, &q_pi, &q_star, opts)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// One row of the diagnostics suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub tradeoff: TradeoffReport,
    pub bias: BiasSignRow,
}

impl DiagnosticsRow {
    pub fn passed(&self) -> bool {
        self.tradeoff.contraction_ok() && self.bias.sandwich_ok()
    }
}

/// Trade-off report and bias-sign statistics for every `(instance, spec)`
/// cell, in `(instance, n, α, β)` order. Each cell draws its random numbers
/// from `derive_seed(instance seed, cell index)`.
pub fn diagnostics_suite(cfg: &DiagnosticsConfig, master_seed: u64) -> Result<Vec<DiagnosticsRow>> {
    let specs = cfg.grid.specs(cfg.batch.mdp.gamma)?;
    let opts = cfg.tradeoff.fixed_point();
    let instances = cfg.batch.instances(master_seed)?;
    let rows: Vec<Vec<DiagnosticsRow>> = instances
        .par_iter()
        .map(|inst| {
            let q_pi = exact_q(&inst.mdp, &inst.pi)?;
            let q_star = optimal_q(&inst.mdp)?;
            specs
                .iter()
                .enumerate()
                .map(|(cell, spec)| {
                    let q_tilde = q_tilde_from(inst, spec, &q_pi, opts)?;
                    let seed = derive_seed(inst.seed, 2_000 + cell as u64);
                    let tradeoff = tradeoff_from_parts(
                        &inst.mdp,
                        spec,
                        &inst.pi,
                        &inst.mu,
                        &q_tilde,
                        &q_pi,
                        &cfg.tradeoff,
                        seed,
                    )?;
                    let bias = bias_sign_row(inst, spec, &q_tilde, &q_pi, &q_star, opts)?;
                    Ok(DiagnosticsRow { tradeoff, bias })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{random_mdp, random_policy, RandomMdpSpec};

    fn fixture(seed: u64) -> (FiniteMdp, Policy, Policy) {
        let mdp = random_mdp(&RandomMdpSpec::default(), seed).unwrap();
        let mut rng = rng_from_seed(seed + 1);
        let pi = random_policy(5, 3, 1.0, &mut rng);
        let mu = random_policy(5, 3, 1.0, &mut rng);
        (mdp, pi, mu)
    }

    #[test]
    fn bias_arithmetic() {
        let a = QTable::zeros(2, 3);
        assert_eq!(fixed_point_bias(&a, &a).unwrap(), 0.0);
        let b = QTable::constant(2, 3, 1.0);
        assert_eq!(fixed_point_bias(&b, &a).unwrap(), 6.0);
        assert!(fixed_point_bias(&a, &QTable::zeros(3, 2)).is_err());
    }

    #[test]
    fn unbiased_when_beta_zero() {
        let (mdp, pi, mu) = fixture(4);
        let spec = OperatorSpec::new(0.5, 0.0, 3).unwrap();
        let r = tradeoff_report(
            &mdp,
            &spec,
            &pi,
            &mu,
            &TradeoffOptions {
                variance_samples: 10,
                contraction_pairs: 50,
                ..Default::default()
            },
            1,
        )
        .unwrap();
        assert!(r.bias < 1e-16);
        assert!((r.contraction_bound - 0.9).abs() < 1e-15);
        assert!(r.contraction_ok());
        assert!(r.variance > 0.0);
    }

    #[test]
    fn deterministic_dynamics_have_zero_variance() {
        // Cycle 0 -> 1 -> 2 -> 0 under action 0, self-loop under action 1.
        let mut transitions = vec![0.0; 3 * 2 * 3];
        for x in 0..3 {
            transitions[(x * 2) * 3 + (x + 1) % 3] = 1.0;
            transitions[(x * 2 + 1) * 3 + x] = 1.0;
        }
        let rewards = vec![0.3, -1.2, 0.7, 0.1, 2.5, -0.4];
        let mdp = FiniteMdp::new(3, 2, transitions, rewards, 0.9).unwrap();
        let mu = Policy::deterministic(&[0, 1, 0], 2).unwrap();
        let pi = Policy::from_rows(&[vec![0.3, 0.7], vec![0.5, 0.5], vec![1.0, 0.0]]).unwrap();
        let q = QTable::from_fn(3, 2, |x, a| (x as f64) * 1.7 - a as f64 * 0.3);
        let mut kinds = vec![OperatorKind::Bellman];
        for n in [1, 2, 5, 20] {
            kinds.push(OperatorKind::NStep(n));
            kinds.push(OperatorKind::Combined(
                OperatorSpec::new(0.3, 0.6, n).unwrap(),
            ));
        }
        for kind in kinds {
            let v = estimate_operator_variance(&mdp, kind, &pi, &mu, &q, 20, 3).unwrap();
            assert_eq!(v, 0.0, "{kind:?}");
        }
    }

    #[test]
    fn on_policy_rows_are_unbiased() {
        let cfg = DiagnosticsConfig {
            batch: BatchConfig {
                count: 2,
                ..Default::default()
            },
            ..Default::default()
        };
        for row in bias_sign_experiment(&cfg, 11).unwrap() {
            assert!(row.sandwich_ok());
            if row.spec.beta == 0.0 {
                assert!(row.min.abs() < 1e-9 && row.max.abs() < 1e-9);
            }
        }
    }
}
