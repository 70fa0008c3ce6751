//! The operator algebra: `T^π`, `T*`, the uncorrected n-step operator
//! `U = (T^μ)^{n−1} T^π`, the thresholded self-imitation operators and the
//! convex combination
//!
//! ```text
//! T^{α,β} = (1 − β) T^π + (1 − α) β Ũ + α β U,    Ũ q = q + [U q − q]_+
//! ```
//!
//! together with fixed points and contraction-rate estimates.

mod contraction;
mod fixed_point;
mod suite;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::solve::{backup_with_values, state_values};
use crate::mdp::{exact_q, optimality_backup, FiniteMdp, Policy, QTable};

pub use contraction::{alpha_threshold, contraction_bound, estimate_contraction};
pub use fixed_point::{
    combined_fixed_point, fixed_point, mixture_fixed_point, nstep_fixed_point, FixedPointOptions,
    FixedPointResult,
};
pub use suite::{
    verify_operators_suite, AlphaChoice, OperatorCellReport, OperatorGrid, OperatorSuiteConfig,
    CONTRACTION_SLACK, SANDWICH_SLACK,
};

/// An operator on Q-tables.
pub trait QOperator {
    fn apply(&self, q: &QTable) -> QTable;
}

impl<F: Fn(&QTable) -> QTable> QOperator for F {
    fn apply(&self, q: &QTable) -> QTable {
        self(q)
    }
}

/// Parameters `(α, β, n)` of the combined operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub alpha: f64,
    pub beta: f64,
    pub n: usize,
}

impl OperatorSpec {
    pub fn new(alpha: f64, beta: f64, n: usize) -> Result<Self> {
        let spec = Self { alpha, beta, n };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) || !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidSpec(format!(
                "alpha and beta must lie in [0,1], got ({}, {})",
                self.alpha, self.beta
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidHorizon(0));
        }
        Ok(())
    }

    /// Uniqueness condition `(1 − α) β < 1` for fixed-point operations.
    pub fn validate_contractive(&self) -> Result<()> {
        self.validate()?;
        if (1.0 - self.alpha) * self.beta >= 1.0 {
            return Err(Error::InvalidSpec(format!(
                "(1 - alpha) * beta = {} must be < 1 for a unique fixed point",
                (1.0 - self.alpha) * self.beta
            )));
        }
        Ok(())
    }

    /// Mixture weight `η = (1 − β) / (1 − β + αβ)` of the lower envelope.
    pub fn eta(&self) -> Result<f64> {
        self.validate()?;
        let denom = 1.0 - self.beta + self.alpha * self.beta;
        if denom <= 0.0 {
            return Err(Error::InvalidSpec(
                "eta is undefined at alpha = 0, beta = 1".into(),
            ));
        }
        Ok((1.0 - self.beta) / denom)
    }
}

/// Free-function form of [`OperatorSpec::eta`].
pub fn eta_mixture(spec: &OperatorSpec) -> Result<f64> {
    spec.eta()
}

fn check_horizon(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidHorizon(0))
    } else {
        Ok(())
    }
}

/// `T^π` bound to an MDP and policy.
#[derive(Debug, Clone, Copy)]
pub struct Bellman<'a> {
    mdp: &'a FiniteMdp,
    pi: &'a Policy,
}

impl<'a> Bellman<'a> {
    pub fn new(mdp: &'a FiniteMdp, pi: &'a Policy) -> Result<Self> {
        mdp.check_policy(pi)?;
        Ok(Self { mdp, pi })
    }
}

impl QOperator for Bellman<'_> {
    fn apply(&self, q: &QTable) -> QTable {
        backup_with_values(self.mdp, state_values(self.pi, q).values())
    }
}

/// `T*` bound to an MDP.
#[derive(Debug, Clone, Copy)]
pub struct Optimality<'a> {
    mdp: &'a FiniteMdp,
}

impl<'a> Optimality<'a> {
    pub fn new(mdp: &'a FiniteMdp) -> Self {
        Self { mdp }
    }
}

impl QOperator for Optimality<'_> {
    fn apply(&self, q: &QTable) -> QTable {
        optimality_backup(self.mdp, q).expect("operator applied to a table of the wrong shape")
    }
}

/// Uncorrected n-step operator `(T^μ)^{n−1} T^π`.
#[derive(Debug, Clone, Copy)]
pub struct NStep<'a> {
    target: Bellman<'a>,
    behavior: Bellman<'a>,
    n: usize,
}

impl<'a> NStep<'a> {
    pub fn new(mdp: &'a FiniteMdp, pi: &'a Policy, mu: &'a Policy, n: usize) -> Result<Self> {
        check_horizon(n)?;
        Ok(Self {
            target: Bellman::new(mdp, pi)?,
            behavior: Bellman::new(mdp, mu)?,
            n,
        })
    }

    /// Returns `(T^π q, U q)`; the combined operator needs both.
    fn apply_with_one_step(&self, q: &QTable) -> (QTable, QTable) {
        let one_step = self.target.apply(q);
        let mut u = one_step.clone();
        for _ in 1..self.n {
            u = self.behavior.apply(&u);
        }
        (one_step, u)
    }
}

impl QOperator for NStep<'_> {
    fn apply(&self, q: &QTable) -> QTable {
        self.apply_with_one_step(q).1
    }
}

/// Return-based self-imitation operator `q + [Q^μ − q]_+` with `Q^μ` cached.
#[derive(Debug, Clone)]
pub struct Sil {
    q_mu: QTable,
}

impl Sil {
    pub fn new(mdp: &FiniteMdp, mu: &Policy) -> Result<Self> {
        Ok(Self {
            q_mu: exact_q(mdp, mu)?,
        })
    }

    pub fn q_mu(&self) -> &QTable {
        &self.q_mu
    }
}

impl QOperator for Sil {
    fn apply(&self, q: &QTable) -> QTable {
        q.zip_with(&self.q_mu, f64::max)
    }
}

/// Generalized self-imitation operator `Ũ q = q + [U q − q]_+`.
#[derive(Debug, Clone, Copy)]
pub struct NSil<'a> {
    nstep: NStep<'a>,
}

impl<'a> NSil<'a> {
    pub fn new(mdp: &'a FiniteMdp, pi: &'a Policy, mu: &'a Policy, n: usize) -> Result<Self> {
        Ok(Self {
            nstep: NStep::new(mdp, pi, mu, n)?,
        })
    }
}

impl QOperator for NSil<'_> {
    fn apply(&self, q: &QTable) -> QTable {
        q.zip_with(&self.nstep.apply(q), f64::max)
    }
}

/// The combined operator `(1 − β) T^π + (1 − α) β Ũ + α β U`.
#[derive(Debug, Clone, Copy)]
pub struct Combined<'a> {
    nstep: NStep<'a>,
    spec: OperatorSpec,
}

impl<'a> Combined<'a> {
    pub fn new(
        mdp: &'a FiniteMdp,
        spec: OperatorSpec,
        pi: &'a Policy,
        mu: &'a Policy,
    ) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            nstep: NStep::new(mdp, pi, mu, spec.n)?,
            spec,
        })
    }

    pub fn spec(&self) -> OperatorSpec {
        self.spec
    }
}

impl QOperator for Combined<'_> {
    fn apply(&self, q: &QTable) -> QTable {
        let OperatorSpec { alpha, beta, .. } = self.spec;
        let (w_pi, w_sil, w_u) = (1.0 - beta, (1.0 - alpha) * beta, alpha * beta);
        let (t_pi, u) = self.nstep.apply_with_one_step(q);
        let mut out = t_pi;
        for (i, o) in out.values_mut().iter_mut().enumerate() {
            let uq = u.values()[i];
            let thresholded = q.values()[i].max(uq);
            *o = w_pi * *o + w_sil * thresholded + w_u * uq;
        }
        out
    }
}

pub fn apply_bellman(mdp: &FiniteMdp, pi: &Policy, q: &QTable) -> Result<QTable> {
    mdp.check_q(q)?;
    Ok(Bellman::new(mdp, pi)?.apply(q))
}

pub fn apply_optimality(mdp: &FiniteMdp, q: &QTable) -> Result<QTable> {
    optimality_backup(mdp, q)
}

pub fn apply_nstep(
    mdp: &FiniteMdp,
    pi: &Policy,
    mu: &Policy,
    n: usize,
    q: &QTable,
) -> Result<QTable> {
    mdp.check_q(q)?;
    Ok(NStep::new(mdp, pi, mu, n)?.apply(q))
}

/// Computes `Q^μ` on every call; hold a [`Sil`] to reuse it.
pub fn apply_sil(mdp: &FiniteMdp, mu: &Policy, q: &QTable) -> Result<QTable> {
    mdp.check_q(q)?;
    Ok(Sil::new(mdp, mu)?.apply(q))
}

pub fn apply_nsil(
    mdp: &FiniteMdp,
    pi: &Policy,
    mu: &Policy,
    n: usize,
    q: &QTable,
) -> Result<QTable> {
    mdp.check_q(q)?;
    Ok(NSil::new(mdp, pi, mu, n)?.apply(q))
}

pub fn apply_combined(
    mdp: &FiniteMdp,
    spec: &OperatorSpec,
    pi: &Policy,
    mu: &Policy,
    q: &QTable,
) -> Result<QTable> {
    mdp.check_q(q)?;
    Ok(Combined::new(mdp, *spec, pi, mu)?.apply(q))
}
