//! One function per subcommand; each returns its tables and summary lines.

use std::fmt::Write as _;
use std::path::PathBuf;

use silab_core::bounds::{verify_bounds_suite, BoundKind};
use silab_core::diagnostics::diagnostics_suite;
use silab_core::operators::{
    alpha_threshold, verify_operators_suite, OperatorSpec, SANDWICH_SLACK,
};
use silab_core::report::fmt_f64;

use crate::config::{CommandKind, ExperimentConfig, RunConfig};
use crate::error::CliError;
use crate::experiments::{run_experiment, variant_median, RunResult};
use crate::output::{create_dir, write_summary, write_table, Table};

/// What a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    /// Every asserted invariant held.
    pub passed: bool,
    pub files: Vec<PathBuf>,
    /// Summary body, without the timestamp line.
    pub summary: String,
}

struct Report {
    passed: bool,
    tables: Vec<Table>,
    lines: String,
}

fn spec_cells(spec: &OperatorSpec) -> [String; 3] {
    [fmt_f64(spec.alpha), fmt_f64(spec.beta), spec.n.to_string()]
}

fn min_of(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(f64::INFINITY, f64::min)
}

fn verify_bounds(cfg: &RunConfig) -> Result<Report, CliError> {
    let reports = verify_bounds_suite(&cfg.bounds, cfg.seed)?;
    let mut table = Table::new(
        "bounds.csv",
        vec![
            "instance",
            "seed",
            "theorem",
            "n",
            "c",
            "min_slack",
            "num_violations",
        ],
    );
    for r in &reports {
        table.push(vec![
            r.instance.to_string(),
            r.seed.to_string(),
            r.kind.id().to_string(),
            r.n.to_string(),
            fmt_f64(r.c),
            fmt_f64(r.min_slack),
            r.violations.len().to_string(),
        ]);
    }
    let violations: usize = reports.iter().map(|r| r.violations.len()).sum();
    let mut lines = String::new();
    writeln!(lines, "checks: {}", reports.len()).unwrap();
    writeln!(lines, "violations: {violations}").unwrap();
    for kind in [
        BoundKind::MaxEntQ,
        BoundKind::StandardQ,
        BoundKind::OperatorQ,
        BoundKind::Value,
    ] {
        let slack = min_of(
            reports
                .iter()
                .filter(|r| r.kind == kind)
                .map(|r| r.min_slack),
        );
        writeln!(lines, "min_slack[{}]: {}", kind.id(), fmt_f64(slack)).unwrap();
    }
    Ok(Report {
        passed: violations == 0,
        tables: vec![table],
        lines,
    })
}

fn verify_operators(cfg: &RunConfig) -> Result<Report, CliError> {
    let cells = verify_operators_suite(&cfg.operators, cfg.seed)?;
    let mut sandwich = Table::new(
        "operators_sandwich.csv",
        vec![
            "instance",
            "mdp_seed",
            "alpha",
            "beta",
            "n",
            "eta",
            "iterations",
            "residual",
            "lower_slack",
            "upper_slack",
            "min_q_tilde_minus_q_pi",
            "passed",
        ],
    );
    let mut contraction = Table::new(
        "operators_contraction.csv",
        vec![
            "instance",
            "mdp_seed",
            "alpha",
            "beta",
            "n",
            "contraction_estimate",
            "contraction_bound",
            "bound_below_gamma",
            "passed",
        ],
    );
    for c in &cells {
        let [a, b, n] = spec_cells(&c.spec);
        let keys = [c.instance.to_string(), c.mdp_seed.to_string(), a, b, n];
        let mut row = keys.to_vec();
        row.extend([
            fmt_f64(c.eta),
            c.iterations.to_string(),
            fmt_f64(c.residual),
            fmt_f64(c.lower_slack),
            fmt_f64(c.upper_slack),
            fmt_f64(c.above_q_pi),
            c.sandwich_ok().to_string(),
        ]);
        sandwich.push(row);
        let mut row = keys.to_vec();
        row.extend([
            c.contraction_estimate.map(fmt_f64).unwrap_or_default(),
            fmt_f64(c.contraction_bound),
            c.faster_than_bellman
                .map(|f| f.to_string())
                .unwrap_or_default(),
            c.contraction_ok().to_string(),
        ]);
        contraction.push(row);
    }
    let sandwich_failures = cells.iter().filter(|c| !c.sandwich_ok()).count();
    let contraction_failures = cells.iter().filter(|c| !c.contraction_ok()).count();
    let above = cells
        .iter()
        .filter(|c| c.above_q_pi >= -SANDWICH_SLACK)
        .count();
    let worst_gap = cells
        .iter()
        .filter_map(|c| c.contraction_estimate.map(|e| e - c.contraction_bound))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut lines = String::new();
    writeln!(lines, "cells: {}", cells.len()).unwrap();
    writeln!(lines, "sandwich_failures: {sandwich_failures}").unwrap();
    writeln!(lines, "contraction_failures: {contraction_failures}").unwrap();
    writeln!(
        lines,
        "min_lower_slack: {}",
        fmt_f64(min_of(cells.iter().map(|c| c.lower_slack)))
    )
    .unwrap();
    writeln!(
        lines,
        "min_upper_slack: {}",
        fmt_f64(min_of(cells.iter().map(|c| c.upper_slack)))
    )
    .unwrap();
    writeln!(lines, "max_estimate_minus_bound: {}", fmt_f64(worst_gap)).unwrap();
    writeln!(lines, "cells_with_q_tilde_above_q_pi: {above}").unwrap();
    Ok(Report {
        passed: sandwich_failures == 0 && contraction_failures == 0,
        tables: vec![sandwich, contraction],
        lines,
    })
}

fn diagnostics(cfg: &RunConfig) -> Result<Report, CliError> {
    let rows = diagnostics_suite(&cfg.diagnostics, cfg.seed)?;
    let mut table = Table::new(
        "diagnostics.csv",
        vec![
            "instance",
            "mdp_seed",
            "alpha",
            "beta",
            "n",
            "bias",
            "variance",
            "contraction_estimate",
            "contraction_bound",
            "r_max",
            "combined_lhs",
            "diff_mean",
            "diff_std",
            "diff_min",
            "diff_max",
            "lower_slack",
            "upper_slack",
            "passed",
        ],
    );
    for row in &rows {
        let (t, b) = (&row.tradeoff, &row.bias);
        let [a, be, n] = spec_cells(&b.spec);
        table.push(vec![
            b.instance.to_string(),
            b.mdp_seed.to_string(),
            a,
            be,
            n,
            fmt_f64(t.bias),
            fmt_f64(t.variance),
            fmt_f64(t.contraction_estimate),
            fmt_f64(t.contraction_bound),
            fmt_f64(t.r_max),
            fmt_f64(t.combined_lhs),
            fmt_f64(b.mean),
            fmt_f64(b.std),
            fmt_f64(b.min),
            fmt_f64(b.max),
            fmt_f64(b.lower_slack),
            fmt_f64(b.upper_slack),
            row.passed().to_string(),
        ]);
    }
    let failures = rows.iter().filter(|r| !r.passed()).count();
    let sil_rows: Vec<_> = rows.iter().filter(|r| r.bias.spec.beta > 0.0).collect();
    let positive_mean = sil_rows.iter().filter(|r| r.bias.mean > 0.0).count();
    let above = sil_rows.iter().filter(|r| r.bias.above_q_pi()).count();
    let gamma = cfg.diagnostics.batch.mdp.gamma;
    // The smallest grid α above the n = 5 threshold.
    let threshold = alpha_threshold(gamma, 5);
    let nearest = sil_rows
        .iter()
        .map(|r| r.bias.spec)
        .filter(|s| s.n == 5 && s.alpha > threshold)
        .map(|s| s.alpha)
        .fold(f64::INFINITY, f64::min);
    let headline: Vec<_> = sil_rows
        .iter()
        .filter(|r| {
            let s = r.bias.spec;
            s.n == 5 && s.beta == 0.5 && s.alpha == nearest
        })
        .collect();
    let headline_positive = headline.iter().filter(|r| r.bias.mean > 0.0).count();
    let mut lines = String::new();
    writeln!(lines, "rows: {}", rows.len()).unwrap();
    writeln!(lines, "failures: {failures}").unwrap();
    writeln!(
        lines,
        "sil_rows_with_positive_mean_bias: {positive_mean}/{}",
        sil_rows.len()
    )
    .unwrap();
    writeln!(
        lines,
        "sil_rows_with_q_tilde_above_q_pi: {above}/{}",
        sil_rows.len()
    )
    .unwrap();
    writeln!(
        lines,
        "positive_mean_bias[alpha={}, beta=0.5, n=5]: {headline_positive}/{}",
        fmt_f64(nearest),
        headline.len()
    )
    .unwrap();
    Ok(Report {
        passed: failures == 0,
        tables: vec![table],
        lines,
    })
}

fn curves_table(results: &[RunResult]) -> Table {
    let mut table = Table::new(
        "curves.csv",
        vec![
            "run_id",
            "seed",
            "algorithm",
            "n",
            "m",
            "eta",
            "env_steps",
            "eval_return",
        ],
    );
    for r in results {
        for p in &r.curve.points {
            table.push(vec![
                format!("{}/{}", r.variant, r.replicate),
                r.seed.to_string(),
                r.algorithm.to_string(),
                r.n.to_string(),
                r.m.clone(),
                fmt_f64(r.eta),
                p.env_steps.to_string(),
                fmt_f64(p.eval_return),
            ]);
        }
    }
    table
}

fn one_sided(results: &[RunResult]) -> bool {
    results.iter().all(|r| r.sil.min_increment >= 0.0)
}

fn experiment(cfg: &ExperimentConfig, seed: u64, with_sweep: bool) -> Result<Report, CliError> {
    let results = run_experiment(cfg, seed)?;
    let mut tables = vec![curves_table(&results)];
    let mut lines = String::new();
    let mut passed = one_sided(&results);
    writeln!(lines, "runs: {}", results.len()).unwrap();
    writeln!(lines, "sil_updates_one_sided: {passed}").unwrap();
    let mut sweep = Table::new(
        "sweep.csv",
        vec![
            "variant",
            "algorithm",
            "replicate",
            "seed",
            "n",
            "m",
            "eta",
            "steps_to_threshold",
            "reached",
            "final_return",
        ],
    );
    for r in &results {
        sweep.push(vec![
            r.variant.clone(),
            r.algorithm.to_string(),
            r.replicate.to_string(),
            r.seed.to_string(),
            r.n.to_string(),
            r.m.clone(),
            fmt_f64(r.eta),
            r.steps_to_threshold.to_string(),
            r.reached.to_string(),
            r.curve.final_return().map(fmt_f64).unwrap_or_default(),
        ]);
    }
    for v in &cfg.variants {
        let med = variant_median(&results, &v.name).expect("every variant has runs");
        writeln!(
            lines,
            "median_steps_to_threshold[{}]: {}",
            v.name,
            fmt_f64(med)
        )
        .unwrap();
    }
    if let Some(gate) = &cfg.gate {
        let cand = variant_median(&results, &gate.candidate).expect("validated");
        let base = variant_median(&results, &gate.baseline).expect("validated");
        let gate_ok = cand <= gate.max_ratio * base;
        writeln!(
            lines,
            "ordering_holds[{} <= {}]: {}",
            gate.candidate,
            gate.baseline,
            cand <= base
        )
        .unwrap();
        writeln!(
            lines,
            "gate[{} <= {} x {}]: {}",
            gate.candidate,
            fmt_f64(gate.max_ratio),
            gate.baseline,
            gate_ok
        )
        .unwrap();
        passed &= gate_ok;
    }
    if with_sweep {
        tables.push(sweep);
    }
    Ok(Report {
        passed,
        tables,
        lines,
    })
}

/// Runs `command`, writing its CSV tables and `summary.txt` to `cfg.out`.
pub fn run(command: CommandKind, cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    cfg.validate(command)?;
    let report = match command {
        CommandKind::VerifyBounds => verify_bounds(cfg)?,
        CommandKind::VerifyOperators => verify_operators(cfg)?,
        CommandKind::Diagnostics => diagnostics(cfg)?,
        CommandKind::Train => experiment(&cfg.train, cfg.seed, false)?,
        CommandKind::Sweep => experiment(&cfg.sweep, cfg.seed, true)?,
    };
    create_dir(&cfg.out)?;
    let mut files = Vec::new();
    for table in &report.tables {
        files.push(write_table(&cfg.out, table)?);
    }
    let summary = format!(
        "command: {command}\nseed: {}\nstatus: {}\n{}",
        cfg.seed,
        if report.passed { "PASS" } else { "FAIL" },
        report.lines
    );
    files.push(write_summary(&cfg.out, &summary)?);
    Ok(RunOutcome {
        passed: report.passed,
        files,
        summary,
    })
}
