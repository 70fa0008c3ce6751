//! Run configuration: a JSON document with per-command sections, plus
//! dotted-path overrides from the command line.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use silab_core::agents::{AgentConfig, DelayedChainSpec, SilConfig, SilHorizon};
use silab_core::bounds::BoundsSuiteConfig;
use silab_core::diagnostics::DiagnosticsConfig;
use silab_core::operators::OperatorSuiteConfig;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    VerifyOperators,
    VerifyBounds,
    Diagnostics,
    Train,
    Sweep,
}

impl fmt::Display for CommandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CommandKind::VerifyOperators => "verify-operators",
            CommandKind::VerifyBounds => "verify-bounds",
            CommandKind::Diagnostics => "diagnostics",
            CommandKind::Train => "train",
            CommandKind::Sweep => "sweep",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Q,
    ActorCritic,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Q => "q",
            Algorithm::ActorCritic => "actor_critic",
        })
    }
}

/// One learner configuration of an experiment; unset fields inherit from
/// the experiment's base agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub name: String,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub sil: Option<SilConfig>,
}

/// Passes when the candidate's median steps-to-threshold is at most
/// `max_ratio` times the baseline's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gate {
    pub candidate: String,
    pub baseline: String,
    pub max_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: DelayedChainSpec,
    pub agent: AgentConfig,
    pub variants: Vec<Variant>,
    /// Independent seeds per variant; replicate `i` uses the same seed for
    /// every variant.
    pub replicates: usize,
    /// Fraction of the optimal return that counts as solved.
    pub threshold_fraction: f64,
    pub gate: Option<Gate>,
}

impl ExperimentConfig {
    /// Plain Q-learning and actor-critic on a short dense chain.
    pub fn train_default() -> Self {
        Self {
            env: DelayedChainSpec {
                length: 5,
                delay: 1,
                horizon: 20,
                ..Default::default()
            },
            agent: AgentConfig {
                total_steps: 100_000,
                eval_every: 1_000,
                ..Default::default()
            },
            variants: vec![
                Variant {
                    name: "q".into(),
                    algorithm: Algorithm::Q,
                    n: None,
                    sil: None,
                },
                Variant {
                    name: "ac".into(),
                    algorithm: Algorithm::ActorCritic,
                    n: Some(3),
                    sil: None,
                },
            ],
            replicates: 1,
            threshold_fraction: 0.95,
            gate: None,
        }
    }

    /// One-step Q-learning against 5-step self-imitation on the maximally
    /// delayed chain, where rewards arrive only at the end of an episode.
    pub fn sweep_default() -> Self {
        Self {
            env: DelayedChainSpec {
                length: 10,
                delay: 10,
                horizon: 10,
                ..Default::default()
            },
            agent: AgentConfig {
                total_steps: 50_000,
                eval_every: 500,
                bootstrap_on_truncation: false,
                ..Default::default()
            },
            variants: vec![
                Variant {
                    name: "baseline".into(),
                    algorithm: Algorithm::Q,
                    n: Some(1),
                    sil: None,
                },
                Variant {
                    name: "sil".into(),
                    algorithm: Algorithm::Q,
                    n: Some(1),
                    sil: Some(SilConfig {
                        weight: 0.1,
                        horizon: SilHorizon::Steps(5),
                        ..Default::default()
                    }),
                },
            ],
            replicates: 5,
            threshold_fraction: 0.95,
            gate: Some(Gate {
                candidate: "sil".into(),
                baseline: "baseline".into(),
                max_ratio: 2.0,
            }),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.env.validate()?;
        self.agent.validate()?;
        if self.variants.is_empty() {
            return Err(CliError::Config(
                "experiment needs at least one variant".into(),
            ));
        }
        if self.replicates == 0 {
            return Err(CliError::Config("replicates must be positive".into()));
        }
        for (i, v) in self.variants.iter().enumerate() {
            if self.variants[..i].iter().any(|w| w.name == v.name) {
                return Err(CliError::Config(format!(
                    "duplicate variant name {:?}",
                    v.name
                )));
            }
            self.variant_agent(v, 0).validate()?;
        }
        if let Some(gate) = &self.gate {
            for name in [&gate.candidate, &gate.baseline] {
                if !self.variants.iter().any(|v| &v.name == name) {
                    return Err(CliError::Config(format!(
                        "gate names unknown variant {name:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// The agent configuration of `variant` with the given seed.
    pub fn variant_agent(&self, variant: &Variant, seed: u64) -> AgentConfig {
        AgentConfig {
            n: variant.n.unwrap_or(self.agent.n),
            sil: variant.sil.clone(),
            seed,
            ..self.agent.clone()
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::train_default()
    }
}

fn sweep_default() -> ExperimentConfig {
    ExperimentConfig::sweep_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub bounds: BoundsSuiteConfig,
    pub operators: OperatorSuiteConfig,
    pub diagnostics: DiagnosticsConfig,
    pub train: ExperimentConfig,
    #[serde(default = "sweep_default")]
    pub sweep: ExperimentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            out: PathBuf::from("out"),
            bounds: BoundsSuiteConfig::default(),
            operators: OperatorSuiteConfig::default(),
            diagnostics: DiagnosticsConfig::default(),
            train: ExperimentConfig::train_default(),
            sweep: ExperimentConfig::sweep_default(),
        }
    }
}

/// Grid sections must not be empty.
fn check_grid(name: &str, empty: bool) -> Result<(), CliError> {
    if empty {
        Err(CliError::Config(format!("{name} must be nonempty")))
    } else {
        Ok(())
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Checks the section used by `command`.
    pub fn validate(&self, command: CommandKind) -> Result<(), CliError> {
        match command {
            CommandKind::VerifyBounds => {
                check_grid("bounds.ns", self.bounds.ns.is_empty())?;
                check_grid("bounds.cs", self.bounds.cs.is_empty())?;
                self.bounds.validate()?;
            }
            CommandKind::VerifyOperators => {
                let g = &self.operators.grid;
                check_grid(
                    "operators.grid",
                    g.alphas.is_empty() || g.betas.is_empty() || g.ns.is_empty(),
                )?;
                self.operators.batch.validate()?;
            }
            CommandKind::Diagnostics => {
                let g = &self.diagnostics.grid;
                check_grid(
                    "diagnostics.grid",
                    g.alphas.is_empty() || g.betas.is_empty() || g.ns.is_empty(),
                )?;
                self.diagnostics.batch.validate()?;
            }
            CommandKind::Train => self.train.validate()?,
            CommandKind::Sweep => self.sweep.validate()?,
        }
        Ok(())
    }

    /// Applies `path=value` overrides; `value` is parsed as JSON and taken
    /// as a string when that fails.
    pub fn with_overrides(self, sets: &[String], grids: &[String]) -> Result<Self, CliError> {
        if sets.is_empty() && grids.is_empty() {
            return Ok(self);
        }
        let mut doc = serde_json::to_value(&self).expect("config serializes");
        for item in sets {
            let (path, raw) = split_assignment(item)?;
            set_path(&mut doc, path, parse_scalar(raw))?;
        }
        for item in grids {
            let (path, raw) = split_assignment(item)?;
            let list = raw.split(',').map(|s| parse_scalar(s.trim())).collect();
            set_path(&mut doc, path, Value::Array(list))?;
        }
        serde_json::from_value(doc).map_err(|e| CliError::Config(format!("override: {e}")))
    }
}

fn split_assignment(item: &str) -> Result<(&str, &str), CliError> {
    item.split_once('=')
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| CliError::Config(format!("expected path=value, got {item:?}")))
}

fn parse_scalar(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Sets the dotted `path` in `doc`. Intermediate nulls (unset optional
/// sections) become objects; array elements are addressed by index.
fn set_path(doc: &mut Value, path: &str, value: Value) -> Result<(), CliError> {
    let mut node = doc;
    let keys: Vec<&str> = path.split('.').collect();
    for (depth, key) in keys.iter().enumerate() {
        if node.is_null() {
            *node = Value::Object(Default::default());
        }
        let last = depth + 1 == keys.len();
        node = match node {
            Value::Object(map) => {
                if !map.contains_key(*key) && !last {
                    return Err(CliError::Config(format!("unknown config path {path:?}")));
                }
                map.entry(key.to_string()).or_insert(Value::Null)
            }
            Value::Array(items) => {
                let idx: usize = key
                    .parse()
                    .map_err(|_| CliError::Config(format!("{path:?}: {key:?} is not an index")))?;
                items.get_mut(idx).ok_or_else(|| {
                    CliError::Config(format!("{path:?}: index {idx} out of range"))
                })?
            }
            _ => {
                return Err(CliError::Config(format!(
                    "{path:?}: {key:?} is not a section"
                )))
            }
        };
    }
    *node = value;
    Ok(())
}
