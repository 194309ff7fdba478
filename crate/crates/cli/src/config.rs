//! Experiment configuration: embedded defaults, TOML files, and dotted-key
//! command-line overrides.
//!
//! Every key has a default, so a config file only needs the keys it changes
//! and `--set a.b.c=value` can override any of them. Unknown keys — in the
//! file or in an override — are rejected up front rather than silently
//! ignored.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tiltlab::env::EnvConfig;
use tiltlab::model::TrainConfig;

use crate::{config_error, CliResult};

/// One experiment: environment, training method and hyperparameters, the
/// seed list, and where results land.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub train: TrainConfig,
    /// One full training run per seed; the seed fixes the world, the
    /// normalizer calibration, and every network initialization.
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    /// Frozen actor checkpoint, required by the residual methods
    /// (`srpl`, `mbrpl`) and rejected for the others.
    pub baseline_checkpoint: Option<PathBuf>,
    /// Episodes per evaluation report (random start tilts per episode).
    pub eval_episodes: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            env: EnvConfig::default(),
            train: TrainConfig::default(),
            seeds: vec![0, 1, 2, 3, 4],
            out_dir: PathBuf::from("runs/experiment"),
            baseline_checkpoint: None,
            eval_episodes: 20,
        }
    }
}

impl ExperimentConfig {
    /// Defaults, overlaid with `file` (if given), overlaid with `--set`
    /// overrides, then validated.
    pub fn load(file: Option<&Path>, sets: &[String]) -> CliResult<ExperimentConfig> {
        let cfg = Self::load_raw(file, sets)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// [`load`](Self::load) without the semantic validation pass — keys are
    /// still checked against the schema. Pretraining uses this so one config
    /// file can serve a whole pipeline: it overrides the method and baseline
    /// settings itself before validating.
    pub fn load_raw(file: Option<&Path>, sets: &[String]) -> CliResult<ExperimentConfig> {
        let mut tree = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    config_error(format!("cannot read config {}: {e}", path.display()))
                })?;
                text.parse::<toml::Table>()
                    .map_err(|e| config_error(format!("{}: {e}", path.display())))?
            }
            None => toml::Table::new(),
        };
        for spec in sets {
            apply_set(&mut tree, spec)?;
        }
        let schema = schema_tree();
        check_known_keys(&toml::Value::Table(tree.clone()), &schema, "")?;
        toml::Value::Table(tree)
            .try_into()
            .map_err(|e| config_error(e.to_string()))
    }

    /// Fail-fast validation of every invariant the harness relies on; runs
    /// before any compute.
    pub fn validate(&self) -> CliResult<()> {
        self.env
            .validate()
            .map_err(|e| config_error(format!("env: {e}")))?;
        self.train
            .validate()
            .map_err(|e| config_error(format!("train: {e}")))?;
        if self.seeds.is_empty() {
            return Err(config_error("seeds must not be empty"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(config_error("seeds must be distinct"));
        }
        if self.train.method.uses_baseline() && self.baseline_checkpoint.is_none() {
            return Err(config_error(format!(
                "method {} requires baseline_checkpoint",
                self.train.method.name()
            )));
        }
        if !self.train.method.uses_baseline() && self.baseline_checkpoint.is_some() {
            return Err(config_error(format!(
                "method {} does not take a baseline_checkpoint",
                self.train.method.name()
            )));
        }
        if let Some(path) = &self.baseline_checkpoint {
            if !path.is_file() {
                return Err(config_error(format!(
                    "baseline_checkpoint {} does not exist",
                    path.display()
                )));
            }
        }
        if self.eval_episodes == 0 {
            return Err(config_error("eval_episodes must be positive"));
        }
        Ok(())
    }
}

/// The full legal key tree, from a probe config with every optional field
/// populated.
fn schema_tree() -> toml::Value {
    let probe = ExperimentConfig {
        baseline_checkpoint: Some(PathBuf::new()),
        ..ExperimentConfig::default()
    };
    toml::Value::try_from(&probe).expect("default config serializes")
}

/// Rejects any key that does not exist in the schema, recursively, with the
/// full dotted path in the message.
fn check_known_keys(value: &toml::Value, schema: &toml::Value, path: &str) -> CliResult<()> {
    let (toml::Value::Table(given), toml::Value::Table(known)) = (value, schema) else {
        return Ok(()); // leaf: type errors surface during deserialization
    };
    for (key, sub) in given {
        let full = if path.is_empty() {
            key.clone()
        } else {
            format!("{path}.{key}")
        };
        match known.get(key) {
            Some(schema_sub) => check_known_keys(sub, schema_sub, &full)?,
            None => return Err(config_error(format!("unknown config key `{full}`"))),
        }
    }
    Ok(())
}

/// Applies one `key.path=value` override. The value is parsed as TOML
/// (numbers, booleans, arrays, quoted strings); anything that does not
/// parse is taken as a bare string.
fn apply_set(tree: &mut toml::Table, spec: &str) -> CliResult<()> {
    let Some((key, raw)) = spec.split_once('=') else {
        return Err(config_error(format!(
            "override `{spec}` must look like key=value"
        )));
    };
    let key = key.trim();
    if key.is_empty() {
        return Err(config_error(format!("override `{spec}` has an empty key")));
    }
    let value = parse_toml_value(raw.trim());

    let segments: Vec<&str> = key.split('.').collect();
    let mut table = tree;
    for seg in &segments[..segments.len() - 1] {
        let entry = table
            .entry(seg.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = match entry {
            toml::Value::Table(t) => t,
            other => {
                return Err(config_error(format!(
                    "override `{key}`: `{seg}` is a {}, not a table",
                    other.type_str()
                )))
            }
        };
    }
    table.insert(segments[segments.len() - 1].to_string(), value);
    Ok(())
}

fn parse_toml_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}
