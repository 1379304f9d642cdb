use std::collections::BTreeMap;
use std::path::{Component, Path};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subcommand {
    Sample,
    Moments,
    Tails,
    Chaos,
    Decouple,
    Gamma,
    Rip,
}

impl Subcommand {
    pub const ALL: [Subcommand; 7] = [
        Subcommand::Sample,
        Subcommand::Moments,
        Subcommand::Tails,
        Subcommand::Chaos,
        Subcommand::Decouple,
        Subcommand::Gamma,
        Subcommand::Rip,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Sample => "sample",
            Subcommand::Moments => "moments",
            Subcommand::Tails => "tails",
            Subcommand::Chaos => "chaos",
            Subcommand::Decouple => "decouple",
            Subcommand::Gamma => "gamma",
            Subcommand::Rip => "rip",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown subcommand `{name}`")))
    }

    /// Keys that must be present.
    pub fn required(self) -> &'static [&'static str] {
        match self {
            Subcommand::Sample => &["alpha", "count"],
            Subcommand::Moments => &["alpha", "p_grid", "trials"],
            Subcommand::Tails => &["statistic", "thresholds", "trials"],
            Subcommand::Chaos => &["alpha", "n", "m", "s", "members", "thresholds", "trials"],
            Subcommand::Decouple => &["alpha", "n", "members", "f_tag", "c_grid", "trials"],
            Subcommand::Gamma => &["alpha", "n", "m", "s", "members"],
            Subcommand::Rip => &["alpha", "n", "m_grid", "s", "delta_target", "trials"],
        }
    }

    /// Keys that may be present besides the required ones.
    pub fn optional(self) -> &'static [&'static str] {
        match self {
            Subcommand::Sample => &["seed", "output_path", "standardized"],
            Subcommand::Moments => &["seed", "output_path", "standardized"],
            Subcommand::Tails => &["seed", "output_path", "alpha", "value", "standardized"],
            Subcommand::Chaos => &["seed", "output_path", "fit_rule", "min_survival"],
            Subcommand::Decouple => &["seed", "output_path", "power", "replicates"],
            Subcommand::Gamma => &["seed", "output_path"],
            Subcommand::Rip => &["seed", "output_path"],
        }
    }
}

/// A validated experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub subcommand: Subcommand,
    pub parameters: BTreeMap<String, Value>,
}

impl ExperimentConfig {
    pub fn new(subcommand: Subcommand, parameters: BTreeMap<String, Value>) -> Result<Self> {
        let config = Self {
            schema_version: SCHEMA_VERSION,
            subcommand,
            parameters,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Key set and value types, then value ranges.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let sub = self.subcommand;
        let unknown: Vec<&str> = self
            .parameters
            .keys()
            .map(String::as_str)
            .filter(|k| !sub.required().contains(k) && !sub.optional().contains(k))
            .collect();
        let missing: Vec<&str> = sub
            .required()
            .iter()
            .copied()
            .filter(|k| !self.parameters.contains_key(*k))
            .collect();
        if !unknown.is_empty() || !missing.is_empty() {
            let mut parts = Vec::new();
            if !unknown.is_empty() {
                parts.push(format!("unknown keys: {}", unknown.join(", ")));
            }
            if !missing.is_empty() {
                parts.push(format!("missing keys: {}", missing.join(", ")));
            }
            return Err(Error::Config(format!(
                "{}: {}",
                sub.name(),
                parts.join("; ")
            )));
        }
        if let Some(path) = self.parameters.get("output_path") {
            let path = path
                .as_str()
                .ok_or_else(|| Error::Config("output_path: expected a string".into()))?;
            let p = Path::new(path);
            if path.is_empty() || !p.components().all(|c| matches!(c, Component::Normal(_))) {
                return Err(Error::Config(format!(
                    "output_path: `{path}` must be a relative path inside the output directory"
                )));
            }
        }
        super::params::Params::new(self).check()
    }

    pub fn seed(&self) -> Result<u64> {
        super::params::Params::new(self).u64_or("seed", 0)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.parameters.insert("seed".into(), Value::from(seed));
        self
    }

    /// Stem of the result files, relative to the output directory.
    pub fn output_stem(&self) -> String {
        self.parameters
            .get("output_path")
            .and_then(Value::as_str)
            .unwrap_or(self.subcommand.name())
            .to_string()
    }
}
