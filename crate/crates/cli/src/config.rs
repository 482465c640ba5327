//! Run configuration: a JSON file and command-line flags resolve into one
//! [`RunConfig`], which is embedded verbatim in every output.

use std::fmt;
use std::path::PathBuf;

use clap::ValueEnum;
use minksym::pipeline::{DecayScope, EstimatorConfig, MetricsScope, ScheduleKind};
use minksym::probes::MomentDist;
use serde::{Deserialize, Serialize};

/// A configuration problem: reported with exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    Decay,
    Pipeline,
    Probe,
    NormCheck,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Json,
    Csv,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ScopeArg {
    Relevant,
    Full,
}

impl From<ScopeArg> for DecayScope {
    fn from(s: ScopeArg) -> Self {
        match s {
            ScopeArg::Relevant => DecayScope::Relevant,
            ScopeArg::Full => DecayScope::FullSchedule,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MetricsArg {
    Every,
    Final,
}

impl From<MetricsArg> for MetricsScope {
    fn from(m: MetricsArg) -> Self {
        match m {
            MetricsArg::Every => MetricsScope::Every,
            MetricsArg::Final => MetricsScope::Final,
        }
    }
}

/// Everything a run depends on. Fields a command does not use stay unset.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<CommandName>,
    pub n: Option<usize>,
    pub ns: Vec<usize>,
    pub schedule: Option<ScheduleKind>,
    pub seeds: Vec<u64>,
    /// `ball`, `cross`, `kt:T` or `hull:FILE`.
    pub body: Option<String>,
    pub scope: Option<ScopeArg>,
    pub probe: Option<String>,
    pub trials: Option<usize>,
    pub c1: Option<f64>,
    /// Top-k size for `rearranged-moment`, inf-convolution weight for `norm-check`.
    pub k: Option<f64>,
    pub dist: Option<MomentDist>,
    pub vectors: Option<usize>,
    pub adversarial: Option<bool>,
    pub x: Option<Vec<f64>>,
    pub estimator: EstimatorConfig,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        serde_json::from_str(text).map_err(|e| config_error(format!("invalid run configuration: {e}")))
    }

    pub fn require_seeds(&self) -> anyhow::Result<()> {
        if self.seeds.is_empty() {
            return Err(config_error("no seed given: pass --seed (or --seeds); runs are never seeded from the clock"));
        }
        Ok(())
    }

    pub fn require_n(&self) -> anyhow::Result<usize> {
        self.n.ok_or_else(|| config_error("missing --n"))
    }
}
