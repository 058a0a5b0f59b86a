//! Run configuration: a versioned JSON document in which unknown keys are
//! errors.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cemrm_core::bench::{self, Benchmark, BenchmarkKind};
use cemrm_core::campaign::{Aggregation, CampaignConfig, Evaluator, RecordMode, SurrogateEvaluator};
use cemrm_core::design_space::{self, DesignVector};
use cemrm_core::objective::RewardWeights;
use cemrm_core::sim::SimConfig;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::bundle::Bundle;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub campaign: CampaignConfig,
    pub evaluator: EvaluatorConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvaluatorConfig {
    Benchmark(BenchmarkConfig),
    Surrogate(SurrogateConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub name: String,
    #[serde(default = "default_dimension")]
    pub dimension: usize,
}

fn default_dimension() -> usize {
    bench::DEFAULT_DIMENSION
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurrogateConfig {
    /// Record bundle directory, relative to the config file. The built-in
    /// objects and scripted records when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bundle: Option<PathBuf>,
    /// `s0`; the uniform baseline when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_design: Option<DesignVector>,
    /// Collision-penalized weights for the object count when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<RewardWeights>,
    pub sim: SimConfig,
    pub record_mode: RecordMode,
    pub aggregation: Aggregation,
}

/// A configuration problem the user has to fix; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Parses JSON, naming the path of the offending field on failure.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            anyhow::anyhow!("{inner}")
        } else {
            anyhow::anyhow!("field `{path}`: {inner}")
        }
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_json(&text).with_context(|| format!("in {}", path.display()))
}

impl RunConfig {
    /// Reads and validates a config. An unreadable file is a [`UsageError`].
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = parse_json(&text).with_context(|| format!("in config {}", path.display()))?;
        if let EvaluatorConfig::Surrogate(s) = &mut cfg.evaluator {
            if let Some(b) = &s.bundle {
                if b.is_relative() {
                    s.bundle = Some(path.parent().unwrap_or(Path::new(".")).join(b));
                }
            }
        }
        cfg.check().with_context(|| format!("in config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            bail!("field `schema_version`: expected {SCHEMA_VERSION}, found {}", self.schema_version);
        }
        self.campaign.check()?;
        match &self.evaluator {
            EvaluatorConfig::Benchmark(b) => {
                Benchmark::new(BenchmarkKind::parse(&b.name).context("field `evaluator.benchmark.name`")?, b.dimension)
                    .context("field `evaluator.benchmark.dimension`")?;
            }
            EvaluatorConfig::Surrogate(s) => {
                if let Some(b) = &s.bundle {
                    if !b.join(crate::bundle::MANIFEST).is_file() {
                        bail!("field `evaluator.surrogate.bundle`: no manifest in {}", b.display());
                    }
                }
                if let Some(d) = &s.base_design {
                    if d.segments == 0 {
                        bail!("field `evaluator.surrogate.base_design.segments`: must be positive");
                    }
                }
                if let Some(w) = &s.weights {
                    w.check().context("field `evaluator.surrogate.weights`")?;
                }
                s.sim.check().context("field `evaluator.surrogate.sim`")?;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// The ground-truth evaluator this config selects.
    pub fn evaluator(&self) -> Result<Box<dyn Evaluator>> {
        Ok(match &self.evaluator {
            EvaluatorConfig::Benchmark(b) => Box::new(Benchmark::new(BenchmarkKind::parse(&b.name)?, b.dimension)?),
            EvaluatorConfig::Surrogate(s) => Box::new(s.build()?),
        })
    }
}

impl SurrogateConfig {
    pub fn base(&self) -> Result<DesignVector> {
        match &self.base_design {
            Some(d) => Ok(d.clone()),
            None => Ok(design_space::uniform_baseline(design_space::DEFAULT_SEGMENTS, design_space::DEFAULT_RADIUS_MM)?),
        }
    }

    pub fn build(&self) -> Result<SurrogateEvaluator> {
        let bundle = match &self.bundle {
            Some(dir) => Bundle::load(dir)?,
            None => Bundle::builtin(&self.sim),
        };
        let weights = self.weights.clone().unwrap_or_else(|| RewardWeights::collision_penalized(bundle.objects.len()));
        let mut ev = SurrogateEvaluator::new(self.base()?, bundle.objects, bundle.records, self.sim.clone(), weights)?;
        ev.record_mode = self.record_mode;
        ev.aggregation = self.aggregation;
        Ok(ev)
    }
}
