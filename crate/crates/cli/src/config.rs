//! JSON run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tensordens::evaluate::{EvalOptions, ExampleId};
use tensordens::posterior::EstimatorSettings;
use tensordens::prior::PriorConfig;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub prior: PriorConfig,
    pub estimator: EstimatorSettings,
    pub eval: EvalOptions,
    pub io: IoConfig,
    pub benchmark: BenchmarkPlan,
}

/// Default paths; command-line flags take precedence.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoConfig {
    pub data: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridCell {
    pub n: usize,
    pub p: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchmarkPlan {
    pub example: ExampleId,
    pub grid: Vec<GridCell>,
    pub replications: usize,
}

impl Default for BenchmarkPlan {
    fn default() -> Self {
        Self {
            example: ExampleId::Example2,
            grid: vec![GridCell { n: 100, p: 5 }, GridCell { n: 100, p: 10 }],
            replications: 10,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("invalid config {}: {e}", path.display())))
    }
}
