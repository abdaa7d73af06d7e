//! Provenance envelope shared by every JSON artifact.

use std::path::Path;

use fbreg::estimator::FitConfig;
use fbreg::likelihoods::ModelKind;
use fbreg::regdata::{ColumnSpec, Dataset, DatasetSummary};
use fbreg::simharness::SimSpec;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tool {
    pub name: String,
    pub version: String,
}

impl Tool {
    pub fn current() -> Self {
        Tool {
            name: "fbreg".into(),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub input: String,
    pub response: String,
    pub covariates: Vec<ColumnSpec>,
    #[serde(rename = "N")]
    pub n_trials: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub digest: String,
    pub summary: DatasetSummary,
}

impl DatasetInfo {
    pub fn of(data: &Dataset) -> Self {
        DatasetInfo {
            digest: data.digest(),
            summary: data.summary(),
        }
    }
}

/// Fully resolved settings of one run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunConfig {
    pub subcommand: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub data: Option<DataConfig>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub model: Option<ModelKind>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fit: Option<FitConfig>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub simulation: Option<SimSpec>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub fits: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub profile: Vec<(String, String)>,
    pub format: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub schema: String,
    pub schema_version: u32,
    pub tool: Tool,
    pub config: RunConfig,
    pub dataset: Option<DatasetInfo>,
    pub seed: Option<u64>,
    pub result: T,
}

impl<T: Serialize> Artifact<T> {
    pub fn new(schema: &str, config: RunConfig, dataset: Option<DatasetInfo>, seed: Option<u64>, result: T) -> Self {
        Artifact {
            schema: schema.into(),
            schema_version: SCHEMA_VERSION,
            tool: Tool::current(),
            config,
            dataset,
            seed,
            result,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("artifact serializes");
        s.push('\n');
        s
    }
}

pub fn read<T: DeserializeOwned>(path: &Path, schema: &str) -> Result<Artifact<T>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let art: Artifact<T> = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("{}: not a {schema} artifact: {e}", path.display())))?;
    if art.schema != schema {
        return Err(CliError::usage(format!(
            "{}: expected schema {schema}, found {}",
            path.display(),
            art.schema
        )));
    }
    if art.schema_version != SCHEMA_VERSION {
        return Err(CliError::usage(format!(
            "{}: unsupported schema version {}",
            path.display(),
            art.schema_version
        )));
    }
    Ok(art)
}
