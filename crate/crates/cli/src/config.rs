//! Optional JSON run configuration. Command-line flags override its values.

use std::path::Path;

use anyhow::Result;
use ribsupp::phantom::PhantomSpec;
use ribsupp::suppression::{PipelineOptions, RibParams};
use ribsupp::tuner::ParamSpace;
use serde::{Deserialize, Serialize};

use crate::run::UsageError;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub params: Option<RibParams>,
    pub options: Option<PipelineOptions>,
    pub space: Option<ParamSpace>,
    pub budget: Option<usize>,
    pub phantom: Option<PhantomSpec>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| {
            UsageError::new("config", format!("cannot read {}: {e}", path.display()))
        })?;
        let cfg = serde_json::from_str(&text).map_err(|e| {
            UsageError::new(
                "config",
                format!("malformed config {}: {e}", path.display()),
            )
        })?;
        Ok(cfg)
    }
}
