//! Single-document JSON checkpoints.
//!
//! Layout: `version`, `samples_per_period`, `hierarchical`, `normalization`,
//! `modnet` and `cirnet` (each an architecture plus its flat parameter
//! array in the order documented in `lngru`), and the training config.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SurrogateError};
use crate::lngru::SequenceModel;
use crate::model::SurrogatePair;
use crate::norm::Normalization;
use crate::train::TrainConfig;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    pub samples_per_period: usize,
    pub hierarchical: bool,
    pub normalization: Normalization,
    pub modnet: SequenceModel,
    pub cirnet: SequenceModel,
    pub config: TrainConfig,
}

impl Checkpoint {
    pub fn new(pair: &SurrogatePair, config: &TrainConfig) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            samples_per_period: pair.samples_per_period,
            hierarchical: pair.hierarchical,
            normalization: pair.normalization,
            modnet: pair.modnet.clone(),
            cirnet: pair.cirnet.clone(),
            config: config.clone(),
        }
    }

    pub fn into_pair(self) -> Result<SurrogatePair> {
        for (name, m) in [("modnet", &self.modnet), ("cirnet", &self.cirnet)] {
            if m.params.len() != m.arch.parameter_count() {
                return Err(SurrogateError::Checkpoint(format!(
                    "{name} has {} parameters, architecture needs {}",
                    m.params.len(),
                    m.arch.parameter_count()
                )));
            }
            m.arch.validate()?;
        }
        SurrogatePair::new(
            self.modnet,
            self.cirnet,
            self.normalization,
            self.hierarchical,
            self.samples_per_period,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        match value.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == CHECKPOINT_VERSION as u64 => {}
            Some(v) => {
                return Err(SurrogateError::Checkpoint(format!(
                    "unsupported checkpoint version {v} (expected {CHECKPOINT_VERSION})"
                )))
            }
            None => return Err(SurrogateError::Checkpoint("missing version field".into())),
        }
        Ok(serde_json::from_value(value)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
