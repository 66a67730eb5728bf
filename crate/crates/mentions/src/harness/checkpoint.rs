//! Versioned parameter checkpoints: a JSON map from parameter name to
//! shape and values, plus the vocabulary and model geometry needed to
//! rebuild the network. Save/load round-trips are value-exact (the JSON
//! float rendering is shortest-round-trip).

use std::path::Path;

use thiserror::Error;

use super::config::{ModelKind, RunConfig};
use crate::autodiff::nn::Params;
use crate::corpus::Vocab;
use crate::objectives::LossConfig;
use crate::spans::{SpanScope, SpanScorerConfig};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("checkpoint parse error: {0}")]
    Parse(String),
    #[error("unsupported checkpoint version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("model-vocabulary mismatch: embedding table has {rows} rows but the vocabulary has {vocab} entries")]
    VocabMismatch { rows: usize, vocab: usize },
}

/// Geometry and decode settings a checkpoint carries so evaluation can
/// rebuild the exact model.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelConfig {
    pub model: ModelKind,
    pub multitask: bool,
    pub d_emb: usize,
    pub d_hidden: usize,
    pub d_span: usize,
    pub d_dist: usize,
    pub span: SpanScorerConfig,
    pub loss: LossConfig,
    pub max_antecedents: usize,
    pub depth_cap: usize,
}

impl ModelConfig {
    pub fn from_run(cfg: &RunConfig) -> Self {
        ModelConfig {
            model: cfg.model,
            multitask: cfg.multitask,
            d_emb: cfg.d_emb,
            d_hidden: cfg.d_hidden,
            d_span: cfg.d_span(),
            d_dist: cfg.d_dist,
            span: cfg.span_config(),
            loss: cfg.loss,
            max_antecedents: cfg.max_antecedents,
            depth_cap: cfg.depth_cap,
        }
    }

    pub fn scope(&self) -> SpanScope {
        self.span.scope
    }
}

/// A trained model: geometry, vocabulary and parameter values.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub params: Params,
}

impl Checkpoint {
    pub fn new(config: ModelConfig, vocab: Vocab, params: Params) -> Self {
        Checkpoint { version: CHECKPOINT_VERSION, config, vocab, params }
    }

    /// Structural consistency: the embedding table must match the
    /// vocabulary row for row.
    pub fn validate(&self) -> Result<(), CheckpointError> {
        if self.version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Version {
                found: self.version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let rows = self
            .params
            .get("enc.emb")
            .map(|t| t.shape()[0])
            .unwrap_or(0);
        if rows != self.vocab.len() {
            return Err(CheckpointError::VocabMismatch { rows, vocab: self.vocab.len() });
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CheckpointError> {
        let ckpt: Checkpoint =
            serde_json::from_str(text).map_err(|e| CheckpointError::Parse(e.to_string()))?;
        ckpt.validate()?;
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        std::fs::write(path, self.to_json()).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let text = std::fs::read_to_string(path).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}
