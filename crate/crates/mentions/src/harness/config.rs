//! Run configuration: a flat, human-readable TOML file. Every run writes
//! its resolved configuration next to its outputs.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::autodiff::optim::OptimizerKind;
use crate::objectives::{LossConfig, LossConfigError, LossMode};
use crate::spans::{SpanConfigError, SpanScope, SpanScorerConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("referenced path does not exist: {0}")]
    MissingPath(PathBuf),
    #[error(transparent)]
    Loss(#[from] LossConfigError),
    #[error(transparent)]
    Span(#[from] SpanConfigError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Tagger,
    Span,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelKind::Tagger => write!(f, "tagger"),
            ModelKind::Span => write!(f, "span"),
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tagger" => Ok(ModelKind::Tagger),
            "span" => Ok(ModelKind::Span),
            other => Err(format!("unknown model {other:?} (expected tagger or span)")),
        }
    }
}

fn default_d_emb() -> usize {
    32
}
fn default_d_hidden() -> usize {
    64
}
fn default_lr() -> f64 {
    1e-3
}
fn default_epochs() -> usize {
    30
}
fn default_optimizer() -> OptimizerKind {
    OptimizerKind::Adam
}
fn default_max_antecedents() -> usize {
    crate::coref::DEFAULT_MAX_ANTECEDENTS
}
fn default_depth_cap() -> usize {
    crate::tags::DEFAULT_DEPTH_CAP
}
fn default_scope() -> SpanScope {
    SpanScope::Sentence
}
fn default_d_dist() -> usize {
    8
}

/// Everything a training run needs. The seed is mandatory.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RunConfig {
    pub model: ModelKind,
    #[serde(flatten)]
    pub loss: LossConfig,
    #[serde(default)]
    pub multitask: bool,

    #[serde(default = "default_d_emb")]
    pub d_emb: usize,
    #[serde(default = "default_d_hidden")]
    pub d_hidden: usize,
    /// Span-representation width; defaults to d_hidden.
    #[serde(default)]
    pub d_span: Option<usize>,
    #[serde(default = "default_d_dist")]
    pub d_dist: usize,

    #[serde(default = "default_optimizer")]
    pub optimizer: OptimizerKind,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    pub seed: u64,

    pub train_corpus: PathBuf,
    #[serde(default)]
    pub eval_corpus: Option<PathBuf>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,

    #[serde(default = "default_scope")]
    pub span_scope: SpanScope,
    #[serde(default)]
    pub span_max_len: Option<usize>,
    #[serde(default)]
    pub size_embedding: bool,
    #[serde(default)]
    pub attention_pooling: bool,

    #[serde(default = "default_max_antecedents")]
    pub max_antecedents: usize,
    #[serde(default = "default_depth_cap")]
    pub depth_cap: usize,
    /// Stop early once training mention F1 reaches this value.
    #[serde(default)]
    pub stop_at_train_f1: Option<f64>,
}

impl RunConfig {
    /// A minimal config for in-memory training (paths unused).
    pub fn in_memory(model: ModelKind, seed: u64) -> Self {
        RunConfig {
            model,
            loss: LossConfig::default(),
            multitask: false,
            d_emb: default_d_emb(),
            d_hidden: default_d_hidden(),
            d_span: None,
            d_dist: default_d_dist(),
            optimizer: default_optimizer(),
            lr: default_lr(),
            epochs: default_epochs(),
            seed,
            train_corpus: PathBuf::new(),
            eval_corpus: None,
            out_dir: None,
            span_scope: default_scope(),
            span_max_len: None,
            size_embedding: false,
            attention_pooling: false,
            max_antecedents: default_max_antecedents(),
            depth_cap: default_depth_cap(),
            stop_at_train_f1: None,
        }
    }

    pub fn d_span(&self) -> usize {
        self.d_span.unwrap_or(self.d_hidden)
    }

    pub fn span_config(&self) -> SpanScorerConfig {
        SpanScorerConfig {
            scope: self.span_scope,
            max_len: self.span_max_len,
            size_embedding: self.size_embedding,
            attention_pooling: self.attention_pooling,
        }
    }

    /// Validate knobs; with `check_paths` the referenced corpora must
    /// exist (the rule at run start).
    pub fn validate(&self, check_paths: bool) -> Result<(), ConfigError> {
        match self.model {
            ModelKind::Tagger => self.loss.validate_for_tagger()?,
            ModelKind::Span => self.loss.validate_for_spans()?,
        }
        self.span_config().validate()?;
        if check_paths {
            if !self.train_corpus.exists() {
                return Err(ConfigError::MissingPath(self.train_corpus.clone()));
            }
            if let Some(p) = &self.eval_corpus {
                if !p.exists() {
                    return Err(ConfigError::MissingPath(p.clone()));
                }
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Short, log-friendly description of the loss settings.
    pub fn loss_summary(&self) -> String {
        let (w, rho) = match self.loss.mode {
            LossMode::Plain => (String::from("NA"), String::from("NA")),
            LossMode::Weighted { w } => (format!("{w}"), String::from("NA")),
            LossMode::Soft { rho } => (String::from("NA"), format!("{rho}")),
        };
        format!(
            "mode={} w={} rho={} tau={} beam={}",
            self.loss.mode.name(),
            w,
            rho,
            self.loss.tau,
            self.loss.beam
        )
    }
}
