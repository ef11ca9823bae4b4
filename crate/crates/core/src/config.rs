//! Run configuration: defaults, optional TOML file, then CLI overrides,
//! in that precedence order (later wins).
//!
//! The file never carries secrets; the HTTP API key is read from the
//! environment variable named by `api_key_env`.

use crate::filter::FilterConfig;
use crate::model::VariantConfig;
use serde::Deserialize;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: toml::de::Error,
    },
}

/// Optional fields as they appear in a TOML config file. Unknown keys are
/// rejected so typos fail loudly.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub backend: Option<String>,
    pub model: Option<String>,
    pub base_url: Option<String>,
    pub api_key_env: Option<String>,
    pub temperature: Option<f64>,
    pub k: Option<usize>,
    pub length_limit_chars: Option<usize>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub cache_dir: Option<String>,
    pub rate_limit_per_minute: Option<u32>,
    pub ethics_blocklist: Option<Vec<String>>,
    pub subjective_markers: Option<Vec<String>>,
    pub subjective_threshold: Option<f64>,
    pub refusal_phrases: Option<Vec<String>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Fully resolved configuration a command runs with.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub backend: String,
    pub model: String,
    pub base_url: String,
    pub api_key_env: String,
    pub variant: VariantConfig,
    pub workers: usize,
    pub seed: u64,
    pub cache_dir: Option<String>,
    pub rate_limit_per_minute: Option<u32>,
    pub filter: FilterConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            backend: "scripted".into(),
            model: "scripted".into(),
            base_url: "https://api.openai.com/v1".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            variant: VariantConfig::default(),
            workers: 4,
            seed: 0,
            cache_dir: None,
            rate_limit_per_minute: None,
            filter: FilterConfig::default(),
        }
    }
}

impl RunConfig {
    /// Overlays every field the file sets on top of `self`.
    pub fn apply_file(mut self, file: &FileConfig) -> Self {
        if let Some(v) = &file.backend {
            self.backend = v.clone();
        }
        if let Some(v) = &file.model {
            self.model = v.clone();
        }
        if let Some(v) = &file.base_url {
            self.base_url = v.clone();
        }
        if let Some(v) = &file.api_key_env {
            self.api_key_env = v.clone();
        }
        if let Some(v) = file.temperature {
            self.variant.temperature = v;
        }
        if let Some(v) = file.k {
            self.variant.k = v;
        }
        if let Some(v) = file.length_limit_chars {
            self.variant.length_limit_chars = v;
        }
        if let Some(v) = file.workers {
            self.workers = v;
        }
        if let Some(v) = file.seed {
            self.seed = v;
        }
        if let Some(v) = &file.cache_dir {
            self.cache_dir = Some(v.clone());
        }
        if let Some(v) = file.rate_limit_per_minute {
            self.rate_limit_per_minute = Some(v);
        }
        if let Some(v) = &file.ethics_blocklist {
            self.filter.ethics_blocklist = v.clone();
        }
        if let Some(v) = &file.subjective_markers {
            self.filter.subjective_markers = v.clone();
        }
        if let Some(v) = file.subjective_threshold {
            self.filter.subjective_threshold = v;
        }
        if let Some(v) = &file.refusal_phrases {
            self.filter.refusal_phrases = v.clone();
        }
        self
    }
}
