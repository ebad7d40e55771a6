//! Pipeline configuration loaded from a JSON file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backend::GenerationParams;
use mi_core::dialogue::{AblationFlags, SessionParams};

fn default_kind() -> String {
    "scripted".to_string()
}

fn default_key_env() -> String {
    "MIFORGE_API_KEY".to_string()
}

fn default_concurrency() -> usize {
    1
}

/// Chat provider selection and connection settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    /// "scripted" (offline synthetic + optional fixtures), "openai", "ollama".
    #[serde(default = "default_kind")]
    pub kind: String,
    #[serde(default)]
    pub base_url: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    /// Env var holding the API key for openai-style endpoints.
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    /// Optional JSONL of {prompt_hash, response} overlaying the scripted kind.
    #[serde(default)]
    pub fixture_path: Option<PathBuf>,
    #[serde(default)]
    pub max_retries: Option<u32>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: default_kind(),
            base_url: None,
            model: None,
            api_key_env: default_key_env(),
            concurrency: default_concurrency(),
            fixture_path: None,
            max_retries: None,
        }
    }
}

/// Embedding provider for reflection scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedderConfig {
    /// "stub" (offline deterministic) or "ollama".
    #[serde(default = "default_embed_kind")]
    pub kind: String,
    #[serde(default)]
    pub base_url: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    /// Optional text file of `anchor | text | cosine` overrides for the stub.
    #[serde(default)]
    pub overrides_path: Option<PathBuf>,
}

fn default_embed_kind() -> String {
    "stub".to_string()
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig {
            kind: default_embed_kind(),
            base_url: None,
            model: None,
            overrides_path: None,
        }
    }
}

/// Corpus shape: how many profiles and how many dialogues each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    #[serde(default = "default_num_profiles")]
    pub num_profiles: usize,
    #[serde(default = "default_dialogues_per_profile")]
    pub dialogues_per_profile: usize,
}

fn default_num_profiles() -> usize {
    4
}

fn default_dialogues_per_profile() -> usize {
    1
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            num_profiles: default_num_profiles(),
            dialogues_per_profile: default_dialogues_per_profile(),
        }
    }
}

/// Ablation switches; both on by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationConfig {
    #[serde(default = "default_true")]
    pub use_story: bool,
    #[serde(default = "default_true")]
    pub use_mi_code: bool,
}

fn default_true() -> bool {
    true
}

impl Default for AblationConfig {
    fn default() -> Self {
        AblationConfig { use_story: true, use_mi_code: true }
    }
}

impl AblationConfig {
    pub fn flags(&self) -> AblationFlags {
        AblationFlags { story_used: self.use_story, mi_code_used: self.use_mi_code }
    }
}

/// Full pipeline configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default)]
    pub embedder: EmbedderConfig,
    #[serde(default)]
    pub session: SessionParams,
    #[serde(default)]
    pub corpus: CorpusConfig,
    #[serde(default)]
    pub ablation: AblationConfig,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Custom 23-item instrument; the built-in stand-in is used when absent.
    #[serde(default)]
    pub instrument_path: Option<PathBuf>,
    /// Text corpus (one document per line) for fitting the perplexity model.
    /// When absent the model is fitted on the evaluated sessions themselves.
    #[serde(default)]
    pub reference_corpus: Option<PathBuf>,
    /// Custom stop-word list, one word per line.
    #[serde(default)]
    pub stop_list: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let data = fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let cfg: PipelineConfig = serde_json::from_str(&data)
            .map_err(|e| format!("{}: {e}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        let s = &self.session;
        if s.t_min < 1 || s.t_min > s.t_max {
            return Err(format!("need 1 <= t_min <= t_max, got {} and {}", s.t_min, s.t_max));
        }
        if s.context_window_k < 1 {
            return Err("context_window_k must be at least 1".to_string());
        }
        if !(s.temperature >= 0.0) {
            return Err(format!("temperature {} must be >= 0", s.temperature));
        }
        if !(s.top_p > 0.0 && s.top_p <= 1.0) {
            return Err(format!("top_p {} must be in (0, 1]", s.top_p));
        }
        if self.corpus.dialogues_per_profile < 1 {
            return Err("dialogues_per_profile must be at least 1".to_string());
        }
        if self.corpus.num_profiles < 1 {
            return Err("num_profiles must be at least 1".to_string());
        }
        if self.backend.concurrency < 1 {
            return Err("concurrency must be at least 1".to_string());
        }
        match self.backend.kind.as_str() {
            "scripted" => {}
            "openai" | "ollama" => {
                if self.backend.base_url.is_none() || self.backend.model.is_none() {
                    return Err(format!(
                        "backend kind {} needs base_url and model",
                        self.backend.kind
                    ));
                }
            }
            other => return Err(format!("unknown backend kind {other}")),
        }
        match self.embedder.kind.as_str() {
            "stub" => {}
            "ollama" => {
                if self.embedder.base_url.is_none() || self.embedder.model.is_none() {
                    return Err("embedder kind ollama needs base_url and model".to_string());
                }
            }
            other => return Err(format!("unknown embedder kind {other}")),
        }
        Ok(())
    }

    /// Sampling parameters with the configured retry budget.
    pub fn generation_params(&self) -> GenerationParams {
        GenerationParams {
            temperature: self.session.temperature,
            top_p: self.session.top_p,
            max_retries: self.backend.max_retries.unwrap_or(3),
        }
    }

    /// Label used in session records and report columns.
    pub fn model_name(&self) -> String {
        match (&self.backend.kind[..], &self.backend.model) {
            ("scripted", _) => "scripted".to_string(),
            (_, Some(m)) => m.clone(),
            (kind, None) => kind.to_string(),
        }
    }

    pub fn path_in_output(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }
}
