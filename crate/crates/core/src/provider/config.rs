use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;

use super::{
    ChatProvider, GenerationParams, HttpProvider, ModelSettings, ProviderError, RecordingProvider,
    ReplayProvider,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApiFlavor {
    /// Anthropic Messages API.
    Anthropic,
    /// OpenAI-compatible chat completions.
    Openai,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderMode {
    #[default]
    Live,
    Record,
    Replay,
}

/// Provider configuration file (TOML).
///
/// ```toml
/// api = "anthropic"
/// model = "claude-sonnet-4-5"
/// mode = "replay"
/// cassettes = "cassettes"
/// temperature = 0.0
/// max_output_tokens = 8192
/// ```
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    #[serde(default)]
    pub api: Option<ApiFlavor>,
    #[serde(default)]
    pub endpoint: Option<String>,
    pub model: String,
    #[serde(default)]
    pub mode: ProviderMode,
    /// Environment variable holding the API key.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub cassettes: Option<PathBuf>,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_output")]
    pub max_output_tokens: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_temperature() -> f64 {
    GenerationParams::default().temperature
}

fn default_max_output() -> u32 {
    GenerationParams::default().max_output_tokens
}

fn default_timeout() -> u64 {
    120
}

impl ProviderConfig {
    pub fn replay(model: impl Into<String>, cassettes: impl Into<PathBuf>) -> Self {
        Self {
            api: None,
            endpoint: None,
            model: model.into(),
            mode: ProviderMode::Replay,
            api_key_env: None,
            cassettes: Some(cassettes.into()),
            temperature: default_temperature(),
            max_output_tokens: default_max_output(),
            timeout_secs: default_timeout(),
        }
    }

    /// Reads a config file; relative cassette paths resolve against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: ProviderConfig = toml::from_str(&text)
            .map_err(|e| ProviderError::Config(format!("{}: {e}", path.display())))?;
        if let (Some(dir), Some(base)) = (cfg.cassettes.as_mut(), path.parent()) {
            if dir.is_relative() {
                *dir = base.join(&*dir);
            }
        }
        Ok(cfg)
    }

    pub fn params(&self) -> GenerationParams {
        GenerationParams {
            temperature: self.temperature,
            max_output_tokens: self.max_output_tokens,
        }
    }

    /// Model id and parameters for pipeline calls, with the default retry
    /// policy.
    pub fn settings(&self) -> ModelSettings {
        let mut settings = ModelSettings::new(self.model.clone());
        settings.params = self.params();
        settings
    }

    fn cassette_dir(&self) -> Result<&Path, ProviderError> {
        self.cassettes
            .as_deref()
            .ok_or_else(|| ProviderError::Config("record/replay mode needs 'cassettes'".into()))
    }

    fn live(&self) -> Result<HttpProvider, ProviderError> {
        let api = self
            .api
            .ok_or_else(|| ProviderError::Config("live mode needs 'api'".into()))?;
        let key_var = self.api_key_env.clone().unwrap_or_else(|| {
            match api {
                ApiFlavor::Anthropic => "ANTHROPIC_API_KEY",
                ApiFlavor::Openai => "OPENAI_API_KEY",
            }
            .to_string()
        });
        let key = std::env::var(&key_var).map_err(|_| {
            ProviderError::Config(format!("environment variable {key_var} is not set"))
        })?;
        HttpProvider::new(
            api,
            self.endpoint.clone(),
            key,
            Duration::from_secs(self.timeout_secs),
        )
    }

    pub fn build(&self) -> Result<Arc<dyn ChatProvider>, ProviderError> {
        Ok(match self.mode {
            ProviderMode::Live => Arc::new(self.live()?),
            ProviderMode::Record => {
                Arc::new(RecordingProvider::new(self.live()?, self.cassette_dir()?))
            }
            ProviderMode::Replay => Arc::new(ReplayProvider::new(self.cassette_dir()?)),
        })
    }
}
