//! Run configuration: a TOML document plus environment overrides.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::render::camera::{DEFAULT_ELEVATION, DEFAULT_FOV, DEFAULT_RESOLUTION, DEFAULT_VIEWS, RADIUS_FACTOR};
use crate::render::RingSpec;
use crate::vision::remote::DEFAULT_TIMEOUT;
use crate::vision::{OracleConfig, OracleProvider, ProviderError, RemoteProvider, VisionProvider};
use crate::voting::VoteConfig;

pub const ENV_PROVIDER_URL: &str = "CADTALKER_PROVIDER_URL";
pub const ENV_PROVIDER_KIND: &str = "CADTALKER_PROVIDER_KIND";
pub const ENV_LLM_URL: &str = "CADTALKER_LLM_URL";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    #[default]
    Remote,
    Oracle,
}

impl std::str::FromStr for ProviderKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "remote" => Ok(ProviderKind::Remote),
            "oracle" => Ok(ProviderKind::Oracle),
            other => Err(ConfigError::Invalid(format!("unknown provider kind `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    /// Base URL of the synthesis/detection/segmentation service.
    pub url: Option<String>,
    /// Base URL for label suggestion and synonym mapping; built-in
    /// fallbacks are used when absent.
    pub llm_url: Option<String>,
    pub timeout_s: f64,
    pub oracle: OracleConfig,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            kind: ProviderKind::Remote,
            url: None,
            llm_url: None,
            timeout_s: DEFAULT_TIMEOUT.as_secs_f64(),
            oracle: OracleConfig::default(),
        }
    }
}

impl ProviderConfig {
    pub fn build(&self) -> Result<Box<dyn VisionProvider>, ProviderError> {
        match self.kind {
            ProviderKind::Oracle => Ok(Box::new(OracleProvider::new(self.oracle.clone())?)),
            ProviderKind::Remote => {
                let url = self
                    .url
                    .as_deref()
                    .ok_or_else(|| ProviderError::Misconfigured(format!("provider.url is not set (or {ENV_PROVIDER_URL})")))?;
                if !(self.timeout_s > 0.0 && self.timeout_s.is_finite()) {
                    return Err(ProviderError::Misconfigured("provider.timeout_s must be positive".into()));
                }
                Ok(Box::new(RemoteProvider::new(url, self.llm_url.as_deref(), Duration::from_secs_f64(self.timeout_s))?))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    pub views: usize,
    pub elevation_deg: f64,
    pub resolution: u32,
    /// Depth closing passes; 5 suits high-detail programs, 3 low-detail, 1 human-made.
    pub closing_iterations: usize,
    pub radius_factor: f64,
    pub fov_deg: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            views: DEFAULT_VIEWS,
            elevation_deg: DEFAULT_ELEVATION,
            resolution: DEFAULT_RESOLUTION,
            closing_iterations: 3,
            radius_factor: RADIUS_FACTOR,
            fov_deg: DEFAULT_FOV,
        }
    }
}

impl RenderConfig {
    pub fn ring_spec(&self) -> RingSpec {
        RingSpec {
            views: self.views,
            elevation_deg: self.elevation_deg,
            resolution: self.resolution,
            radius_factor: self.radius_factor,
            fov_deg: self.fov_deg,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub root: PathBuf,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig { root: PathBuf::from("dataset") }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub port: u16,
    pub data_dir: PathBuf,
    pub static_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig { port: 8080, data_dir: PathBuf::from("dataset"), static_dir: None }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub provider: ProviderConfig,
    pub render: RenderConfig,
    pub vote: VoteConfig,
    pub dataset: DatasetConfig,
    pub service: ServiceConfig,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Config, ConfigError> {
        let c: Config = toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// Reads `path` (defaults when `None`) and applies environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Config, ConfigError> {
        let mut c = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| ConfigError::Io { path: p.to_path_buf(), message: e.to_string() })?;
                Config::from_toml(&text)?
            }
            None => Config::default(),
        };
        c.apply_env(|k| std::env::var(k).ok())?;
        Ok(c)
    }

    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(url) = lookup(ENV_PROVIDER_URL).filter(|u| !u.is_empty()) {
            self.provider.url = Some(url);
        }
        if let Some(url) = lookup(ENV_LLM_URL).filter(|u| !u.is_empty()) {
            self.provider.llm_url = Some(url);
        }
        if let Some(kind) = lookup(ENV_PROVIDER_KIND).filter(|k| !k.is_empty()) {
            self.provider.kind = kind.parse()?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.vote.validate().map_err(ConfigError::Invalid)?;
        self.provider.oracle.validate().map_err(ConfigError::Invalid)?;
        let r = &self.render;
        if r.views == 0 || r.resolution == 0 {
            return Err(ConfigError::Invalid("render.views and render.resolution must be positive".into()));
        }
        if !(r.fov_deg > 0.0 && r.fov_deg < 180.0) || !(r.radius_factor > 0.0) {
            return Err(ConfigError::Invalid("render.fov_deg must be in (0, 180) and radius_factor positive".into()));
        }
        Ok(())
    }

    /// JSON snapshot embedded in reports, keys sorted.
    pub fn snapshot(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config is plain data")
    }
}
