//! Runtime configuration: a TOML file, then `DATAMATE_*` environment
//! overrides on top.
//!
//! ```toml
//! [server]
//! bind = "127.0.0.1:8080"
//!
//! [linker]
//! theta = 0.5
//!
//! [decomposer]
//! strategy = "rules_then_remote"
//! beam_size = 5
//!
//! [remote]
//! endpoint = "https://models.example/decompose"
//! timeout_ms = 10000
//!
//! [datamation.canvas]
//! width = 800
//! height = 500
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datamation::DatamationOptions;
use crate::decomposer::{RemoteConfig, ResolveConfig, Strategy, DEFAULT_BEAM};
use crate::linker::THETA;
use crate::session::EngineConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServerConfig {
    pub bind: String,
    /// Directory for per-session JSON snapshots; none keeps sessions in
    /// memory only.
    pub snapshot_dir: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            bind: "127.0.0.1:8080".into(),
            snapshot_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkerConfig {
    pub theta: f64,
}

impl Default for LinkerConfig {
    fn default() -> Self {
        LinkerConfig { theta: THETA }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecomposerConfig {
    pub strategy: Strategy,
    pub beam_size: usize,
}

impl Default for DecomposerConfig {
    fn default() -> Self {
        DecomposerConfig {
            strategy: Strategy::default(),
            beam_size: DEFAULT_BEAM,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub server: ServerConfig,
    pub linker: LinkerConfig,
    pub decomposer: DecomposerConfig,
    pub remote: RemoteConfig,
    pub datamation: DatamationOptions,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("environment variable {name}: cannot use '{value}'")]
    Env { name: String, value: String },
}

fn parsed<T: std::str::FromStr>(name: &str, value: &str) -> Result<T, ConfigError> {
    value.trim().parse().map_err(|_| ConfigError::Env {
        name: name.to_string(),
        value: value.to_string(),
    })
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Reads `path` if given, then applies the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                    path: p.to_path_buf(),
                    source,
                })?;
                Config::from_toml(&text)?
            }
            None => Config::default(),
        };
        config.apply_env(std::env::vars())?;
        Ok(config)
    }

    /// Applies recognised `DATAMATE_*` variables; others are ignored.
    pub fn apply_env(
        &mut self,
        vars: impl IntoIterator<Item = (String, String)>,
    ) -> Result<(), ConfigError> {
        for (name, value) in vars {
            match name.as_str() {
                "DATAMATE_BIND" => self.server.bind = value,
                "DATAMATE_SNAPSHOT_DIR" => self.server.snapshot_dir = Some(PathBuf::from(value)),
                "DATAMATE_THETA" => self.linker.theta = parsed(&name, &value)?,
                "DATAMATE_STRATEGY" => {
                    self.decomposer.strategy =
                        serde_json::from_value(serde_json::Value::String(value.clone()))
                            .map_err(|_| ConfigError::Env { name, value })?
                }
                "DATAMATE_BEAM_SIZE" => self.decomposer.beam_size = parsed(&name, &value)?,
                "DATAMATE_REMOTE_ENDPOINT" => self.remote.endpoint = value,
                "DATAMATE_REMOTE_TIMEOUT_MS" => self.remote.timeout_ms = parsed(&name, &value)?,
                "DATAMATE_REMOTE_RETRIES" => self.remote.retry_budget = parsed(&name, &value)?,
                "DATAMATE_CANVAS_WIDTH" => self.datamation.canvas.width = parsed(&name, &value)?,
                "DATAMATE_CANVAS_HEIGHT" => self.datamation.canvas.height = parsed(&name, &value)?,
                _ => {}
            }
        }
        Ok(())
    }

    /// Engine settings, with an HTTP model client when an endpoint is set.
    pub fn engine(&self) -> EngineConfig {
        #[allow(unused_mut)]
        let mut resolve = ResolveConfig {
            strategy: self.decomposer.strategy,
            theta: self.linker.theta,
            beam_size: self.decomposer.beam_size,
            retry_budget: self.remote.retry_budget,
            ..ResolveConfig::default()
        };
        #[cfg(feature = "remote")]
        if !self.remote.endpoint.is_empty() {
            match crate::decomposer::HttpModelClient::new(&self.remote) {
                Ok(client) => resolve.remote = Some(std::sync::Arc::new(client)),
                Err(e) => tracing::warn!(error = %e, "remote model client disabled"),
            }
        }
        EngineConfig {
            resolve,
            datamation: self.datamation,
        }
    }
}
