use std::path::PathBuf;

use causeway_core::discovery::DiscoveryConfig;
use serde::{Deserialize, Serialize};

/// Prefix for environment overrides, e.g. `CAUSEWAY_PORT=9000`.
pub const ENV_PREFIX: &str = "CAUSEWAY_";

/// Default replay rate in rows per second; matches a 1.95 Hz plant sampling clock.
pub const DEFAULT_REPLAY_RATE: f64 = 1.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServeOptions {
    pub host: String,
    pub port: u16,
    /// Optional directory preloaded at start-up: `data.csv`, `ontology.json`, `tolerances.json`, `graph.json`.
    pub data_dir: Option<PathBuf>,
    /// Directory for the memory files; memory is disabled when unset.
    pub state_dir: Option<PathBuf>,
    pub replay_rate: f64,
    pub discovery: DiscoveryConfig,
}

impl Default for ServeOptions {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8080,
            data_dir: None,
            state_dir: None,
            replay_rate: DEFAULT_REPLAY_RATE,
            discovery: DiscoveryConfig::default(),
        }
    }
}

impl ServeOptions {
    /// Applies `CAUSEWAY_HOST`, `_PORT`, `_DATA_DIR`, `_STATE_DIR`, `_REPLAY_RATE`
    /// and `_CONFIG` (a discovery-config JSON file) from `vars`.
    pub fn apply_env<I, K, V>(&mut self, vars: I) -> Result<(), String>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        for (k, v) in vars {
            let Some(key) = k.as_ref().strip_prefix(ENV_PREFIX) else { continue };
            let v = v.as_ref();
            match key {
                "HOST" => self.host = v.to_string(),
                "PORT" => self.port = v.parse().map_err(|_| format!("{ENV_PREFIX}PORT: invalid port `{v}`"))?,
                "DATA_DIR" => self.data_dir = Some(v.into()),
                "STATE_DIR" => self.state_dir = Some(v.into()),
                "REPLAY_RATE" => {
                    self.replay_rate = v.parse().map_err(|_| format!("{ENV_PREFIX}REPLAY_RATE: invalid rate `{v}`"))?
                }
                "CONFIG" => self.discovery = load_discovery_config(v)?,
                _ => {}
            }
        }
        Ok(())
    }
}

pub fn load_discovery_config(path: &str) -> Result<DiscoveryConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))?;
    let cfg: DiscoveryConfig = serde_json::from_str(&text).map_err(|e| format!("{path}: {e}"))?;
    cfg.validate().map_err(|e| format!("{path}: {e}"))?;
    Ok(cfg)
}
