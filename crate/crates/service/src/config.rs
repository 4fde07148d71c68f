//! Service settings read from the environment.

use std::net::SocketAddr;
use std::path::PathBuf;

use conseq_core::consequence::ExplainConfig;
use thiserror::Error;

pub const LISTEN_VAR: &str = "CONSEQ_LISTEN";
pub const DATA_VAR: &str = "CONSEQ_DATA";
pub const ALPHA_VAR: &str = "CONSEQ_ALPHA";
pub const TOP_K_VAR: &str = "CONSEQ_TOP_K";
pub const ADMIN_TOKEN_VAR: &str = "CONSEQ_ADMIN_TOKEN";

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{var}: {message}")]
pub struct ConfigError {
    pub var: &'static str,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    /// Event log path. Created on first use.
    pub data_file: PathBuf,
    /// Default significance level for `/analysis`.
    pub alpha: f64,
    pub explain: ExplainConfig,
    /// Bearer token guarding `/export` and `/analysis`. Open when unset.
    pub admin_token: Option<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            listen: SocketAddr::from(([127, 0, 0, 1], 8080)),
            data_file: PathBuf::from("conseq-events.jsonl"),
            alpha: 0.05,
            explain: ExplainConfig::default(),
            admin_token: None,
        }
    }
}

impl ServiceConfig {
    pub fn from_env() -> Result<Self, ConfigError> {
        Self::from_lookup(|name| std::env::var(name).ok())
    }

    /// Builds the config from any variable source; unset variables keep defaults.
    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let mut cfg = ServiceConfig::default();
        let bad = |var, message: String| ConfigError { var, message };
        if let Some(v) = lookup(LISTEN_VAR) {
            cfg.listen = v.parse().map_err(|e| bad(LISTEN_VAR, format!("`{v}`: {e}")))?;
        }
        if let Some(v) = lookup(DATA_VAR) {
            cfg.data_file = PathBuf::from(v);
        }
        if let Some(v) = lookup(ALPHA_VAR) {
            let alpha: f64 = v.parse().map_err(|e| bad(ALPHA_VAR, format!("`{v}`: {e}")))?;
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(bad(ALPHA_VAR, format!("{alpha} is not in (0, 1)")));
            }
            cfg.alpha = alpha;
        }
        if let Some(v) = lookup(TOP_K_VAR) {
            let k: usize = v.parse().map_err(|e| bad(TOP_K_VAR, format!("`{v}`: {e}")))?;
            if k == 0 {
                return Err(bad(TOP_K_VAR, "must be at least 1".into()));
            }
            cfg.explain.top_k = k;
        }
        cfg.admin_token = lookup(ADMIN_TOKEN_VAR).filter(|t| !t.is_empty());
        Ok(cfg)
    }
}
