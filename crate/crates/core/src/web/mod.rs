//! URL canonicalization, HTML text extraction and robots.txt handling.

mod html;
mod robots;
mod url;

pub use self::html::extract_text;
pub use self::robots::{product_token, RobotsRules};
pub use self::url::{canonicalize_url, CanonicalUrl, UrlError};

use serde::{Deserialize, Serialize};

pub const DEFAULT_USER_AGENT: &str = concat!("crowdmine/", env!("CARGO_PKG_VERSION"));

/// How politely a page is fetched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FetchPolicy {
    pub user_agent: String,
    pub timeout_secs: f64,
    pub max_bytes: u64,
    /// Minimum spacing between two requests to the same origin.
    pub per_host_min_interval_secs: f64,
    pub respect_robots: bool,
    pub max_redirects: usize,
}

impl Default for FetchPolicy {
    fn default() -> Self {
        FetchPolicy {
            user_agent: DEFAULT_USER_AGENT.to_string(),
            timeout_secs: 20.0,
            max_bytes: 8 * 1024 * 1024,
            per_host_min_interval_secs: 2.0,
            respect_robots: true,
            max_redirects: 5,
        }
    }
}

impl FetchPolicy {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.timeout_secs > 0.0) {
            return Err("timeout must be > 0".into());
        }
        if self.max_bytes == 0 {
            return Err("max_bytes must be > 0".into());
        }
        if !(self.per_host_min_interval_secs >= 0.0) {
            return Err("per_host_min_interval must be >= 0".into());
        }
        if self.user_agent.trim().is_empty() {
            return Err("user_agent must not be empty".into());
        }
        Ok(())
    }
}
