//! Polite page retrieval.
//!
//! Every request, robots.txt included, goes through a per-origin slot that
//! serializes requests to the origin and spaces their start times by at
//! least the policy interval (or the site's `Crawl-delay`, if larger).
//! Redirects are followed by hand so each hop is checked against the robots
//! rules of the host it lands on.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use crowdmine::web::{canonicalize_url, extract_text, CanonicalUrl, FetchPolicy, RobotsRules};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// robots.txt bodies beyond this size are truncated before parsing.
const ROBOTS_MAX_BYTES: u64 = 512 * 1024;
const ROBOTS_TTL: Duration = Duration::from_secs(3600);
/// Unreachable robots.txt means "disallow everything", but only briefly.
const ROBOTS_UNREACHABLE_TTL: Duration = Duration::from_secs(60);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FetchError {
    #[error("robots policy disallows {0}")]
    RobotsDenied(String),
    #[error("timed out fetching {0}")]
    Timeout(String),
    #[error("{url} exceeds the {limit} byte limit")]
    Oversize { url: String, limit: u64 },
    #[error("{url} returned HTTP {status}")]
    Status { url: String, status: u16 },
    #[error("too many redirects starting at {0}")]
    TooManyRedirects(String),
    #[error("bad redirect from {url}: {msg}")]
    BadRedirect { url: String, msg: String },
    #[error("network error fetching {url}: {msg}")]
    Network { url: String, msg: String },
    #[error("invalid fetch policy: {0}")]
    InvalidPolicy(String),
}

impl FetchError {
    /// Machine-readable failure code.
    pub fn code(&self) -> &'static str {
        match self {
            FetchError::RobotsDenied(_) => "robots_denied",
            FetchError::Timeout(_) => "fetch_timeout",
            FetchError::Oversize { .. } => "too_large",
            FetchError::Status { .. } => "http_status",
            FetchError::TooManyRedirects(_) | FetchError::BadRedirect { .. } => "bad_redirect",
            FetchError::Network { .. } => "network_error",
            FetchError::InvalidPolicy(_) => "invalid_policy",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    /// Final URL after redirects.
    pub url: CanonicalUrl,
    pub fetched_at: DateTime<Utc>,
    pub content_type: Option<String>,
    pub status: u16,
    /// Extracted text; `None` unless the body is HTML or plain text.
    pub text: Option<String>,
}

struct CachedRobots {
    rules: RobotsRules,
    expires: Instant,
}

type Slot = Arc<tokio::sync::Mutex<Option<Instant>>>;
type RobotsSlot = Arc<tokio::sync::Mutex<Option<CachedRobots>>>;

pub struct Fetcher {
    client: reqwest::Client,
    policy: FetchPolicy,
    hosts: Mutex<HashMap<String, Slot>>,
    robots: Mutex<HashMap<String, RobotsSlot>>,
}

struct Response {
    status: u16,
    location: Option<String>,
    content_type: Option<String>,
    body: Vec<u8>,
}

impl Fetcher {
    pub fn new(policy: FetchPolicy) -> Result<Self, FetchError> {
        policy.validate().map_err(FetchError::InvalidPolicy)?;
        let client = reqwest::Client::builder()
            .user_agent(policy.user_agent.clone())
            .redirect(reqwest::redirect::Policy::none())
            .timeout(Duration::from_secs_f64(policy.timeout_secs))
            .build()
            .map_err(|e| FetchError::InvalidPolicy(e.to_string()))?;
        Ok(Fetcher {
            client,
            policy,
            hosts: Mutex::new(HashMap::new()),
            robots: Mutex::new(HashMap::new()),
        })
    }

    pub fn policy(&self) -> &FetchPolicy {
        &self.policy
    }

    /// Fetches one page, following at most `max_redirects` redirects.
    pub async fn fetch(&self, url: &CanonicalUrl) -> Result<Document, FetchError> {
        let mut current = url.clone();
        for _ in 0..=self.policy.max_redirects {
            let rules = self.robots_for(&current).await;
            if self.policy.respect_robots && !rules.is_allowed(&path_and_query(&current)) {
                return Err(FetchError::RobotsDenied(current.to_string()));
            }
            let resp = self
                .spaced_get(&current, rules.crawl_delay, self.policy.max_bytes, false)
                .await?;
            if (300..400).contains(&resp.status) {
                current = resolve_redirect(&current, resp.location.as_deref())?;
                continue;
            }
            if !(200..300).contains(&resp.status) {
                return Err(FetchError::Status {
                    url: current.to_string(),
                    status: resp.status,
                });
            }
            let text = decode_body(resp.content_type.as_deref(), &resp.body);
            return Ok(Document {
                url: current,
                fetched_at: Utc::now(),
                content_type: resp.content_type,
                status: resp.status,
                text,
            });
        }
        Err(FetchError::TooManyRedirects(url.to_string()))
    }

    /// Cached robots rules for the origin of `url`. Refreshes are serialized
    /// per origin.
    pub async fn robots_for(&self, url: &CanonicalUrl) -> RobotsRules {
        let origin = url.origin();
        let slot = {
            let mut map = self.robots.lock().unwrap();
            map.entry(origin.clone()).or_default().clone()
        };
        let mut cached = slot.lock().await;
        if let Some(c) = cached.as_ref() {
            if c.expires > Instant::now() {
                return c.rules.clone();
            }
        }
        let (rules, ttl) = self.fetch_robots(&origin).await;
        *cached = Some(CachedRobots {
            rules: rules.clone(),
            expires: Instant::now() + ttl,
        });
        rules
    }

    async fn fetch_robots(&self, origin: &str) -> (RobotsRules, Duration) {
        let Ok(mut current) = canonicalize_url(&format!("{origin}/robots.txt")) else {
            return (RobotsRules::disallow_all(), ROBOTS_UNREACHABLE_TTL);
        };
        for _ in 0..=self.policy.max_redirects {
            // An oversized file is parsed up to the limit.
            let resp = match self.spaced_get(&current, None, ROBOTS_MAX_BYTES, true).await {
                Ok(r) => r,
                Err(_) => return (RobotsRules::disallow_all(), ROBOTS_UNREACHABLE_TTL),
            };
            match resp.status {
                200..=299 => {
                    let text = String::from_utf8_lossy(&resp.body);
                    return (RobotsRules::parse(&text, &self.policy.user_agent), ROBOTS_TTL);
                }
                300..=399 => match resolve_redirect(&current, resp.location.as_deref()) {
                    Ok(next) => current = next,
                    Err(_) => return (RobotsRules::allow_all(), ROBOTS_TTL),
                },
                400..=499 => return (RobotsRules::allow_all(), ROBOTS_TTL),
                _ => return (RobotsRules::disallow_all(), ROBOTS_UNREACHABLE_TTL),
            }
        }
        // Too many redirects counts as unavailable.
        (RobotsRules::allow_all(), ROBOTS_TTL)
    }

    fn slot(&self, origin: &str) -> Slot {
        let mut map = self.hosts.lock().unwrap();
        map.entry(origin.to_string()).or_default().clone()
    }

    async fn spaced_get(
        &self,
        url: &CanonicalUrl,
        crawl_delay: Option<f64>,
        cap: u64,
        truncate: bool,
    ) -> Result<Response, FetchError> {
        let interval = Duration::from_secs_f64(
            self.policy
                .per_host_min_interval_secs
                .max(crawl_delay.unwrap_or(0.0)),
        );
        let slot = self.slot(&url.origin());
        let mut last = slot.lock().await;
        if let Some(prev) = *last {
            tokio::time::sleep_until((prev + interval).into()).await;
        }
        *last = Some(Instant::now());
        let result = self.get(url, cap, truncate).await;
        drop(last);
        result
    }

    async fn get(&self, url: &CanonicalUrl, cap: u64, truncate: bool) -> Result<Response, FetchError> {
        let net = |e: reqwest::Error| {
            if e.is_timeout() {
                FetchError::Timeout(url.to_string())
            } else {
                FetchError::Network {
                    url: url.to_string(),
                    msg: e.to_string(),
                }
            }
        };
        let oversize = || FetchError::Oversize {
            url: url.to_string(),
            limit: cap,
        };
        let mut resp = self.client.get(url.as_str()).send().await.map_err(net)?;
        let status = resp.status().as_u16();
        let header = |name: reqwest::header::HeaderName| {
            resp.headers()
                .get(name)
                .and_then(|v| v.to_str().ok())
                .map(str::to_string)
        };
        let location = header(reqwest::header::LOCATION);
        let content_type = header(reqwest::header::CONTENT_TYPE);
        if !truncate && resp.content_length().is_some_and(|n| n > cap) {
            return Err(oversize());
        }
        let mut body = Vec::new();
        if (200..300).contains(&status) {
            while let Some(chunk) = resp.chunk().await.map_err(net)? {
                body.extend_from_slice(&chunk);
                if body.len() as u64 > cap {
                    if truncate {
                        body.truncate(cap as usize);
                        break;
                    }
                    return Err(oversize());
                }
            }
        }
        Ok(Response {
            status,
            location,
            content_type,
            body,
        })
    }
}

fn path_and_query(url: &CanonicalUrl) -> String {
    let parsed = url.parsed();
    match parsed.query() {
        Some(q) => format!("{}?{}", parsed.path(), q),
        None => parsed.path().to_string(),
    }
}

fn resolve_redirect(from: &CanonicalUrl, location: Option<&str>) -> Result<CanonicalUrl, FetchError> {
    let bad = |msg: &str| FetchError::BadRedirect {
        url: from.to_string(),
        msg: msg.to_string(),
    };
    let location = location.ok_or_else(|| bad("missing Location header"))?;
    let joined = from.parsed().join(location).map_err(|e| bad(&e.to_string()))?;
    canonicalize_url(joined.as_str()).map_err(|e| bad(&e.to_string()))
}

fn media_type(content_type: Option<&str>) -> String {
    content_type
        .unwrap_or("")
        .split(';')
        .next()
        .unwrap_or("")
        .trim()
        .to_ascii_lowercase()
}

fn charset_param(content_type: Option<&str>) -> Option<String> {
    content_type?.split(';').skip(1).find_map(|p| {
        let (k, v) = p.split_once('=')?;
        (k.trim().eq_ignore_ascii_case("charset")).then(|| v.trim().trim_matches('"').to_string())
    })
}

/// `<meta charset=...>` or the http-equiv form within the first KiB.
fn sniff_meta_charset(body: &[u8]) -> Option<String> {
    let head = String::from_utf8_lossy(&body[..body.len().min(1024)]).to_ascii_lowercase();
    let at = head.find("charset=")?;
    let rest = head[at + 8..].trim_start_matches(['"', '\'']);
    let end = rest
        .find(|c: char| !(c.is_ascii_alphanumeric() || c == '-' || c == '_'))
        .unwrap_or(rest.len());
    (end > 0).then(|| rest[..end].to_string())
}

fn decode(body: &[u8], charset: Option<String>) -> String {
    let encoding = charset
        .and_then(|c| encoding_rs::Encoding::for_label(c.as_bytes()))
        .unwrap_or(encoding_rs::UTF_8);
    let (text, _, _) = encoding.decode(body);
    text.into_owned()
}

/// Text of an HTML or plain-text body, `None` for anything else.
pub fn decode_body(content_type: Option<&str>, body: &[u8]) -> Option<String> {
    let media = media_type(content_type);
    let charset = charset_param(content_type);
    match media.as_str() {
        "text/html" | "application/xhtml+xml" => {
            let charset = charset.or_else(|| sniff_meta_charset(body));
            Some(extract_text(&decode(body, charset)))
        }
        "text/plain" => Some(decode(body, charset)),
        _ => None,
    }
}
