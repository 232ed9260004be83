use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

#[derive(Debug, Error, PartialEq)]
pub enum UrlError {
    #[error("not an absolute URL: {0}")]
    NotAbsolute(String),
    #[error("unsupported scheme {0:?}; only http and https are accepted")]
    UnsupportedScheme(String),
    #[error("URL has no host: {0}")]
    NoHost(String),
}

/// An absolute http(s) URL in canonical form: lowercase scheme and host, no
/// default port, no fragment, dot-segments resolved. Path and query are kept
/// as given.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct CanonicalUrl(String);

impl CanonicalUrl {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn parsed(&self) -> Url {
        Url::parse(&self.0).expect("canonical URLs always parse")
    }

    /// `scheme://host[:port]`, the unit robots rules and politeness apply to.
    pub fn origin(&self) -> String {
        self.parsed().origin().ascii_serialization()
    }
}

impl fmt::Display for CanonicalUrl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for CanonicalUrl {
    type Error = UrlError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        canonicalize_url(&s)
    }
}

impl From<CanonicalUrl> for String {
    fn from(u: CanonicalUrl) -> String {
        u.0
    }
}

pub fn canonicalize_url(raw: &str) -> Result<CanonicalUrl, UrlError> {
    let mut url = Url::parse(raw.trim()).map_err(|_| UrlError::NotAbsolute(raw.to_string()))?;
    match url.scheme() {
        "http" | "https" => {}
        other => return Err(UrlError::UnsupportedScheme(other.to_string())),
    }
    if url.host_str().is_none_or(str::is_empty) {
        return Err(UrlError::NoHost(raw.to_string()));
    }
    // The parser already lowercases scheme and host, drops default ports and
    // resolves dot-segments.
    url.set_fragment(None);
    Ok(CanonicalUrl(url.into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_forms() {
        assert_eq!(
            canonicalize_url("HTTP://Example.COM:80/a/../b#x").unwrap().as_str(),
            "http://example.com/b"
        );
        assert_eq!(
            canonicalize_url("https://example.com/p?b=2&a=1").unwrap().as_str(),
            "https://example.com/p?b=2&a=1"
        );
        assert_eq!(
            canonicalize_url("https://example.com:443/").unwrap().as_str(),
            "https://example.com/"
        );
        assert_eq!(
            canonicalize_url("http://example.com:8080/x/./y").unwrap().as_str(),
            "http://example.com:8080/x/y"
        );
    }

    #[test]
    fn rejects_other_schemes_and_relative() {
        assert_eq!(
            canonicalize_url("ftp://x"),
            Err(UrlError::UnsupportedScheme("ftp".into()))
        );
        assert!(matches!(canonicalize_url("/just/a/path"), Err(UrlError::NotAbsolute(_))));
        assert!(canonicalize_url("mailto:a@b.c").is_err());
    }

    #[test]
    fn idempotent() {
        let once = canonicalize_url("HTTPS://A.b.C/x/../y?q=1#frag").unwrap();
        assert_eq!(canonicalize_url(once.as_str()).unwrap(), once);
        assert_eq!(once.origin(), "https://a.b.c");
    }
}
