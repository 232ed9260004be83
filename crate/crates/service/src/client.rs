//! Minimal API client used by the CLI and the tests.

use reqwest::header::{AUTHORIZATION, CONTENT_TYPE};
use serde_json::Value;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("request failed: {0}")]
    Http(#[from] reqwest::Error),
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("invalid JSON response: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone)]
pub struct ApiClient {
    http: reqwest::Client,
    base: String,
    token: String,
}

/// Status code and body of a response, whatever the status.
#[derive(Debug, Clone)]
pub struct RawResponse {
    pub status: u16,
    pub body: String,
}

impl RawResponse {
    pub fn json(&self) -> Result<Value, serde_json::Error> {
        serde_json::from_str(&self.body)
    }
}

impl ApiClient {
    pub fn new(base: &str, token: &str) -> Self {
        ApiClient {
            http: reqwest::Client::new(),
            base: base.trim_end_matches('/').to_string(),
            token: token.to_string(),
        }
    }

    pub fn with_token(&self, token: &str) -> Self {
        ApiClient {
            token: token.to_string(),
            ..self.clone()
        }
    }

    pub async fn get_raw(&self, path: &str) -> Result<RawResponse, ClientError> {
        let resp = self
            .http
            .get(format!("{}{}", self.base, path))
            .header(AUTHORIZATION, format!("Bearer {}", self.token))
            .send()
            .await?;
        Ok(RawResponse {
            status: resp.status().as_u16(),
            body: resp.text().await?,
        })
    }

    pub async fn post_raw(&self, path: &str, body: &Value) -> Result<RawResponse, ClientError> {
        let resp = self
            .http
            .post(format!("{}{}", self.base, path))
            .header(AUTHORIZATION, format!("Bearer {}", self.token))
            .header(CONTENT_TYPE, "application/json")
            .body(body.to_string())
            .send()
            .await?;
        Ok(RawResponse {
            status: resp.status().as_u16(),
            body: resp.text().await?,
        })
    }

    fn ok(r: RawResponse) -> Result<RawResponse, ClientError> {
        if (200..300).contains(&r.status) {
            Ok(r)
        } else {
            Err(ClientError::Status {
                status: r.status,
                body: r.body,
            })
        }
    }

    pub async fn get_json(&self, path: &str) -> Result<Value, ClientError> {
        Ok(Self::ok(self.get_raw(path).await?)?.json()?)
    }

    pub async fn get_text(&self, path: &str) -> Result<String, ClientError> {
        Ok(Self::ok(self.get_raw(path).await?)?.body)
    }

    pub async fn post_json(&self, path: &str, body: &Value) -> Result<Value, ClientError> {
        Ok(Self::ok(self.post_raw(path, body).await?)?.json()?)
    }
}
