//! Template-configured REST translation adapter.
//!
//! Placeholders `{text}`, `{src}`, `{tgt}` and `{api_key}` are substituted
//! into the URL (percent-encoded), the headers (verbatim) and the optional
//! JSON body (JSON-string escaped). The translated string is read from the
//! response with a JSON pointer. The API key comes only from the environment
//! variable named in the config.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Backend, GatewayError, Origin, TranslationRequest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum HttpMethod {
    #[default]
    Get,
    Post,
}

fn default_attempts() -> u32 {
    3
}

fn default_backoff_ms() -> u64 {
    250
}

fn default_timeout_secs() -> u64 {
    30
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RestConfig {
    pub url_template: String,
    #[serde(default)]
    pub method: HttpMethod,
    #[serde(default)]
    pub headers: BTreeMap<String, String>,
    #[serde(default)]
    pub body_template: Option<String>,
    /// JSON pointer (`/data/translations/0/translatedText`) or dotted path
    /// (`data.translations.0.translatedText`).
    pub response_path: String,
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

pub struct RestBackend {
    config: RestConfig,
    api_key: String,
    client: reqwest::blocking::Client,
}

impl RestBackend {
    pub fn new(config: RestConfig) -> Result<Self, GatewayError> {
        let api_key = match &config.api_key_env {
            Some(var) => std::env::var(var).map_err(|_| GatewayError::MissingApiKey(var.clone()))?,
            None => String::new(),
        };
        Self::with_api_key(config, api_key)
    }

    fn with_api_key(config: RestConfig, api_key: String) -> Result<Self, GatewayError> {
        if config.max_attempts == 0 {
            return Err(GatewayError::Config("max_attempts must be at least 1".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| GatewayError::Config(e.to_string()))?;
        Ok(RestBackend {
            config,
            api_key,
            client,
        })
    }

    fn fill(&self, template: &str, req: &TranslationRequest, escape: fn(&str) -> String) -> String {
        template
            .replace("{text}", &escape(&req.text))
            .replace("{src}", &escape(&req.src_lang))
            .replace("{tgt}", &escape(&req.tgt_lang))
            .replace("{api_key}", &escape(&self.api_key))
    }

    fn attempt(&self, req: &TranslationRequest) -> Result<String, GatewayError> {
        let url = self.fill(&self.config.url_template, req, percent_encode);
        let mut builder = match self.config.method {
            HttpMethod::Get => self.client.get(&url),
            HttpMethod::Post => self.client.post(&url),
        };
        for (name, value) in &self.config.headers {
            builder = builder.header(name, self.fill(value, req, |s| s.to_string()));
        }
        if let Some(body) = &self.config.body_template {
            builder = builder
                .header(reqwest::header::CONTENT_TYPE, "application/json")
                .body(self.fill(body, req, json_escape));
        }
        let resp = builder.send().map_err(|e| GatewayError::NetworkFailure {
            status: None,
            body: e.to_string(),
        })?;
        let status = resp.status();
        let body = resp.text().map_err(|e| GatewayError::NetworkFailure {
            status: Some(status.as_u16()),
            body: e.to_string(),
        })?;
        if !status.is_success() {
            return Err(GatewayError::NetworkFailure {
                status: Some(status.as_u16()),
                body: excerpt(&body),
            });
        }
        extract_translation(&body, &self.config.response_path).ok_or_else(|| GatewayError::NetworkFailure {
            status: Some(status.as_u16()),
            body: excerpt(&body),
        })
    }
}

impl Backend for RestBackend {
    fn translate(&self, req: &TranslationRequest) -> Result<String, GatewayError> {
        let mut last = None;
        for attempt in 0..self.config.max_attempts {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(self.config.backoff_ms << (attempt - 1)));
            }
            match self.attempt(req) {
                Ok(text) => return Ok(text),
                Err(e) => {
                    log::warn!("translation attempt {} for {:?} failed: {e}", attempt + 1, req.text);
                    last = Some(e);
                }
            }
        }
        Err(last.expect("at least one attempt"))
    }

    fn origin(&self) -> Origin {
        Origin::Network
    }
}

fn percent_encode(s: &str) -> String {
    url::form_urlencoded::byte_serialize(s.as_bytes()).collect()
}

fn json_escape(s: &str) -> String {
    let quoted = serde_json::to_string(s).expect("string serializes");
    quoted[1..quoted.len() - 1].to_string()
}

fn excerpt(body: &str) -> String {
    body.chars().take(200).collect()
}

fn extract_translation(body: &str, path: &str) -> Option<String> {
    let value: serde_json::Value = serde_json::from_str(body).ok()?;
    let pointer = if path.starts_with('/') || path.is_empty() {
        path.to_string()
    } else {
        format!("/{}", path.replace('.', "/"))
    };
    value.pointer(&pointer)?.as_str().map(str::to_string)
}
