//! Generic chat-completion client over blocking HTTP.

use std::time::Duration;

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{DecodeParams, Respondent, RespondentKind};
use crate::bank::Scenario;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetryPolicy {
    /// Total tries per presentation, including the first.
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            base_delay_ms: 500,
            max_delay_ms: 16_000,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (1-based), doubling each time.
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u64 << attempt.saturating_sub(1).min(20);
        Duration::from_millis(self.base_delay_ms.saturating_mul(factor).min(self.max_delay_ms))
    }
}

fn default_auth_header() -> String {
    "Authorization".into()
}

fn default_auth_prefix() -> String {
    "Bearer ".into()
}

fn default_timeout() -> u64 {
    120
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteConfig {
    pub id: String,
    /// Everything before `/chat/completions`.
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the credential. The
    /// credential itself is never written to any file.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_auth_header")]
    pub auth_header: String,
    #[serde(default = "default_auth_prefix")]
    pub auth_prefix: String,
    #[serde(default)]
    pub system_prompt: Option<String>,
    #[serde(default)]
    pub decode: DecodeParams,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default = "default_timeout")]
    pub timeout_s: u64,
}

pub struct RemoteRespondent {
    config: RemoteConfig,
    credential: Option<String>,
    agent: ureq::Agent,
}

enum Attempt {
    Done(String),
    Retry(String),
    Fail(Error),
}

impl RemoteRespondent {
    pub fn new(config: RemoteConfig) -> Result<Self> {
        let credential = match &config.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                Error::Config(format!("credential variable `{var}` is not set"))
            })?),
            None => None,
        };
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(config.timeout_s)))
            .build()
            .into();
        Ok(RemoteRespondent {
            config,
            credential,
            agent,
        })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn body(&self, prompt: &str) -> Value {
        let mut messages = Vec::new();
        if let Some(system) = &self.config.system_prompt {
            messages.push(json!({"role": "system", "content": system}));
        }
        messages.push(json!({"role": "user", "content": prompt}));
        let mut body = json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": self.config.decode.temperature,
            "max_tokens": self.config.decode.max_tokens,
        });
        if let Some(seed) = self.config.decode.seed {
            body["seed"] = json!(seed);
        }
        body
    }

    fn attempt(&self, url: &str, body: &Value) -> Attempt {
        let mut req = self.agent.post(url);
        if let Some(key) = &self.credential {
            req = req.header(&self.config.auth_header, &format!("{}{}", self.config.auth_prefix, key));
        }
        let mut resp = match req.send_json(body) {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(format!("request failed: {e}")),
        };
        let status = resp.status().as_u16();
        match status {
            200..=299 => {}
            401 | 403 => {
                return Attempt::Fail(Error::Auth(format!("{url} rejected the credential (HTTP {status})")))
            }
            429 | 500..=599 => return Attempt::Retry(format!("HTTP {status}")),
            _ => {
                let text = resp.body_mut().read_to_string().unwrap_or_default();
                return Attempt::Fail(Error::Transport(format!("HTTP {status}: {}", text.trim())));
            }
        }
        let value: Value = match resp.body_mut().read_json() {
            Ok(v) => v,
            Err(e) => return Attempt::Retry(format!("unreadable response body: {e}")),
        };
        match value.pointer("/choices/0/message/content").and_then(Value::as_str) {
            Some(text) => Attempt::Done(text.to_string()),
            None => Attempt::Fail(Error::Transport(format!(
                "response has no choices[0].message.content: {value}"
            ))),
        }
    }
}

impl Respondent for RemoteRespondent {
    fn id(&self) -> &str {
        &self.config.id
    }

    fn kind(&self) -> RespondentKind {
        RespondentKind::Remote
    }

    fn decode(&self) -> &DecodeParams {
        &self.config.decode
    }

    fn submit(&self, scenario: &Scenario, prompt: &str, _repeat: u8) -> Result<String> {
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let body = self.body(prompt);
        let attempts = self.config.retry.max_attempts.max(1);
        let mut last = String::new();
        for attempt in 1..=attempts {
            match self.attempt(&url, &body) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(reason) => {
                    debug!("{} attempt {attempt}/{attempts}: {reason}", scenario.id);
                    last = reason;
                    if attempt < attempts {
                        std::thread::sleep(self.config.retry.delay(attempt));
                    }
                }
            }
        }
        warn!("{} gave up after {attempts} attempts: {last}", scenario.id);
        Err(Error::Transport(format!("{attempts} attempts failed, last: {last}")))
    }
}
