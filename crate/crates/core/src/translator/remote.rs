use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::generate::{GenerateError, Generator};
use super::prompt::PromptBundle;

pub const URL_ENV: &str = "VERIFIABLE_LLM_URL";
pub const KEY_ENV: &str = "VERIFIABLE_LLM_KEY";
pub const MODEL_ENV: &str = "VERIFIABLE_LLM_MODEL";

/// Counting semaphore shared by every request from one client.
#[derive(Debug)]
struct Permits {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Permits {
    fn acquire(&self) -> PermitGuard<'_> {
        let mut n = self.free.lock().expect("permit lock");
        while *n == 0 {
            n = self.cv.wait(n).expect("permit lock");
        }
        *n -= 1;
        PermitGuard(self)
    }
}

struct PermitGuard<'a>(&'a Permits);

impl Drop for PermitGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("permit lock") += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub temperature: f32,
    pub timeout_secs: u64,
    pub max_in_flight: usize,
    /// Sampling seed forwarded to endpoints that accept one.
    pub seed: Option<u64>,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            url: String::new(),
            api_key: None,
            model: "gpt-4o".to_string(),
            temperature: 0.0,
            timeout_secs: 120,
            max_in_flight: 2,
            seed: None,
        }
    }
}

impl RemoteConfig {
    /// Endpoint, key and model name from the environment, when the URL is set.
    pub fn from_env() -> Option<Self> {
        let url = std::env::var(URL_ENV).ok().filter(|u| !u.is_empty())?;
        let mut cfg = RemoteConfig { url, api_key: std::env::var(KEY_ENV).ok(), ..Default::default() };
        if let Ok(m) = std::env::var(MODEL_ENV) {
            cfg.model = m;
        }
        Some(cfg)
    }
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage>,
    temperature: f32,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct ChatMessage {
    role: String,
    content: String,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

/// Chat-completions client for an OpenAI-compatible endpoint.
#[derive(Debug)]
pub struct RemoteGenerator {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
    permits: Permits,
}

impl RemoteGenerator {
    pub fn new(config: RemoteConfig) -> Result<Self, GenerateError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs.max(1)))
            .build()
            .map_err(|e| GenerateError::Transport(e.to_string()))?;
        let permits = Permits { free: Mutex::new(config.max_in_flight.max(1)), cv: Condvar::new() };
        Ok(RemoteGenerator { config, client, permits })
    }
}

impl Generator for RemoteGenerator {
    fn generate(&self, prompt: &PromptBundle) -> Result<String, GenerateError> {
        let rendered = prompt.render();
        let body = ChatRequest {
            model: &self.config.model,
            messages: vec![
                ChatMessage { role: "system".into(), content: prompt.system_preamble.clone() },
                ChatMessage { role: "user".into(), content: rendered },
            ],
            temperature: self.config.temperature,
            seed: self.config.seed,
        };
        let _permit = self.permits.acquire();
        let mut req = self.client.post(&self.config.url).json(&body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                GenerateError::Timeout(self.config.timeout_secs)
            } else {
                GenerateError::Transport(e.to_string())
            }
        })?;
        let status = resp.status();
        if !status.is_success() {
            return Err(GenerateError::Transport(format!("endpoint answered {status}")));
        }
        let parsed: ChatResponse = resp.json().map_err(|e| GenerateError::Transport(e.to_string()))?;
        let content = parsed.choices.into_iter().next().map(|c| c.message.content).unwrap_or_default();
        if content.trim().is_empty() {
            return Err(GenerateError::EmptyCompletion);
        }
        Ok(content)
    }

    fn name(&self) -> &str {
        "remote"
    }
}
