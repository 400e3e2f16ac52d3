use std::path::PathBuf;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde_json::json;

use super::VetError;

pub const DEFAULT_API_KEY_ENV: &str = "TABTEXT_LLM_API_KEY";

/// A chat model that answers one prompt at a time. `key` names the
/// request (e.g. `match_a__b`) so canned replies can be looked up.
pub trait LlmClient: Send + Sync {
    fn complete(&self, key: &str, prompt: &str) -> Result<String, VetError>;

    /// True when replies come from a remote model and are not reproducible.
    fn is_live(&self) -> bool;
}

/// Serves `<dir>/<key>.json` or `<dir>/<key>.txt`.
#[derive(Debug, Clone)]
pub struct ReplayClient {
    pub dir: PathBuf,
}

impl ReplayClient {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ReplayClient { dir: dir.into() }
    }

    pub fn fixture_path(&self, key: &str) -> Option<PathBuf> {
        ["json", "txt"].iter().map(|ext| self.dir.join(format!("{key}.{ext}"))).find(|p| p.is_file())
    }
}

impl LlmClient for ReplayClient {
    fn complete(&self, key: &str, _prompt: &str) -> Result<String, VetError> {
        let path = self.fixture_path(key).ok_or_else(|| VetError::MissingFixture(self.dir.join(format!("{key}.json"))))?;
        std::fs::read_to_string(&path).map_err(|source| VetError::Io { path, source })
    }

    fn is_live(&self) -> bool {
        false
    }
}

/// OpenAI-style chat-completions endpoint; the API key is read from an
/// environment variable at call time.
pub struct HttpClient {
    pub endpoint: String,
    pub model: String,
    pub api_key_env: String,
    /// Minimum spacing between requests.
    pub min_interval: Duration,
    client: reqwest::blocking::Client,
    last: Mutex<Option<Instant>>,
}

impl HttpClient {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, api_key_env: impl Into<String>, min_interval: Duration) -> Result<Self, VetError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| VetError::Http(e.to_string()))?;
        Ok(HttpClient {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key_env: api_key_env.into(),
            min_interval,
            client,
            last: Mutex::new(None),
        })
    }

    fn wait_turn(&self) {
        let mut last = self.last.lock().expect("rate lock");
        if let Some(t) = *last {
            let elapsed = t.elapsed();
            if elapsed < self.min_interval {
                std::thread::sleep(self.min_interval - elapsed);
            }
        }
        *last = Some(Instant::now());
    }
}

impl LlmClient for HttpClient {
    fn complete(&self, _key: &str, prompt: &str) -> Result<String, VetError> {
        let key = std::env::var(&self.api_key_env).map_err(|_| VetError::MissingApiKey(self.api_key_env.clone()))?;
        self.wait_turn();
        let body = json!({
            "model": self.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": prompt}],
        });
        let resp = self
            .client
            .post(&self.endpoint)
            .bearer_auth(key)
            .json(&body)
            .send()
            .map_err(|e| VetError::Http(e.to_string()))?;
        let status = resp.status();
        let value: serde_json::Value = resp.json().map_err(|e| VetError::Http(e.to_string()))?;
        if !status.is_success() {
            return Err(VetError::Http(format!("status {status}: {value}")));
        }
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| VetError::Http("reply has no choices[0].message.content".into()))
    }

    fn is_live(&self) -> bool {
        true
    }
}

/// Request key for a feature-match comparison.
pub fn match_key(a: &str, b: &str) -> String {
    format!("match_{a}__{b}")
}

pub fn fitness_key(name: &str) -> String {
    format!("fitness_{name}")
}
