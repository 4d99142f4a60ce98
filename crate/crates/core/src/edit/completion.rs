use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Environment variable holding the bearer token for the HTTP endpoint.
pub const API_KEY_ENV: &str = "OPTISCOUT_API_KEY";
pub const DEFAULT_TEMPERATURE: f64 = 0.3;
pub const DEFAULT_MAX_TOKENS: u32 = 2048;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
}

#[derive(Debug, Error)]
pub enum CompletionError {
    #[error("completion request timed out")]
    Timeout,
    #[error("completion service returned status {status}")]
    Service { status: u16 },
    #[error("completion transport: {0}")]
    Transport(String),
    #[error("no replay fixture for prompt {hash} sample {sample_idx}")]
    ReplayMiss { hash: String, sample_idx: usize },
    #[error("replay fixtures: {0}")]
    Fixture(String),
    #[error("temperature {0} outside [0, 1]")]
    InvalidTemperature(f64),
}

/// Anything that turns a prompt into model text. `sample_idx` lets
/// deterministic back ends return a different recorded sample per draw.
pub trait CompletionService: Sync {
    fn complete(
        &self,
        req: &CompletionRequest,
        sample_idx: usize,
    ) -> Result<CompletionResponse, CompletionError>;
}

fn check_temperature(t: f64) -> Result<(), CompletionError> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(CompletionError::InvalidTemperature(t))
    }
}

/// Lowercase hex SHA-256 of the prompt; the replay fixture key.
pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// JSON-over-HTTP completion endpoint.
pub struct HttpCompletion {
    url: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpCompletion {
    /// Reads the credential from [`API_KEY_ENV`] when set.
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self {
            url: url.into(),
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            agent,
        }
    }
}

impl CompletionService for HttpCompletion {
    fn complete(
        &self,
        req: &CompletionRequest,
        _sample_idx: usize,
    ) -> Result<CompletionResponse, CompletionError> {
        check_temperature(req.temperature)?;
        let mut call = self.agent.post(&self.url);
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let map_err = |e: ureq::Error| match e {
            ureq::Error::StatusCode(status) => CompletionError::Service { status },
            ureq::Error::Timeout(_) => CompletionError::Timeout,
            other => CompletionError::Transport(other.to_string()),
        };
        let mut resp = call.send_json(req).map_err(map_err)?;
        resp.body_mut()
            .read_json::<CompletionResponse>()
            .map_err(map_err)
    }
}

/// A recorded answer: one text for every sample, or one per sample index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FixtureEntry {
    Single(String),
    PerSample(Vec<String>),
}

/// Deterministic back end answering from recorded fixtures keyed by
/// [`prompt_hash`]. A missing key is an error, never a fallback.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplayCompletion {
    pub fixtures: BTreeMap<String, FixtureEntry>,
}

impl ReplayCompletion {
    /// Loads one JSON object file, or every `*.json` file of a directory in
    /// name order (later files override earlier keys).
    pub fn load(path: &Path) -> Result<Self, CompletionError> {
        let files = if path.is_dir() {
            let mut v: Vec<_> = std::fs::read_dir(path)
                .map_err(|e| CompletionError::Fixture(format!("{}: {e}", path.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            v.sort();
            v
        } else {
            vec![path.to_path_buf()]
        };
        let mut fixtures = BTreeMap::new();
        for f in files {
            let text = std::fs::read_to_string(&f)
                .map_err(|e| CompletionError::Fixture(format!("{}: {e}", f.display())))?;
            let part: BTreeMap<String, FixtureEntry> = serde_json::from_str(&text)
                .map_err(|e| CompletionError::Fixture(format!("{}: {e}", f.display())))?;
            fixtures.extend(part);
        }
        Ok(Self { fixtures })
    }

    pub fn insert(&mut self, prompt: &str, entry: FixtureEntry) {
        self.fixtures.insert(prompt_hash(prompt), entry);
    }
}

impl CompletionService for ReplayCompletion {
    fn complete(
        &self,
        req: &CompletionRequest,
        sample_idx: usize,
    ) -> Result<CompletionResponse, CompletionError> {
        check_temperature(req.temperature)?;
        let hash = prompt_hash(&req.prompt);
        let text = match self.fixtures.get(&hash) {
            Some(FixtureEntry::Single(t)) => Some(t),
            Some(FixtureEntry::PerSample(v)) => v.get(sample_idx),
            None => None,
        };
        text.map(|t| CompletionResponse { text: t.clone() })
            .ok_or(CompletionError::ReplayMiss { hash, sample_idx })
    }
}
