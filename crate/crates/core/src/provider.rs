//! Blocking HTTP client for an external stance/similarity judge.
//!
//! Requests are JSON POSTs to a single endpoint, distinguished by `task`:
//!
//! ```text
//! {"task":"stance","claim":..,"evidence_title":..,"evidence_abstract":..} -> {"stance":"support"|"contradict"|"neutral"}
//! {"task":"similarity","a":..,"b":..}                                      -> {"score":0.0..1.0}
//! ```

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::claims::SimilarityProvider;
use crate::corpus::Article;
use crate::error::ProviderError;
use crate::stance::{Semaphore, Stance, StanceProvider};

pub const ENDPOINT_ENV: &str = "RAGAUDIT_STANCE_ENDPOINT";
pub const TOKEN_ENV: &str = "RAGAUDIT_AUTH_TOKEN";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpSettings {
    pub endpoint: String,
    #[serde(default, skip_serializing)]
    pub auth_token: Option<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: f64,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    /// Extra attempts after a transport failure or timeout.
    #[serde(default = "default_retries")]
    pub retries: u32,
}

fn default_timeout_secs() -> f64 {
    30.0
}
fn default_in_flight() -> usize {
    4
}
fn default_retries() -> u32 {
    1
}

impl HttpSettings {
    pub fn new(endpoint: impl Into<String>) -> Self {
        HttpSettings {
            endpoint: endpoint.into(),
            auth_token: None,
            timeout_secs: default_timeout_secs(),
            max_in_flight: default_in_flight(),
            retries: default_retries(),
        }
    }
}

pub struct HttpProvider {
    settings: HttpSettings,
    agent: ureq::Agent,
    gate: Semaphore,
}

#[derive(Deserialize)]
struct StanceReply {
    stance: String,
}

#[derive(Deserialize)]
struct SimilarityReply {
    score: f64,
}

impl HttpProvider {
    pub fn new(settings: HttpSettings) -> Self {
        let timeout = Duration::from_secs_f64(settings.timeout_secs.max(0.001));
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        let gate = Semaphore::new(settings.max_in_flight.max(1));
        HttpProvider { settings, agent, gate }
    }

    pub fn settings(&self) -> &HttpSettings {
        &self.settings
    }

    fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.settings.timeout_secs)
    }

    fn post_once<T: serde::de::DeserializeOwned>(&self, body: &serde_json::Value) -> Result<T, ProviderError> {
        let mut req = self.agent.post(&self.settings.endpoint);
        if let Some(token) = &self.settings.auth_token {
            req = req.header("Authorization", format!("Bearer {token}"));
        }
        let mut resp = req.send_json(body).map_err(|e| self.map_err(e))?;
        resp.body_mut()
            .read_json::<T>()
            .map_err(|e| ProviderError::Malformed(e.to_string()))
    }

    fn post<T: serde::de::DeserializeOwned>(&self, body: serde_json::Value) -> Result<T, ProviderError> {
        let _permit = self.gate.acquire();
        let mut attempt = 0;
        loop {
            match self.post_once(&body) {
                Err(ProviderError::Malformed(m)) => return Err(ProviderError::Malformed(m)),
                Err(e) if attempt < self.settings.retries => {
                    log::warn!("provider call failed, retrying: {e}");
                    attempt += 1;
                }
                other => return other,
            }
        }
    }

    fn map_err(&self, e: ureq::Error) -> ProviderError {
        match e {
            ureq::Error::Timeout(_) => ProviderError::Timeout(self.timeout()),
            ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => {
                ProviderError::Timeout(self.timeout())
            }
            ureq::Error::Json(j) => ProviderError::Malformed(j.to_string()),
            other => ProviderError::Unavailable(other.to_string()),
        }
    }
}

impl StanceProvider for HttpProvider {
    fn tag(&self) -> &str {
        "http"
    }

    fn judge(&self, claim: &str, article: &Article) -> Result<Stance, ProviderError> {
        let reply: StanceReply = self.post(json!({
            "task": "stance",
            "claim": claim,
            "evidence_title": article.title,
            "evidence_abstract": article.abstract_text,
        }))?;
        Stance::from_label(&reply.stance)
            .ok_or_else(|| ProviderError::Malformed(format!("unknown stance {:?}", reply.stance)))
    }

    fn describe(&self) -> String {
        format!("http({})", self.settings.endpoint)
    }
}

impl SimilarityProvider for HttpProvider {
    fn tag(&self) -> &str {
        "http"
    }

    fn similarity(&self, a: &str, b: &str) -> Result<f64, ProviderError> {
        let reply: SimilarityReply = self.post(json!({"task": "similarity", "a": a, "b": b}))?;
        if !(0.0..=1.0).contains(&reply.score) {
            return Err(ProviderError::Malformed(format!("score {} outside [0, 1]", reply.score)));
        }
        Ok(reply.score)
    }

    fn describe(&self) -> String {
        format!("http({})", self.settings.endpoint)
    }
}
