//! HTTP backend speaking a chat-completions style JSON protocol.

use std::time::Duration;

use serde_json::{json, Value};
use ureq::Agent;

use crate::error::BackendError;

use super::{Backend, BackendRequest, ExtractorConfig};

#[derive(Debug, Clone)]
pub struct RemoteBackend {
    agent: Agent,
    endpoint: String,
    model_name: String,
    temperature: f64,
    auth_header: String,
    api_key: Option<String>,
    response_text_pointer: String,
}

impl RemoteBackend {
    /// Builds the backend from config. The API key is read from the
    /// environment variable named by `api_key_env`; a missing key means
    /// requests are sent without an auth header.
    pub fn from_config(config: &ExtractorConfig) -> Result<Self, BackendError> {
        let endpoint = config
            .endpoint
            .clone()
            .ok_or_else(|| BackendError::Unreachable("no endpoint configured".into()))?;
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_seconds.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(RemoteBackend {
            agent,
            endpoint,
            model_name: config.model_name.clone(),
            temperature: config.temperature,
            auth_header: config.auth_header.clone(),
            api_key: std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty()),
            response_text_pointer: config.response_text_pointer.clone(),
        })
    }

    fn request_body(&self, prompt: &str) -> Value {
        json!({
            "model": self.model_name,
            "temperature": self.temperature,
            "messages": [{"role": "user", "content": prompt}],
        })
    }

    fn response_text(&self, body: &Value) -> Result<String, BackendError> {
        [self.response_text_pointer.as_str(), "/text"]
            .iter()
            .find_map(|ptr| body.pointer(ptr).and_then(Value::as_str))
            .map(str::to_string)
            .ok_or_else(|| {
                BackendError::BadResponse(format!(
                    "no text at {} in response body",
                    self.response_text_pointer
                ))
            })
    }
}

fn classify(err: ureq::Error) -> BackendError {
    match err {
        ureq::Error::Timeout(_) => BackendError::Timeout,
        ureq::Error::StatusCode(status) => BackendError::Http { status },
        ureq::Error::Io(e) if e.kind() == std::io::ErrorKind::TimedOut => BackendError::Timeout,
        other => BackendError::Unreachable(other.to_string()),
    }
}

impl Backend for RemoteBackend {
    fn id(&self) -> String {
        format!("remote:{}:t{}", self.model_name, self.temperature)
    }

    fn complete(&self, request: &BackendRequest<'_>) -> Result<String, BackendError> {
        let mut call = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            let value = if self.auth_header.eq_ignore_ascii_case("authorization") {
                format!("Bearer {key}")
            } else {
                key.clone()
            };
            call = call.header(self.auth_header.as_str(), value);
        }
        let mut response = call
            .send_json(self.request_body(request.prompt))
            .map_err(classify)?;
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(BackendError::Http { status });
        }
        let body: Value = response
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::BadResponse(e.to_string()))?;
        self.response_text(&body)
    }
}
