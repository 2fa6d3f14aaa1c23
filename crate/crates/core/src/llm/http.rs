use std::time::Duration;

use base64::Engine;
use serde_json::{json, Value};

use super::{BackendError, BackendReply, LlmBackend, LlmRequest, RequestKind, Usage};

/// Environment variable holding the bearer token for HTTP backends.
pub const API_KEY_ENV: &str = "INTERRVOS_LLM_KEY";

#[derive(Debug, Clone, PartialEq)]
pub struct HttpConfig {
    /// Endpoint root, e.g. `https://api.example.com/v1`.
    pub base_url: String,
    pub model: String,
    pub vision: bool,
    pub timeout: Duration,
    pub api_key: Option<String>,
}

impl HttpConfig {
    pub fn new(base_url: &str, model: &str) -> Self {
        Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            model: model.into(),
            vision: true,
            timeout: Duration::from_secs(120),
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
        }
    }
}

/// OpenAI-style `/chat/completions` client.
pub struct HttpBackend {
    id: String,
    config: HttpConfig,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| BackendError::Fatal(e.to_string()))?;
        Ok(Self {
            id: format!("http:{}", config.model),
            config,
            client,
        })
    }

    fn body(&self, request: &LlmRequest) -> Value {
        let user: Value = if request.images.is_empty() {
            Value::String(request.user_prompt.clone())
        } else {
            let mut parts = vec![json!({"type": "text", "text": request.user_prompt})];
            for img in &request.images {
                let b64 = base64::engine::general_purpose::STANDARD.encode(&img.data);
                parts.push(json!({
                    "type": "image_url",
                    "image_url": {"url": format!("data:{};base64,{b64}", img.media_type)}
                }));
            }
            Value::Array(parts)
        };
        let mut body = json!({
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": user},
            ],
            "temperature": request.params.temperature,
            "max_tokens": request.params.max_tokens,
        });
        if let Some(seed) = request.params.seed {
            body["seed"] = json!(seed);
        }
        body
    }
}

fn parse_reply(body: &Value) -> Result<BackendReply, BackendError> {
    let text = body
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| BackendError::Fatal("response has no choices[0].message.content".into()))?;
    let count = |name: &str| {
        body.pointer(&format!("/usage/{name}"))
            .and_then(Value::as_u64)
            .unwrap_or(0)
    };
    Ok(BackendReply {
        text: text.to_string(),
        usage: Usage {
            prompt_tokens: count("prompt_tokens"),
            completion_tokens: count("completion_tokens"),
        },
    })
}

impl LlmBackend for HttpBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn supports(&self, kind: RequestKind) -> bool {
        self.config.vision || kind == RequestKind::TextChat
    }

    fn call(&self, request: &LlmRequest) -> Result<BackendReply, BackendError> {
        let url = format!("{}/chat/completions", self.config.base_url);
        let mut req = self.client.post(&url).json(&self.body(request));
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| BackendError::Transient(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| BackendError::Transient(e.to_string()))?;
        if status.as_u16() == 429 {
            return Err(BackendError::RateLimited(format!("{status}: {text}")));
        }
        if status.is_server_error() || status.as_u16() == 408 {
            return Err(BackendError::Transient(format!("{status}: {text}")));
        }
        if !status.is_success() {
            return Err(BackendError::Fatal(format!("{status}: {text}")));
        }
        let body: Value =
            serde_json::from_str(&text).map_err(|e| BackendError::Fatal(format!("malformed response: {e}")))?;
        parse_reply(&body)
    }
}
