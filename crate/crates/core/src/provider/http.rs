use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::{
    validate_request, ApiFlavor, ChatProvider, ProviderError, ProviderRequest, ProviderResponse,
    TokenUsage,
};

const ANTHROPIC_ENDPOINT: &str = "https://api.anthropic.com/v1/messages";
const OPENAI_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";
const ANTHROPIC_VERSION: &str = "2023-06-01";

/// Live provider speaking either the Anthropic Messages API or an
/// OpenAI-compatible chat completions API.
pub struct HttpProvider {
    api: ApiFlavor,
    endpoint: String,
    api_key: String,
    client: reqwest::blocking::Client,
}

impl HttpProvider {
    pub fn new(
        api: ApiFlavor,
        endpoint: Option<String>,
        api_key: String,
        timeout: Duration,
    ) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ProviderError::Config(e.to_string()))?;
        let endpoint = endpoint.unwrap_or_else(|| {
            match api {
                ApiFlavor::Anthropic => ANTHROPIC_ENDPOINT,
                ApiFlavor::Openai => OPENAI_ENDPOINT,
            }
            .to_string()
        });
        Ok(Self {
            api,
            endpoint,
            api_key,
            client,
        })
    }

    fn body(&self, req: &ProviderRequest) -> Value {
        match self.api {
            ApiFlavor::Anthropic => {
                let content: Vec<Value> = req
                    .messages
                    .iter()
                    .map(|m| json!({"type": "text", "text": m}))
                    .collect();
                json!({
                    "model": req.model,
                    "system": req.system,
                    "max_tokens": req.params.max_output_tokens,
                    "temperature": req.params.temperature,
                    "messages": [{"role": "user", "content": content}],
                })
            }
            ApiFlavor::Openai => {
                let mut messages = vec![json!({"role": "system", "content": req.system})];
                messages.extend(
                    req.messages
                        .iter()
                        .map(|m| json!({"role": "user", "content": m})),
                );
                json!({
                    "model": req.model,
                    "max_tokens": req.params.max_output_tokens,
                    "temperature": req.params.temperature,
                    "messages": messages,
                })
            }
        }
    }

    fn decode(&self, v: &Value) -> Result<(String, TokenUsage), ProviderError> {
        let missing = |what: &str| ProviderError::Decode(format!("missing {what}"));
        let count = |v: &Value, key: &str| {
            v.get(key)
                .and_then(Value::as_u64)
                .ok_or_else(|| missing(key))
        };
        match self.api {
            ApiFlavor::Anthropic => {
                let blocks = v
                    .get("content")
                    .and_then(Value::as_array)
                    .ok_or_else(|| missing("content"))?;
                let text: String = blocks
                    .iter()
                    .filter(|b| b.get("type").and_then(Value::as_str) == Some("text"))
                    .filter_map(|b| b.get("text").and_then(Value::as_str))
                    .collect();
                let usage = v.get("usage").ok_or_else(|| missing("usage"))?;
                Ok((
                    text,
                    TokenUsage::new(
                        count(usage, "input_tokens")?,
                        count(usage, "output_tokens")?,
                    ),
                ))
            }
            ApiFlavor::Openai => {
                let text = v
                    .pointer("/choices/0/message/content")
                    .and_then(Value::as_str)
                    .ok_or_else(|| missing("choices[0].message.content"))?;
                let usage = v.get("usage").ok_or_else(|| missing("usage"))?;
                Ok((
                    text.to_string(),
                    TokenUsage::new(
                        count(usage, "prompt_tokens")?,
                        count(usage, "completion_tokens")?,
                    ),
                ))
            }
        }
    }
}

impl ChatProvider for HttpProvider {
    fn id(&self) -> String {
        match self.api {
            ApiFlavor::Anthropic => format!("anthropic:{}", self.endpoint),
            ApiFlavor::Openai => format!("openai:{}", self.endpoint),
        }
    }

    fn complete(&self, request: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        validate_request(request)?;
        let start = Instant::now();
        let mut builder = self.client.post(&self.endpoint).json(&self.body(request));
        builder = match self.api {
            ApiFlavor::Anthropic => builder
                .header("x-api-key", &self.api_key)
                .header("anthropic-version", ANTHROPIC_VERSION),
            ApiFlavor::Openai => builder.bearer_auth(&self.api_key),
        };
        let resp = builder.send().map_err(|e| {
            if e.is_timeout() {
                ProviderError::Timeout
            } else {
                ProviderError::Transport(e.to_string())
            }
        })?;
        let status = resp.status();
        let body = resp
            .text()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(ProviderError::Http {
                status: status.as_u16(),
                body,
            });
        }
        let value: Value =
            serde_json::from_str(&body).map_err(|e| ProviderError::Decode(e.to_string()))?;
        let (text, usage) = self.decode(&value)?;
        Ok(ProviderResponse {
            text,
            usage,
            latency_ms: start.elapsed().as_millis() as u64,
        })
    }
}
