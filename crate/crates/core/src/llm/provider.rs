//! Chat and embedding providers. Remote providers only assume "send text,
//! receive text" over JSON HTTP.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde_json::{json, Value};

use super::config::{ProviderConfig, ProviderId};
use super::embed::Embedder;
use super::template::{RenderedPrompt, StructuredRequest};
use crate::context::EmbeddingVector;
use crate::error::{Error, Result};

static OUTBOUND_REQUESTS: AtomicU64 = AtomicU64::new(0);

/// Number of HTTP requests issued by any provider in this process.
pub fn outbound_request_count() -> u64 {
    OUTBOUND_REQUESTS.load(Ordering::SeqCst)
}

/// One attempt at a structured completion, as seen by a provider.
#[derive(Debug, Clone, Copy)]
pub struct ChatCall<'a> {
    pub request: &'a StructuredRequest,
    pub prompt: &'a RenderedPrompt,
    /// Present on retries: why the previous reply was rejected.
    pub repair: Option<&'a str>,
    pub attempt: u32,
}

impl ChatCall<'_> {
    pub fn user_text(&self) -> String {
        match self.repair {
            None => self.prompt.user.clone(),
            Some(reason) => format!(
                "{}\n\nYour previous reply could not be used ({reason}). Reply again with only a single JSON object matching the required shape.",
                self.prompt.user
            ),
        }
    }
}

pub trait ChatProvider: Send + Sync {
    fn complete(&self, call: &ChatCall<'_>) -> Result<String>;
}

fn classify(err: ureq::Error) -> Error {
    let retryable = match &err {
        ureq::Error::StatusCode(code) => *code == 429 || *code >= 500,
        ureq::Error::Timeout(_) | ureq::Error::Io(_) | ureq::Error::ConnectionFailed => true,
        _ => false,
    };
    Error::Provider {
        message: err.to_string(),
        retryable,
    }
}

/// HTTP-backed provider for the three remote/local dialects.
pub struct HttpProvider {
    cfg: ProviderConfig,
    agent: ureq::Agent,
    credential: Option<String>,
}

impl HttpProvider {
    pub fn new(cfg: ProviderConfig) -> Result<Self> {
        if cfg.provider_id == ProviderId::Mock {
            return Err(Error::InvalidArgument("mock provider is not an HTTP provider".into()));
        }
        let credential = cfg.credential()?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(300)))
            .build()
            .into();
        Ok(HttpProvider {
            cfg,
            agent,
            credential,
        })
    }

    fn base(&self) -> &str {
        let default = match self.cfg.provider_id {
            ProviderId::RemoteApiA => "https://api.openai.com/v1",
            ProviderId::RemoteApiB => "https://generativelanguage.googleapis.com/v1beta",
            _ => "http://127.0.0.1:11434",
        };
        self.cfg.base_url.as_deref().unwrap_or(default).trim_end_matches('/')
    }

    fn post(&self, url: &str, body: &Value) -> Result<Value> {
        OUTBOUND_REQUESTS.fetch_add(1, Ordering::SeqCst);
        let mut req = self.agent.post(url).header("content-type", "application/json");
        if let Some(key) = &self.credential {
            req = match self.cfg.provider_id {
                ProviderId::RemoteApiB => req.header("x-goog-api-key", key),
                _ => req.header("authorization", &format!("Bearer {key}")),
            };
        }
        let mut resp = req.send_json(body).map_err(classify)?;
        resp.body_mut().read_json::<Value>().map_err(classify)
    }

    fn missing(&self, what: &str) -> Error {
        Error::Provider {
            message: format!("{} response lacks {what}", self.cfg.provider_id.as_str()),
            retryable: false,
        }
    }
}

impl ChatProvider for HttpProvider {
    fn complete(&self, call: &ChatCall<'_>) -> Result<String> {
        let cfg = &self.cfg;
        let user = call.user_text();
        match cfg.provider_id {
            ProviderId::RemoteApiA => {
                let mut body = json!({
                    "model": cfg.model_name,
                    "temperature": cfg.temperature,
                    "max_tokens": cfg.max_output_tokens,
                    "response_format": {"type": "json_object"},
                    "messages": [
                        {"role": "system", "content": call.prompt.system},
                        {"role": "user", "content": user},
                    ],
                });
                if let Some(seed) = cfg.seed {
                    body["seed"] = seed.into();
                }
                let v = self.post(&format!("{}/chat/completions", self.base()), &body)?;
                v.pointer("/choices/0/message/content")
                    .and_then(Value::as_str)
                    .map(String::from)
                    .ok_or_else(|| self.missing("choices[0].message.content"))
            }
            ProviderId::RemoteApiB => {
                let mut generation = json!({
                    "temperature": cfg.temperature,
                    "maxOutputTokens": cfg.max_output_tokens,
                    "responseMimeType": "application/json",
                });
                if let Some(seed) = cfg.seed {
                    generation["seed"] = seed.into();
                }
                let body = json!({
                    "systemInstruction": {"parts": [{"text": call.prompt.system}]},
                    "contents": [{"role": "user", "parts": [{"text": user}]}],
                    "generationConfig": generation,
                });
                let url = format!("{}/models/{}:generateContent", self.base(), cfg.model_name);
                let v = self.post(&url, &body)?;
                v.pointer("/candidates/0/content/parts/0/text")
                    .and_then(Value::as_str)
                    .map(String::from)
                    .ok_or_else(|| self.missing("candidates[0].content.parts[0].text"))
            }
            ProviderId::LocalRuntime => {
                let mut options = json!({
                    "temperature": cfg.temperature,
                    "num_predict": cfg.max_output_tokens,
                });
                if let Some(seed) = cfg.seed {
                    options["seed"] = seed.into();
                }
                let body = json!({
                    "model": cfg.model_name,
                    "stream": false,
                    "format": "json",
                    "options": options,
                    "messages": [
                        {"role": "system", "content": call.prompt.system},
                        {"role": "user", "content": user},
                    ],
                });
                let v = self.post(&format!("{}/api/chat", self.base()), &body)?;
                v.pointer("/message/content")
                    .and_then(Value::as_str)
                    .map(String::from)
                    .ok_or_else(|| self.missing("message.content"))
            }
            ProviderId::Mock => unreachable!("rejected in HttpProvider::new"),
        }
    }
}

impl Embedder for HttpProvider {
    fn model_tag(&self) -> &str {
        &self.cfg.embed_model
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector<f64>>> {
        if texts.is_empty() {
            return Err(Error::InvalidArgument("no texts to embed".into()));
        }
        let model = &self.cfg.embed_model;
        let rows: Vec<Vec<f64>> = match self.cfg.provider_id {
            ProviderId::RemoteApiA => {
                let v = self.post(
                    &format!("{}/embeddings", self.base()),
                    &json!({"model": model, "input": texts}),
                )?;
                let data = v.get("data").and_then(Value::as_array).ok_or_else(|| self.missing("data"))?;
                let mut rows: Vec<(u64, Vec<f64>)> = data
                    .iter()
                    .map(|d| {
                        let idx = d.get("index").and_then(Value::as_u64).unwrap_or(0);
                        (idx, floats(d.get("embedding")))
                    })
                    .collect();
                rows.sort_by_key(|(i, _)| *i);
                rows.into_iter().map(|(_, r)| r).collect()
            }
            ProviderId::RemoteApiB => {
                let requests: Vec<Value> = texts
                    .iter()
                    .map(|t| json!({"model": format!("models/{model}"), "content": {"parts": [{"text": t}]}}))
                    .collect();
                let url = format!("{}/models/{model}:batchEmbedContents", self.base());
                let v = self.post(&url, &json!({"requests": requests}))?;
                v.get("embeddings")
                    .and_then(Value::as_array)
                    .ok_or_else(|| self.missing("embeddings"))?
                    .iter()
                    .map(|e| floats(e.get("values")))
                    .collect()
            }
            ProviderId::LocalRuntime => {
                let v = self.post(
                    &format!("{}/api/embed", self.base()),
                    &json!({"model": model, "input": texts}),
                )?;
                v.get("embeddings")
                    .and_then(Value::as_array)
                    .ok_or_else(|| self.missing("embeddings"))?
                    .iter()
                    .map(|e| floats(Some(e)))
                    .collect()
            }
            ProviderId::Mock => unreachable!("rejected in HttpProvider::new"),
        };
        if rows.len() != texts.len() {
            return Err(Error::Provider {
                message: format!("expected {} embeddings, got {}", texts.len(), rows.len()),
                retryable: false,
            });
        }
        rows.into_iter()
            .map(|r| EmbeddingVector::new(r, model.clone()))
            .collect()
    }
}

fn floats(v: Option<&Value>) -> Vec<f64> {
    v.and_then(Value::as_array)
        .map(|a| a.iter().filter_map(Value::as_f64).collect())
        .unwrap_or_default()
}
