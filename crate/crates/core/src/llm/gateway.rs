use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::config::{ProviderConfig, ProviderId};
use super::embed::{Embedder, MockEmbedder};
use super::mock::{MockProvider, MockScript};
use super::provider::{ChatCall, ChatProvider, HttpProvider};
use super::schema::extract_json_object;
use super::template::{Feedback, StructuredRequest, TemplateRegistry};
use crate::context::EmbeddingVector;
use crate::error::{Error, Result};

/// A schema-valid model answer together with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub raw_text: String,
    pub parsed: Value,
    pub attempts: u32,
    pub provider_id: ProviderId,
    pub model_name: String,
    pub template_version: String,
}

#[derive(Debug, Default)]
pub struct GatewayCounters {
    pub requests: AtomicU64,
    pub attempts: AtomicU64,
    pub failures: AtomicU64,
    /// Rough token estimate (characters / 4) over prompts and replies.
    pub approx_tokens: AtomicU64,
}

/// Single entry point for every model call the pipeline makes.
pub struct Gateway {
    cfg: ProviderConfig,
    chat: Arc<dyn ChatProvider>,
    embedder: Arc<dyn Embedder>,
    templates: Arc<TemplateRegistry>,
    backoff: Duration,
    counters: GatewayCounters,
    mock: Option<Arc<MockProvider>>,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("provider", &self.cfg.provider_id)
            .field("model", &self.cfg.model_name)
            .finish_non_exhaustive()
    }
}

impl Gateway {
    pub fn new(cfg: ProviderConfig, chat: Arc<dyn ChatProvider>, embedder: Arc<dyn Embedder>) -> Self {
        Gateway {
            cfg,
            chat,
            embedder,
            templates: Arc::new(TemplateRegistry::builtin()),
            backoff: Duration::from_millis(500),
            counters: GatewayCounters::default(),
            mock: None,
        }
    }

    /// Offline gateway over the scripted mock and the hash embedder.
    pub fn mock(script: MockScript) -> Self {
        Self::mock_with(ProviderConfig::mock(), script)
    }

    pub fn mock_with(cfg: ProviderConfig, script: MockScript) -> Self {
        let provider = Arc::new(MockProvider::new(script));
        let embedder = Arc::new(MockEmbedder::new(cfg.seed.unwrap_or(0)));
        let mut gw = Gateway::new(cfg, provider.clone(), embedder);
        gw.backoff = Duration::ZERO;
        gw.mock = Some(provider);
        gw
    }

    /// Builds the provider named by `cfg`.
    pub fn from_config(cfg: ProviderConfig, script: Option<MockScript>) -> Result<Self> {
        cfg.validate()?;
        if cfg.provider_id == ProviderId::Mock {
            return Ok(Self::mock_with(cfg, script.unwrap_or_default()));
        }
        let http = Arc::new(HttpProvider::new(cfg.clone())?);
        Ok(Gateway::new(cfg, http.clone(), http))
    }

    pub fn with_templates(mut self, templates: TemplateRegistry) -> Self {
        self.templates = Arc::new(templates);
        self
    }

    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.cfg
    }

    pub fn templates(&self) -> &TemplateRegistry {
        &self.templates
    }

    pub fn counters(&self) -> &GatewayCounters {
        &self.counters
    }

    /// The underlying mock, when this gateway is offline.
    pub fn mock_provider(&self) -> Option<&MockProvider> {
        self.mock.as_deref()
    }

    pub fn embedder(&self) -> &dyn Embedder {
        self.embedder.as_ref()
    }

    /// Renders, calls, parses and validates; malformed replies are retried
    /// with a repair note up to `max_retries` attempts in total.
    pub fn complete_structured(&self, req: &StructuredRequest) -> Result<ModelResponse> {
        let template = self.templates.get(&req.template_id)?;
        let prompt = self
            .templates
            .render_within(req, self.cfg.context_budget_chars)?;
        self.counters.requests.fetch_add(1, Ordering::Relaxed);
        let max = self.cfg.max_retries.max(1);
        let mut repair: Option<String> = None;
        let mut last_raw = String::new();
        let mut last_provider_err: Option<Error> = None;
        for attempt in 1..=max {
            self.counters.attempts.fetch_add(1, Ordering::Relaxed);
            let call = ChatCall {
                request: req,
                prompt: &prompt,
                repair: repair.as_deref(),
                attempt,
            };
            let raw = match self.chat.complete(&call) {
                Ok(raw) => raw,
                Err(Error::Provider { message, retryable: true }) => {
                    if !self.backoff.is_zero() && attempt < max {
                        std::thread::sleep(self.backoff * 2u32.pow(attempt - 1));
                    }
                    last_provider_err = Some(Error::Provider {
                        message,
                        retryable: true,
                    });
                    continue;
                }
                Err(e) => {
                    self.counters.failures.fetch_add(1, Ordering::Relaxed);
                    return Err(e);
                }
            };
            last_provider_err = None;
            self.counters.approx_tokens.fetch_add(
                ((prompt.char_len() + raw.chars().count()) / 4) as u64,
                Ordering::Relaxed,
            );
            let checked = extract_json_object(&raw)
                .and_then(|v| template.output_schema.validate(&v).map(|()| v));
            match checked {
                Ok(parsed) => {
                    return Ok(ModelResponse {
                        raw_text: raw,
                        parsed,
                        attempts: attempt,
                        provider_id: self.cfg.provider_id,
                        model_name: self.cfg.model_name.clone(),
                        template_version: template.version.clone(),
                    })
                }
                Err(reason) => {
                    repair = Some(reason);
                    last_raw = raw;
                }
            }
        }
        self.counters.failures.fetch_add(1, Ordering::Relaxed);
        if let Some(e) = last_provider_err {
            return Err(e);
        }
        Err(Error::StructuredOutput {
            raw_text: last_raw,
            attempts: max,
            reason: repair.unwrap_or_default(),
        })
    }

    /// One vector per text, order preserved.
    pub fn embed_texts(&self, texts: &[String]) -> Result<Vec<EmbeddingVector<f64>>> {
        if texts.is_empty() {
            return Err(Error::InvalidArgument("no texts to embed".into()));
        }
        self.embedder.embed(texts)
    }

    /// Applies `f` to every item with at most `parallelism` in flight.
    /// Results keep input order.
    pub fn map_bounded<T, R, F>(&self, items: &[T], progress: &(dyn Fn(usize, usize) + Sync), f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync,
    {
        let total = items.len();
        let workers = self.cfg.parallelism.clamp(1, total.max(1));
        let next = AtomicUsize::new(0);
        let done = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<R>>> = (0..total).map(|_| Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= total {
                        break;
                    }
                    let r = f(&items[i]);
                    *slots[i].lock().expect("slot lock") = Some(r);
                    let d = done.fetch_add(1, Ordering::SeqCst) + 1;
                    progress(d, total);
                });
            }
        });
        slots
            .into_iter()
            .map(|s| s.into_inner().expect("slot lock").expect("every slot filled"))
            .collect()
    }
}

/// New request carrying the researcher's feedback and the prior parsed
/// answer. Only the latest prior answer is kept.
pub fn with_feedback(req: &StructuredRequest, feedback: &str, prior: &ModelResponse) -> Result<StructuredRequest> {
    with_feedback_value(req, feedback, &prior.parsed)
}

pub fn with_feedback_value(req: &StructuredRequest, feedback: &str, prior: &Value) -> Result<StructuredRequest> {
    let text = feedback.trim();
    if text.is_empty() {
        return Err(Error::InvalidArgument("feedback must not be empty".into()));
    }
    let mut next = req.clone();
    next.feedback = Some(Feedback {
        text: text.to_string(),
        prior_output: serde_json::to_string_pretty(prior)?,
    });
    Ok(next)
}
