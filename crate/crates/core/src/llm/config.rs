use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderId {
    /// OpenAI-compatible chat-completions endpoint.
    RemoteApiA,
    /// Google generative-language `generateContent` endpoint.
    RemoteApiB,
    /// Local Ollama runtime.
    LocalRuntime,
    Mock,
}

impl ProviderId {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProviderId::RemoteApiA => "remote_api_a",
            ProviderId::RemoteApiB => "remote_api_b",
            ProviderId::LocalRuntime => "local_runtime",
            ProviderId::Mock => "mock",
        }
    }
}

impl std::str::FromStr for ProviderId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "remote_api_a" | "openai" => Ok(ProviderId::RemoteApiA),
            "remote_api_b" | "gemini" => Ok(ProviderId::RemoteApiB),
            "local_runtime" | "ollama" => Ok(ProviderId::LocalRuntime),
            "mock" => Ok(ProviderId::Mock),
            other => Err(Error::InvalidArgument(format!("unknown provider {other:?}"))),
        }
    }
}

fn default_max_retries() -> u32 {
    3
}
fn default_parallelism() -> usize {
    4
}
fn default_budget() -> usize {
    120_000
}
fn default_max_output_tokens() -> u32 {
    4_096
}

/// Provider selection and call discipline. Only the *name* of the variable
/// holding a credential is ever stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub provider_id: ProviderId,
    pub model_name: String,
    pub embed_model: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_output_tokens")]
    pub max_output_tokens: u32,
    #[serde(default)]
    pub api_credential_ref: Option<String>,
    #[serde(default)]
    pub base_url: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    /// Upper bound on rendered prompt length, in characters.
    #[serde(default = "default_budget")]
    pub context_budget_chars: usize,
}

impl ProviderConfig {
    pub fn mock() -> Self {
        ProviderConfig {
            provider_id: ProviderId::Mock,
            model_name: "mock-chat".into(),
            embed_model: super::embed::MOCK_EMBED_MODEL.into(),
            temperature: 0.0,
            max_output_tokens: default_max_output_tokens(),
            api_credential_ref: None,
            base_url: None,
            seed: Some(0),
            max_retries: default_max_retries(),
            parallelism: default_parallelism(),
            context_budget_chars: default_budget(),
        }
    }

    /// Reads `TAFORGE_PROVIDER`, `TAFORGE_MODEL`, `TAFORGE_EMBED_MODEL`,
    /// `TAFORGE_API_KEY_REF` and `TAFORGE_BASE_URL`; defaults to the mock.
    pub fn from_env() -> Result<Self> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self> {
        let provider_id = match get("TAFORGE_PROVIDER") {
            Some(p) if !p.trim().is_empty() => p.parse()?,
            _ => ProviderId::Mock,
        };
        let mut cfg = ProviderConfig::mock();
        cfg.provider_id = provider_id;
        if provider_id != ProviderId::Mock {
            let (model, embed, key_ref) = match provider_id {
                ProviderId::RemoteApiA => ("gpt-4o-mini", "text-embedding-3-small", Some("OPENAI_API_KEY")),
                ProviderId::RemoteApiB => ("gemini-2.5-pro", "text-embedding-004", Some("GOOGLE_API_KEY")),
                _ => ("llama3.1", "nomic-embed-text", None),
            };
            cfg.model_name = model.into();
            cfg.embed_model = embed.into();
            cfg.api_credential_ref = key_ref.map(String::from);
            cfg.seed = None;
        }
        if let Some(m) = get("TAFORGE_MODEL").filter(|s| !s.is_empty()) {
            cfg.model_name = m;
        }
        if let Some(m) = get("TAFORGE_EMBED_MODEL").filter(|s| !s.is_empty()) {
            cfg.embed_model = m;
        }
        if let Some(r) = get("TAFORGE_API_KEY_REF").filter(|s| !s.is_empty()) {
            cfg.api_credential_ref = Some(r);
        }
        if let Some(u) = get("TAFORGE_BASE_URL").filter(|s| !s.is_empty()) {
            cfg.base_url = Some(u);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature >= 0.0) {
            return Err(Error::InvalidArgument("temperature must be >= 0".into()));
        }
        if self.max_retries == 0 {
            return Err(Error::InvalidArgument("max_retries must be >= 1".into()));
        }
        if self.parallelism == 0 {
            return Err(Error::InvalidArgument("parallelism must be >= 1".into()));
        }
        // Configs are persisted and echoed back, so a secret pasted into
        // either of these fields would leak.
        if let Some(url) = &self.base_url {
            let authority = url.split_once("://").map_or(url.as_str(), |(_, rest)| rest);
            let authority = authority.split(['/', '?', '#']).next().unwrap_or("");
            if authority.contains('@') {
                return Err(Error::InvalidArgument("base_url must not embed credentials".into()));
            }
        }
        if let Some(name) = &self.api_credential_ref {
            let ok = !name.is_empty()
                && name.len() <= 64
                && name.chars().all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_')
                && !name.starts_with(|c: char| c.is_ascii_digit());
            if !ok {
                return Err(Error::InvalidArgument(
                    "api_credential_ref must name an environment variable (A-Z, 0-9, _)".into(),
                ));
            }
        }
        Ok(())
    }

    /// Resolves the credential through the referenced environment variable.
    pub(crate) fn credential(&self) -> Result<Option<String>> {
        match (&self.api_credential_ref, self.provider_id) {
            (_, ProviderId::Mock) => Ok(None),
            (None, _) => Ok(None),
            (Some(name), _) => std::env::var(name).map(Some).map_err(|_| Error::Provider {
                message: format!("credential variable {name} is not set"),
                retryable: false,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn env_defaults_to_mock_without_credentials() {
        let cfg = ProviderConfig::from_lookup(|_| None).unwrap();
        assert_eq!(cfg.provider_id, ProviderId::Mock);
        assert_eq!(cfg.temperature, 0.0);
        assert!(cfg.api_credential_ref.is_none());
        assert_eq!(cfg.credential().unwrap(), None);
    }

    #[test]
    fn env_overrides() {
        let env: HashMap<&str, &str> = [
            ("TAFORGE_PROVIDER", "local_runtime"),
            ("TAFORGE_MODEL", "qwen"),
            ("TAFORGE_API_KEY_REF", "MY_KEY"),
        ]
        .into();
        let cfg = ProviderConfig::from_lookup(|k| env.get(k).map(|s| s.to_string())).unwrap();
        assert_eq!(cfg.provider_id, ProviderId::LocalRuntime);
        assert_eq!(cfg.model_name, "qwen");
        assert_eq!(cfg.api_credential_ref.as_deref(), Some("MY_KEY"));
        assert!("bogus".parse::<ProviderId>().is_err());
    }

    #[test]
    fn secrets_cannot_be_stored() {
        let mut cfg = ProviderConfig::mock();
        cfg.base_url = Some("https://user:pw@example.org/v1".into());
        assert!(cfg.validate().is_err());
        cfg.base_url = Some("http://localhost:11434/api?x=a@b".into());
        assert!(cfg.validate().is_ok());
        cfg.api_credential_ref = Some("sk-live-abc123".into());
        assert!(cfg.validate().is_err());
        cfg.api_credential_ref = Some("OPENAI_API_KEY".into());
        assert!(cfg.validate().is_ok());
    }
}
