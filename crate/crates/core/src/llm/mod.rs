//! Structured-output access to chat and embedding providers.

mod config;
mod embed;
mod gateway;
mod mock;
mod provider;
pub mod schema;
mod template;
pub mod vars;

pub use config::{ProviderConfig, ProviderId};
pub use embed::{Embedder, MockEmbedder, MOCK_EMBED_MODEL};
pub use gateway::{with_feedback, with_feedback_value, Gateway, GatewayCounters, ModelResponse};
pub use mock::{fabricate, MockProvider, MockScript, Reply, ScriptEntry};
pub use provider::{outbound_request_count, ChatCall, ChatProvider, HttpProvider};
pub use schema::Schema;
pub use template::{ids, Feedback, PromptTemplate, RenderedPrompt, StructuredRequest, TemplateRegistry};
