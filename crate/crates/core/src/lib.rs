pub mod context;
pub mod demo;
pub mod error;
pub mod ingest;
pub mod llm;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod scalar;
pub mod store;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Everyday precision.
pub type Embedding = context::EmbeddingVector<f64>;
pub type Score = metrics::PrfScore<f64>;
pub type Matching = metrics::MatchResult<f64>;
pub type Agreement = metrics::ClusteringAgreement<f64>;
/// Exact arithmetic, used to cross-check the float paths.
pub type ExactScore = metrics::PrfScore<num_rational::BigRational>;
pub type ExactAgreement = metrics::ClusteringAgreement<num_rational::BigRational>;
