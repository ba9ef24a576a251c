//! Researcher background material: chunked, embedded, and searched
//! exhaustively by cosine similarity.

mod chunk;
mod similarity;
mod store;

pub use chunk::{chunk_text, span_text, Span, DEFAULT_CHUNK_CHARS, DEFAULT_OVERLAP_CHARS};
pub use similarity::{cosine_similarity, EmbeddingVector};
pub use store::{Chunk, ContextDocument, ContextStore, DocumentKind, RetrievalResult};
