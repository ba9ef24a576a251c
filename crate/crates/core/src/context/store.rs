use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::chunk::{chunk_text, span_text, Span, DEFAULT_CHUNK_CHARS, DEFAULT_OVERLAP_CHARS};
use super::similarity::{cosine_similarity, EmbeddingVector};
use crate::error::{Error, Result};
use crate::llm::Embedder;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocumentKind {
    ResearchQuestion,
    UploadedDocument,
    Note,
}

impl DocumentKind {
    fn as_str(self) -> &'static str {
        match self {
            DocumentKind::ResearchQuestion => "research_question",
            DocumentKind::UploadedDocument => "uploaded_document",
            DocumentKind::Note => "note",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextDocument {
    pub doc_id: String,
    pub kind: DocumentKind,
    pub text: String,
    /// Milliseconds since the epoch.
    pub added_at: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub span: Span,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub chunk: Chunk,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextStore {
    pub chunk_chars: usize,
    pub overlap_chars: usize,
    documents: Vec<ContextDocument>,
    chunks: Vec<Chunk>,
    vectors: Vec<EmbeddingVector<f64>>,
}

impl Default for ContextStore {
    fn default() -> Self {
        ContextStore::new(DEFAULT_CHUNK_CHARS, DEFAULT_OVERLAP_CHARS)
    }
}

fn doc_id_for(kind: DocumentKind, text: &str) -> String {
    let mut h = Sha256::new();
    h.update(kind.as_str().as_bytes());
    h.update([0u8]);
    h.update(text.as_bytes());
    let digest = h.finalize();
    let hex: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
    format!("doc-{hex}")
}

impl ContextStore {
    pub fn new(chunk_chars: usize, overlap_chars: usize) -> Self {
        ContextStore {
            chunk_chars,
            overlap_chars,
            documents: Vec::new(),
            chunks: Vec::new(),
            vectors: Vec::new(),
        }
    }

    pub fn documents(&self) -> &[ContextDocument] {
        &self.documents
    }

    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub fn vectors(&self) -> &[EmbeddingVector<f64>] {
        &self.vectors
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Text of every research-question document, in insertion order.
    pub fn research_questions(&self) -> Vec<&str> {
        self.documents
            .iter()
            .filter(|d| d.kind == DocumentKind::ResearchQuestion)
            .map(|d| d.text.as_str())
            .collect()
    }

    /// Chunks, embeds and indexes a document. Adding identical
    /// `(kind, text)` again returns the existing id.
    pub fn add_document(
        &mut self,
        kind: DocumentKind,
        text: &str,
        added_at: i64,
        embedder: &dyn Embedder,
    ) -> Result<String> {
        if text.trim().is_empty() {
            return Err(Error::InvalidArgument("context document text is empty".into()));
        }
        let doc_id = doc_id_for(kind, text);
        if self.documents.iter().any(|d| d.doc_id == doc_id) {
            return Ok(doc_id);
        }
        let spans = chunk_text(text, self.chunk_chars, self.overlap_chars)?;
        let chunks: Vec<Chunk> = spans
            .into_iter()
            .enumerate()
            .map(|(i, span)| Chunk {
                chunk_id: format!("{doc_id}#{i:04}"),
                doc_id: doc_id.clone(),
                span,
                text: span_text(text, span),
            })
            .collect();
        let texts: Vec<String> = chunks.iter().map(|c| c.text.clone()).collect();
        let vectors = embedder.embed(&texts)?;
        if vectors.len() != chunks.len() {
            return Err(Error::Provider {
                message: "embedder returned the wrong number of vectors".into(),
                retryable: false,
            });
        }
        if let Some(existing) = self.vectors.first() {
            if vectors.iter().any(|v| v.model_tag != existing.model_tag || v.dim() != existing.dim()) {
                return Err(Error::IncompatibleVectors(
                    "embedder differs from the one that built this index".into(),
                ));
            }
        }
        self.documents.push(ContextDocument {
            doc_id: doc_id.clone(),
            kind,
            text: text.to_string(),
            added_at,
        });
        self.chunks.extend(chunks);
        self.vectors.extend(vectors);
        Ok(doc_id)
    }

    /// Top `k` chunks by cosine similarity to `query`, descending, ties by
    /// chunk id.
    pub fn retrieve(&self, query: &str, k: usize, embedder: &dyn Embedder) -> Result<Vec<RetrievalResult>> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if self.chunks.is_empty() {
            return Err(Error::EmptyIndex);
        }
        let q = embedder
            .embed(&[query.to_string()])?
            .pop()
            .ok_or_else(|| Error::Provider {
                message: "embedder returned no vector".into(),
                retryable: false,
            })?;
        self.retrieve_by_vector(&q, k)
    }

    pub fn retrieve_by_vector(&self, q: &EmbeddingVector<f64>, k: usize) -> Result<Vec<RetrievalResult>> {
        if self.chunks.is_empty() {
            return Err(Error::EmptyIndex);
        }
        let mut scored = self
            .chunks
            .iter()
            .zip(&self.vectors)
            .map(|(c, v)| cosine_similarity(q, v).map(|s| (s, c)))
            .collect::<Result<Vec<_>>>()?;
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.chunk_id.cmp(&b.1.chunk_id)));
        Ok(scored
            .into_iter()
            .take(k)
            .map(|(score, chunk)| RetrievalResult {
                chunk: chunk.clone(),
                score,
            })
            .collect())
    }

    /// Checks span integrity and vector alignment after loading from disk.
    pub fn verify(&self) -> Result<()> {
        if self.chunks.len() != self.vectors.len() {
            return Err(Error::Corrupt("context chunks and vectors are misaligned".into()));
        }
        for c in &self.chunks {
            let doc = self
                .documents
                .iter()
                .find(|d| d.doc_id == c.doc_id)
                .ok_or_else(|| Error::Corrupt(format!("chunk {} has no document", c.chunk_id)))?;
            if span_text(&doc.text, c.span) != c.text {
                return Err(Error::Corrupt(format!("chunk {} does not match its span", c.chunk_id)));
            }
        }
        Ok(())
    }
}
