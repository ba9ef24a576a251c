use sha2::{Digest, Sha256};

use crate::context::EmbeddingVector;
use crate::error::{Error, Result};

pub const MOCK_EMBED_MODEL: &str = "mock-hash-256";
const MOCK_DIM: usize = 256;

/// Anything that turns texts into tagged vectors, one per input, in order.
pub trait Embedder: Send + Sync {
    fn model_tag(&self) -> &str;
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector<f64>>>;
}

/// Deterministic offline embedder: signed feature hashing of word and
/// character-trigram features, L2-normalized. Texts sharing vocabulary land
/// near each other, identical texts map to identical vectors.
#[derive(Debug, Clone)]
pub struct MockEmbedder {
    seed: u64,
    dim: usize,
    tag: String,
}

impl Default for MockEmbedder {
    fn default() -> Self {
        MockEmbedder::new(0)
    }
}

impl MockEmbedder {
    pub fn new(seed: u64) -> Self {
        MockEmbedder {
            seed,
            dim: MOCK_DIM,
            tag: MOCK_EMBED_MODEL.to_string(),
        }
    }

    fn bucket(&self, feature: &str) -> (usize, f64) {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(feature.as_bytes());
        let d = h.finalize();
        let idx = u32::from_le_bytes([d[0], d[1], d[2], d[3]]) as usize % self.dim;
        let sign = if d[4] & 1 == 0 { 1.0 } else { -1.0 };
        (idx, sign)
    }

    pub fn embed_one(&self, text: &str) -> EmbeddingVector<f64> {
        let mut values = vec![0.0f64; self.dim];
        let lower = text.to_lowercase();
        let mut any = false;
        for word in lower.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()) {
            any = true;
            let (i, s) = self.bucket(&format!("w:{word}"));
            values[i] += s;
            let padded: Vec<char> = format!("^{word}$").chars().collect();
            for tri in padded.windows(3) {
                let tri: String = tri.iter().collect();
                let (i, s) = self.bucket(&format!("t:{tri}"));
                values[i] += 0.5 * s;
            }
        }
        if !any {
            let (i, s) = self.bucket(&format!("raw:{text}"));
            values[i] += s;
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut values {
                *v /= norm;
            }
        } else {
            values[0] = 1.0;
        }
        EmbeddingVector {
            values,
            model_tag: self.tag.clone(),
        }
    }
}

impl Embedder for MockEmbedder {
    fn model_tag(&self) -> &str {
        &self.tag
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector<f64>>> {
        if texts.is_empty() {
            return Err(Error::InvalidArgument("no texts to embed".into()));
        }
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}
