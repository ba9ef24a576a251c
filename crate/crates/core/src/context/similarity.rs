use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A dense embedding tagged with the model that produced it. Vectors with
/// different tags are never compared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector<S> {
    pub values: Vec<S>,
    pub model_tag: String,
}

impl<S: Real> EmbeddingVector<S> {
    pub fn new(values: Vec<S>, model_tag: impl Into<String>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("embedding contains non-finite values".into()));
        }
        Ok(EmbeddingVector {
            values,
            model_tag: model_tag.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> S {
        self.values
            .iter()
            .fold(S::zero(), |acc, &v| acc + v * v)
            .sqrt()
    }

    pub fn scaled(&self, factor: S) -> Self {
        EmbeddingVector {
            values: self.values.iter().map(|&v| v * factor).collect(),
            model_tag: self.model_tag.clone(),
        }
    }
}

/// `dot(a, b) / (|a| |b|)`, clamped to `[-1, 1]`.
pub fn cosine_similarity<S: Real>(a: &EmbeddingVector<S>, b: &EmbeddingVector<S>) -> Result<S> {
    if a.model_tag != b.model_tag {
        return Err(Error::IncompatibleVectors(format!(
            "model tags differ: {} vs {}",
            a.model_tag, b.model_tag
        )));
    }
    if a.dim() != b.dim() {
        return Err(Error::IncompatibleVectors(format!(
            "dimensions differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let na = a.norm();
    let nb = b.norm();
    if na == S::zero() || nb == S::zero() {
        return Err(Error::DegenerateVector);
    }
    if a.values == b.values {
        return Ok(S::one());
    }
    let dot = a
        .values
        .iter()
        .zip(&b.values)
        .fold(S::zero(), |acc, (&x, &y)| acc + x * y);
    let sim = dot / (na * nb);
    Ok(sim.max(-S::one()).min(S::one()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(values: &[f64]) -> EmbeddingVector<f64> {
        EmbeddingVector::new(values.to_vec(), "m").unwrap()
    }

    #[test]
    fn analytic_cases() {
        assert_eq!(cosine_similarity(&v(&[0.3, -2.0, 5.0]), &v(&[0.3, -2.0, 5.0])).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
        assert_eq!(
            cosine_similarity(&v(&[1.0, 0.0]), &v(&[1.0, 1.0])).unwrap(),
            0.7071067811865475
        );
        let f: EmbeddingVector<f32> = EmbeddingVector::new(vec![1.0, 0.0], "m").unwrap();
        assert_eq!(cosine_similarity(&f, &f).unwrap(), 1.0f32);
    }

    #[test]
    fn errors() {
        let other = EmbeddingVector::new(vec![1.0, 0.0], "other").unwrap();
        assert!(matches!(
            cosine_similarity(&v(&[1.0, 0.0]), &other),
            Err(Error::IncompatibleVectors(_))
        ));
        assert!(matches!(
            cosine_similarity(&v(&[1.0, 0.0]), &v(&[1.0, 0.0, 0.0])),
            Err(Error::IncompatibleVectors(_))
        ));
        assert!(matches!(
            cosine_similarity(&v(&[0.0, 0.0]), &v(&[1.0, 0.0])),
            Err(Error::DegenerateVector)
        ));
        assert!(EmbeddingVector::new(vec![f64::NAN], "m").is_err());
    }

    proptest! {
        #[test]
        fn symmetric_and_scale_invariant(
            a in proptest::collection::vec(-10.0f64..10.0, 4),
            b in proptest::collection::vec(-10.0f64..10.0, 4),
            scale in 0.01f64..100.0,
        ) {
            let a = v(&a);
            let b = v(&b);
            prop_assume!(a.norm() > 1e-3 && b.norm() > 1e-3);
            let ab = cosine_similarity(&a, &b).unwrap();
            let ba = cosine_similarity(&b, &a).unwrap();
            let sab = cosine_similarity(&a.scaled(scale), &b).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!((ab - sab).abs() <= 1e-12);
            prop_assert!((-1.0..=1.0).contains(&ab));
        }
    }
}
