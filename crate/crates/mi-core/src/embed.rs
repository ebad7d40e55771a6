//! Embedding abstraction, vector helpers, and a deterministic stub.
//!
//! The reflection metrics only need cosine similarities, so the trait is a
//! batch text-to-vector map. `StubEmbedder` backs tests and offline runs: a
//! hash-bucketed bag-of-words embedding plus an override table that pins the
//! cosine between chosen text pairs to an exact value.

use std::collections::HashMap;

use crate::error::EmbedError;

/// Batch text embedder.
pub trait Embedder {
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError>;
}

/// Dot product; errors on length mismatch.
pub fn dot(a: &[f64], b: &[f64]) -> Result<f64, EmbedError> {
    if a.len() != b.len() {
        return Err(EmbedError::DimensionMismatch(a.len(), b.len()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum())
}

/// Euclidean norm.
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Cosine similarity; errors on zero-norm input.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, EmbedError> {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(EmbedError::ZeroNorm);
    }
    Ok(dot(a, b)? / (na * nb))
}

fn fnv1a(text: &str) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for byte in text.as_bytes() {
        hash ^= *byte as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Deterministic embedder: each token maps to a one-hot at its hash bucket,
/// a text to the normalized sum over its tokens. Overrides pin
/// `cos(embed(a), embed(b))` to an exact value by rebuilding `b`'s vector in
/// the plane spanned by `a`'s direction and an orthogonal unit vector.
#[derive(Debug, Clone)]
pub struct StubEmbedder {
    dims: usize,
    /// Keyed by the overridden text `b`: (anchor text `a`, target cosine).
    overrides: HashMap<String, (String, f64)>,
}

impl StubEmbedder {
    pub fn new() -> Self {
        StubEmbedder { dims: 256, overrides: HashMap::new() }
    }

    pub fn with_dims(dims: usize) -> Self {
        StubEmbedder { dims, overrides: HashMap::new() }
    }

    /// Pin `cos(embed(anchor), embed(text))` to `cosine`. The anchor keeps
    /// its natural embedding.
    pub fn add_override(
        &mut self,
        anchor: impl Into<String>,
        text: impl Into<String>,
        cosine: f64,
    ) -> Result<(), EmbedError> {
        if !(-1.0..=1.0).contains(&cosine) {
            return Err(EmbedError::Provider(format!(
                "override cosine {cosine} is outside [-1, 1]"
            )));
        }
        self.overrides.insert(text.into(), (anchor.into(), cosine));
        Ok(())
    }

    /// Parse override lines: `anchor | text | cosine`, or three
    /// whitespace-separated fields for single-word pairs. Blank lines and
    /// `#` comments are skipped.
    pub fn parse_overrides(&mut self, text: &str) -> Result<(), EmbedError> {
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (anchor, target, value) = if line.contains('|') {
                let parts: Vec<&str> = line.split('|').map(str::trim).collect();
                if parts.len() != 3 {
                    return Err(EmbedError::Provider(format!(
                        "override line needs 3 `|` fields: `{line}`"
                    )));
                }
                (parts[0].to_string(), parts[1].to_string(), parts[2])
            } else {
                let parts: Vec<&str> = line.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(EmbedError::Provider(format!(
                        "override line needs 3 fields: `{line}`"
                    )));
                }
                (parts[0].to_string(), parts[1].to_string(), parts[2])
            };
            let value: f64 = value
                .parse()
                .map_err(|_| EmbedError::Provider(format!("bad cosine in `{line}`")))?;
            self.add_override(anchor, target, value)?;
        }
        Ok(())
    }

    fn bucket(&self, token: &str) -> usize {
        (fnv1a(token) % self.dims as u64) as usize
    }

    /// Bag-of-words vector before any override, L2-normalized. Texts whose
    /// tokens all trim away hash as a single raw token.
    fn natural(&self, text: &str) -> Vec<f64> {
        let tokens = crate::text::tokenize(text);
        let mut v = vec![0.0; self.dims];
        if tokens.is_empty() {
            v[self.bucket(text.trim())] = 1.0;
            return v;
        }
        for token in &tokens {
            v[self.bucket(token)] += 1.0;
        }
        let n = norm(&v);
        for x in &mut v {
            *x /= n;
        }
        v
    }

    fn embed_one(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        let Some((anchor, target_cos)) = self.overrides.get(text) else {
            return Ok(self.natural(text));
        };
        let mut u = self.natural(anchor);
        let nu = norm(&u);
        for x in &mut u {
            *x /= nu;
        }
        // Orthogonal direction: Gram-Schmidt the natural vector against the
        // anchor; on collinearity walk the basis until one bucket works.
        let mut w = self.natural(text);
        let mut keep = gram_schmidt(&w, &u);
        let mut bump = self.bucket(text);
        while keep.is_none() {
            bump = (bump + 1) % self.dims;
            w = vec![0.0; self.dims];
            w[bump] = 1.0;
            keep = gram_schmidt(&w, &u);
        }
        let orth = keep.expect("some basis vector is independent of the anchor");
        let scale = (1.0 - target_cos * target_cos).sqrt();
        Ok(u
            .iter()
            .zip(&orth)
            .map(|(a, o)| target_cos * a + scale * o)
            .collect())
    }
}

/// `v` minus its projection on unit vector `u`, normalized; `None` when the
/// residual is (numerically) zero.
fn gram_schmidt(v: &[f64], u: &[f64]) -> Option<Vec<f64>> {
    let proj: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
    let residual: Vec<f64> = v.iter().zip(u).map(|(a, b)| a - proj * b).collect();
    let n = norm(&residual);
    if n < 1e-12 {
        return None;
    }
    Some(residual.into_iter().map(|x| x / n).collect())
}

impl Default for StubEmbedder {
    fn default() -> Self {
        Self::new()
    }
}

impl Embedder for StubEmbedder {
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        if texts.is_empty() {
            return Err(EmbedError::EmptyBatch);
        }
        texts.iter().map(|t| self.embed_one(t)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cos_of(embedder: &StubEmbedder, a: &str, b: &str) -> f64 {
        let vs = embedder.embed(&[a, b]).unwrap();
        cosine(&vs[0], &vs[1]).unwrap()
    }

    #[test]
    fn unrelated_words_land_in_distinct_buckets() {
        let e = StubEmbedder::new();
        let words = ["feel", "tired", "sound", "exhausted", "sleep", "change"];
        let buckets: Vec<usize> = words.iter().map(|w| e.bucket(w)).collect();
        let mut unique = buckets.clone();
        unique.sort_unstable();
        unique.dedup();
        assert_eq!(unique.len(), words.len(), "bucket collision in {buckets:?}");
        assert!(cos_of(&e, "feel", "sound").abs() < 1e-12);
    }

    #[test]
    fn identical_texts_have_unit_cosine() {
        let e = StubEmbedder::new();
        assert!((cos_of(&e, "so tired today", "so tired today") - 1.0).abs() < 1e-12);
    }

    #[test]
    fn override_pins_exact_cosine() {
        let mut e = StubEmbedder::new();
        e.add_override("tired", "exhausted", 0.9).unwrap();
        assert!((cos_of(&e, "tired", "exhausted") - 0.9).abs() < 1e-12);
        // Sentence pair override.
        e.add_override("I feel so tired.", "It sounds like you are exhausted.", 0.4)
            .unwrap();
        let c = cos_of(&e, "I feel so tired.", "It sounds like you are exhausted.");
        assert!((c - 0.4).abs() < 1e-12);
    }

    #[test]
    fn override_survives_collinear_natural_vectors() {
        let mut e = StubEmbedder::new();
        e.add_override("tired", "tired exhausted", 0.25).unwrap();
        assert!((cos_of(&e, "tired", "tired exhausted") - 0.25).abs() < 1e-12);
        // Distinct texts with identical natural vectors force the bump path.
        e.add_override("weary weary", "weary", 0.0).unwrap();
        assert!(cos_of(&e, "weary weary", "weary").abs() < 1e-12);
    }

    #[test]
    fn parser_reads_both_line_forms() {
        let mut e = StubEmbedder::new();
        e.parse_overrides("# pairs\ntired exhausted 0.9\nI feel so tired. | It sounds like you are exhausted. | 0.4\n")
            .unwrap();
        assert!((cos_of(&e, "tired", "exhausted") - 0.9).abs() < 1e-12);
        assert!(e.parse_overrides("tired exhausted").is_err());
        assert!(e.parse_overrides("tired exhausted 1.5").is_err());
    }

    #[test]
    fn batch_errors() {
        let e = StubEmbedder::new();
        assert_eq!(e.embed(&[]), Err(EmbedError::EmptyBatch));
        assert_eq!(
            cosine(&[1.0, 0.0], &[0.0, 0.0, 1.0]),
            Err(EmbedError::DimensionMismatch(2, 3))
        );
        assert_eq!(cosine(&[0.0], &[1.0]), Err(EmbedError::ZeroNorm));
    }
}
