//! Session-level lexical diversity metrics.
//!
//! Four metrics over the utterance texts of one session: normalized token
//! entropy, distinct-2, self-BLEU (BLEU-4 of each utterance against the
//! rest), and perplexity under a pluggable token scorer with a Laplace
//! trigram default.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::error::MetricError;
use crate::text::tokenize;

/// Shannon entropy over the pooled token distribution, normalized by
/// `log2(types)` so the value lies in [0, 1]. A single-type session scores 0.
pub fn token_entropy(utterances: &[&str]) -> Result<f64, MetricError> {
    // BTreeMap fixes the summation order; HashMap iteration would make the
    // low float digits vary run to run.
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut total = 0usize;
    for text in utterances {
        for token in tokenize(text) {
            *counts.entry(token).or_insert(0) += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(MetricError::EmptySession);
    }
    let types = counts.len();
    if types <= 1 {
        return Ok(0.0);
    }
    let h: f64 = counts
        .values()
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.log2()
        })
        .sum();
    Ok(h / (types as f64).log2())
}

/// Unique within-utterance bigrams over total bigrams, pooled across the
/// session. Errors when no utterance has two tokens.
pub fn distinct_2(utterances: &[&str]) -> Result<f64, MetricError> {
    let mut seen: HashSet<(String, String)> = HashSet::new();
    let mut total = 0usize;
    for text in utterances {
        let tokens = tokenize(text);
        for pair in tokens.windows(2) {
            seen.insert((pair[0].clone(), pair[1].clone()));
            total += 1;
        }
    }
    if total == 0 {
        return Err(MetricError::NoBigrams);
    }
    Ok(seen.len() as f64 / total as f64)
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts: HashMap<&[String], usize> = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Smoothed BLEU-4 of `candidate` against `refs`: add-one on every modified
/// n-gram precision, brevity penalty against the closest reference length
/// (ties to the shorter).
pub fn bleu4(candidate: &[String], refs: &[&[String]]) -> f64 {
    debug_assert!(!candidate.is_empty() && !refs.is_empty());
    let mut log_sum = 0.0;
    for n in 1..=4 {
        let cand = ngram_counts(candidate, n);
        let total: usize = cand.values().sum();
        let mut clipped = 0usize;
        for (gram, &count) in &cand {
            let best = refs
                .iter()
                .map(|r| ngram_counts(r, n).get(gram).copied().unwrap_or(0))
                .max()
                .unwrap_or(0);
            clipped += count.min(best);
        }
        log_sum += ((clipped + 1) as f64 / (total + 1) as f64).ln();
    }
    let c = candidate.len();
    let r = refs
        .iter()
        .map(|r| r.len())
        .min_by_key(|&len| {
            let diff = len.abs_diff(c);
            (diff, len)
        })
        .unwrap();
    let bp = if c >= r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    bp * (log_sum / 4.0).exp()
}

/// Mean BLEU-4 of each utterance against all the others. Utterances that
/// tokenize to nothing are skipped on both sides; at least two must remain.
pub fn self_bleu(utterances: &[&str]) -> Result<f64, MetricError> {
    let tokenized: Vec<Vec<String>> = utterances
        .iter()
        .map(|t| tokenize(t))
        .filter(|t| !t.is_empty())
        .collect();
    if tokenized.len() < 2 {
        return Err(MetricError::TooFewUtterances(tokenized.len()));
    }
    let mut sum = 0.0;
    for (i, candidate) in tokenized.iter().enumerate() {
        let refs: Vec<&[String]> = tokenized
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, t)| t.as_slice())
            .collect();
        sum += bleu4(candidate, &refs);
    }
    Ok(sum / tokenized.len() as f64)
}

/// Start-of-utterance padding symbol.
pub const PAD: &str = "<s>";
/// Stand-in for tokens unseen at fit time.
pub const UNK: &str = "<unk>";

/// Scores tokens in left-to-right order given a two-token context.
pub trait TokenScorer {
    /// P(token | prev2, prev1); must be in (0, 1].
    fn prob(&self, prev2: &str, prev1: &str, token: &str) -> f64;
}

/// Add-one trigram model: p = (c(u,v,w) + 1) / (c(u,v) + V) with V counting
/// the fitted vocabulary plus one unknown slot.
#[derive(Debug, Clone)]
pub struct LaplaceTrigram {
    trigrams: HashMap<(String, String, String), usize>,
    contexts: HashMap<(String, String), usize>,
    vocab: HashSet<String>,
}

impl LaplaceTrigram {
    /// Fit on utterance texts; each is padded with two leading `<s>`.
    pub fn fit<'a, I>(corpus: I) -> Result<Self, MetricError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut trigrams = HashMap::new();
        let mut contexts = HashMap::new();
        let mut vocab = HashSet::new();
        let mut any = false;
        for text in corpus {
            let tokens = tokenize(text);
            if tokens.is_empty() {
                continue;
            }
            any = true;
            let mut padded = vec![PAD.to_string(), PAD.to_string()];
            padded.extend(tokens.iter().cloned());
            vocab.extend(tokens);
            for w in padded.windows(3) {
                *trigrams
                    .entry((w[0].clone(), w[1].clone(), w[2].clone()))
                    .or_insert(0) += 1;
                *contexts.entry((w[0].clone(), w[1].clone())).or_insert(0) += 1;
            }
        }
        if !any {
            return Err(MetricError::EmptyCorpus);
        }
        Ok(LaplaceTrigram { trigrams, contexts, vocab })
    }

    fn canon(&self, token: &str) -> String {
        if token == PAD || self.vocab.contains(token) {
            token.to_string()
        } else {
            UNK.to_string()
        }
    }

    /// Vocabulary size including the unknown slot.
    pub fn v(&self) -> usize {
        self.vocab.len() + 1
    }

    /// Fitted vocabulary, excluding the `<unk>` slot.
    pub fn vocab(&self) -> impl Iterator<Item = &str> {
        self.vocab.iter().map(|s| s.as_str())
    }
}

impl TokenScorer for LaplaceTrigram {
    fn prob(&self, prev2: &str, prev1: &str, token: &str) -> f64 {
        let key = (self.canon(prev2), self.canon(prev1), self.canon(token));
        let ctx = (key.0.clone(), key.1.clone());
        let tri = self.trigrams.get(&key).copied().unwrap_or(0);
        let ctx_count = self.contexts.get(&ctx).copied().unwrap_or(0);
        (tri + 1) as f64 / (ctx_count + self.v()) as f64
    }
}

/// exp of the mean negative log-probability over all tokens in the session,
/// each utterance independently padded.
pub fn perplexity(utterances: &[&str], scorer: &dyn TokenScorer) -> Result<f64, MetricError> {
    let mut log_sum = 0.0;
    let mut n = 0usize;
    for text in utterances {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            continue;
        }
        let mut padded = vec![PAD.to_string(), PAD.to_string()];
        padded.extend(tokens);
        for w in padded.windows(3) {
            let p = scorer.prob(&w[0], &w[1], &w[2]);
            debug_assert!(p > 0.0 && p <= 1.0, "scorer returned {p}");
            log_sum += p.ln();
            n += 1;
        }
    }
    if n == 0 {
        return Err(MetricError::EmptySession);
    }
    Ok((-log_sum / n as f64).exp())
}
