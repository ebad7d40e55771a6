//! MI strategy metrics over therapist behavioral codes.
//!
//! Distribution-level: code entropy and adherence to the ideal category mix.
//! Reflection-level: similarity/informativeness scoring of (client,
//! reflection) pairs, a four-way depth classification, and the derived
//! ratios with their pass thresholds.

use crate::code::{QuestionKind, TherapistCategory, TherapistCode};
use crate::embed::{cosine, Embedder};
use crate::error::MetricError;
use crate::text::{content_tokens, StopList};

/// Ideal category mix, ordered [reflection, question, input, other].
pub const IDEAL_DISTRIBUTION: [f64; 4] = [0.50, 0.25, 0.20, 0.05];

/// Smoothing constant added to observed probabilities before the KL term.
pub const ADHERENCE_EPSILON: f64 = 1e-6;

/// Embedding cosine at or above which a reflection token counts as mirrored
/// client content rather than new information.
pub const INFO_COSINE_THRESHOLD: f64 = 0.8;

/// Pass thresholds, all strict.
pub const COMPLEX_RATIO_THRESHOLD: f64 = 0.5;
pub const OPEN_QUESTION_THRESHOLD: f64 = 0.7;
pub const RQ_RATIO_THRESHOLD: f64 = 2.0;

/// Observed category distribution in canonical order.
pub fn observed_distribution(categories: &[TherapistCategory]) -> Result<[f64; 4], MetricError> {
    if categories.is_empty() {
        return Err(MetricError::NoCodes);
    }
    let mut counts = [0usize; 4];
    for c in categories {
        let idx = TherapistCategory::ALL.iter().position(|x| x == c).unwrap();
        counts[idx] += 1;
    }
    let total = categories.len() as f64;
    Ok([
        counts[0] as f64 / total,
        counts[1] as f64 / total,
        counts[2] as f64 / total,
        counts[3] as f64 / total,
    ])
}

/// Shannon entropy of the observed distribution, normalized by the log of
/// the number of observed (nonzero) categories. One observed category gives
/// zero.
pub fn code_entropy(categories: &[TherapistCategory]) -> Result<f64, MetricError> {
    let dist = observed_distribution(categories)?;
    let observed: Vec<f64> = dist.iter().copied().filter(|&p| p > 0.0).collect();
    if observed.len() <= 1 {
        return Ok(0.0);
    }
    let h: f64 = observed.iter().map(|&p| -p * p.log2()).sum();
    Ok(h / (observed.len() as f64).log2())
}

/// exp(-KL(observed || ideal)) with natural logs. The observed distribution
/// is epsilon-smoothed and renormalized so zero categories stay finite; the
/// ideal is used as-is.
pub fn strategy_adherence(categories: &[TherapistCategory]) -> Result<f64, MetricError> {
    let dist = observed_distribution(categories)?;
    adherence_of_distribution(&dist)
}

/// Adherence for an already-normalized observed distribution.
pub fn adherence_of_distribution(dist: &[f64; 4]) -> Result<f64, MetricError> {
    let smoothed: Vec<f64> = dist.iter().map(|p| p + ADHERENCE_EPSILON).collect();
    let z: f64 = smoothed.iter().sum();
    let kl: f64 = smoothed
        .iter()
        .zip(IDEAL_DISTRIBUTION.iter())
        .map(|(&p, &q)| {
            let p = p / z;
            p * (p / q).ln()
        })
        .sum();
    Ok((-kl).exp())
}

/// Similarity and informativeness of one (client, reflection) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectionScore {
    /// (cos + 1) / 2 over full-utterance embeddings, in [0, 1].
    pub sim: f64,
    /// Fraction of reflection content tokens whose best cosine against the
    /// client's content tokens falls below the mirror threshold.
    pub info: f64,
}

/// Four-way reflection depth classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReflectionClass {
    Repeat,
    Rephrase,
    Paraphrase,
    Summarize,
}

impl ReflectionClass {
    /// Paraphrases and summaries count as complex reflections.
    pub fn is_complex(self) -> bool {
        matches!(self, ReflectionClass::Paraphrase | ReflectionClass::Summarize)
    }

    pub fn label(self) -> &'static str {
        match self {
            ReflectionClass::Repeat => "repeat",
            ReflectionClass::Rephrase => "rephrase",
            ReflectionClass::Paraphrase => "paraphrase",
            ReflectionClass::Summarize => "summarize",
        }
    }
}

/// Cascade on (sim, info), every comparison strict. A pair failing each
/// guard falls through to summarize.
pub fn classify_reflection(score: ReflectionScore) -> ReflectionClass {
    let ReflectionScore { sim, info } = score;
    if sim > 0.9 && info < 0.15 {
        ReflectionClass::Repeat
    } else if sim > 0.75 && info < 0.35 {
        ReflectionClass::Rephrase
    } else if sim > 0.5 && info < 0.6 {
        ReflectionClass::Paraphrase
    } else {
        ReflectionClass::Summarize
    }
}

/// Score one pair. The reflection must have content tokens; a client
/// utterance without any makes every reflection token informative.
pub fn score_reflection_pair(
    client_text: &str,
    reflection_text: &str,
    embedder: &dyn Embedder,
    stops: &StopList,
) -> Result<ReflectionScore, MetricError> {
    let t_u = content_tokens(client_text, stops);
    let t_r = content_tokens(reflection_text, stops);
    if t_r.is_empty() {
        return Err(MetricError::NoContentTokens);
    }

    let mut batch: Vec<&str> = vec![client_text, reflection_text];
    batch.extend(t_u.iter().map(String::as_str));
    batch.extend(t_r.iter().map(String::as_str));
    let vectors = embedder.embed(&batch)?;

    let sim = (cosine(&vectors[0], &vectors[1])? + 1.0) / 2.0;

    let u_vecs = &vectors[2..2 + t_u.len()];
    let r_vecs = &vectors[2 + t_u.len()..];
    let mut informative = 0usize;
    for rv in r_vecs {
        let mut best = f64::NEG_INFINITY;
        for uv in u_vecs {
            best = best.max(cosine(rv, uv)?);
        }
        if u_vecs.is_empty() || best < INFO_COSINE_THRESHOLD {
            informative += 1;
        }
    }
    let info = informative as f64 / t_r.len() as f64;
    Ok(ReflectionScore { sim, info })
}

/// Mean of 0.4 * sim + 0.6 * info over scored pairs.
pub fn reflection_depth(scores: &[ReflectionScore]) -> Result<f64, MetricError> {
    if scores.is_empty() {
        return Err(MetricError::NoPairs);
    }
    let sum: f64 = scores.iter().map(|s| 0.4 * s.sim + 0.6 * s.info).sum();
    Ok(sum / scores.len() as f64)
}

/// Complex reflections over all classified reflections.
pub fn complex_reflection_ratio(classes: &[ReflectionClass]) -> Result<f64, MetricError> {
    if classes.is_empty() {
        return Err(MetricError::NoPairs);
    }
    let complex = classes.iter().filter(|c| c.is_complex()).count();
    Ok(complex as f64 / classes.len() as f64)
}

/// Open questions over all questions. Untyped questions stay in the
/// denominator only.
pub fn open_question_ratio(codes: &[TherapistCode]) -> Result<f64, MetricError> {
    let mut open = 0usize;
    let mut total = 0usize;
    for code in codes {
        if let TherapistCode::Question(kind) = code {
            total += 1;
            if *kind == Some(QuestionKind::Open) {
                open += 1;
            }
        }
    }
    if total == 0 {
        return Err(MetricError::NoQuestions);
    }
    Ok(open as f64 / total as f64)
}

/// Rule-based open/closed classification of question text.
///
/// A wh-word or an elaboration cue ("tell me", "describe", ...) anywhere in
/// the text makes the question open. Otherwise a leading auxiliary or modal
/// marks it closed. Unrecognized shapes fall back to closed, the
/// conservative choice since closed questions never help the open ratio.
pub fn classify_question(text: &str) -> QuestionKind {
    const WH_WORDS: [&str; 8] = ["what", "how", "why", "who", "whom", "whose", "which", "where"];
    const CUES: [&str; 5] =
        ["tell me", "describe", "walk me through", "say more", "share more"];
    let lower = text.to_lowercase();
    let has_wh = lower
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
        .any(|w| WH_WORDS.contains(&w));
    if has_wh || CUES.iter().any(|cue| lower.contains(cue)) {
        QuestionKind::Open
    } else {
        QuestionKind::Closed
    }
}

/// Whether text is plausibly a question at all: ends in a question mark or
/// opens with an interrogative word. Callers can warn when classifying text
/// that fails this check.
pub fn looks_like_question(text: &str) -> bool {
    const OPENERS: [&str; 26] = [
        "did", "do", "does", "is", "are", "was", "were", "can", "could", "have", "has", "had",
        "will", "would", "should", "shall", "may", "might", "what", "how", "why", "who", "whose",
        "which", "where", "tell",
    ];
    let trimmed = text.trim();
    if trimmed.ends_with('?') {
        return true;
    }
    let first = trimmed
        .split_whitespace()
        .next()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .unwrap_or_default();
    OPENERS.contains(&first.as_str())
}

/// Open-question ratio computed from question texts via classify_question.
pub fn open_question_ratio_texts(questions: &[&str]) -> Result<f64, MetricError> {
    if questions.is_empty() {
        return Err(MetricError::NoQuestions);
    }
    let open = questions
        .iter()
        .filter(|q| classify_question(q) == QuestionKind::Open)
        .count();
    Ok(open as f64 / questions.len() as f64)
}

/// Reflections over questions; undefined with zero questions.
pub fn reflection_question_ratio(categories: &[TherapistCategory]) -> Result<f64, MetricError> {
    if categories.is_empty() {
        return Err(MetricError::NoCodes);
    }
    let reflections = categories
        .iter()
        .filter(|&&c| c == TherapistCategory::Reflection)
        .count();
    let questions = categories
        .iter()
        .filter(|&&c| c == TherapistCategory::Question)
        .count();
    if questions == 0 {
        return Err(MetricError::ZeroQuestions);
    }
    Ok(reflections as f64 / questions as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::StubEmbedder;

    fn cats(spec: &[(TherapistCategory, usize)]) -> Vec<TherapistCategory> {
        spec.iter()
            .flat_map(|&(c, n)| std::iter::repeat(c).take(n))
            .collect()
    }

    #[test]
    fn code_entropy_matches_worked_counts() {
        // Counts 6/3/1/0 over ten codes -> 0.817.
        let categories = cats(&[
            (TherapistCategory::Reflection, 6),
            (TherapistCategory::Question, 3),
            (TherapistCategory::Input, 1),
        ]);
        let h = code_entropy(&categories).unwrap();
        assert!((h - 0.817).abs() < 1e-3, "got {h}");
    }

    #[test]
    fn code_entropy_edge_cases() {
        assert_eq!(code_entropy(&[]), Err(MetricError::NoCodes));
        assert_eq!(
            code_entropy(&cats(&[(TherapistCategory::Question, 7)])).unwrap(),
            0.0
        );
        // All four categories equal -> 1.
        let h = code_entropy(&cats(&[
            (TherapistCategory::Reflection, 2),
            (TherapistCategory::Question, 2),
            (TherapistCategory::Input, 2),
            (TherapistCategory::Other, 2),
        ]))
        .unwrap();
        assert!((h - 1.0).abs() < 1e-12);
    }

    #[test]
    fn adherence_matches_worked_distribution() {
        let a = adherence_of_distribution(&[0.6, 0.3, 0.1, 0.0]).unwrap();
        assert!((a - 0.909).abs() < 2e-3, "got {a}");
    }

    #[test]
    fn adherence_peaks_at_the_ideal() {
        let at_ideal = adherence_of_distribution(&IDEAL_DISTRIBUTION).unwrap();
        assert!(at_ideal > 0.9999);
        let off = adherence_of_distribution(&[0.25, 0.25, 0.25, 0.25]).unwrap();
        assert!(off < at_ideal);
    }

    #[test]
    fn classification_cascade_and_boundaries() {
        let class = |sim, info| classify_reflection(ReflectionScore { sim, info });
        assert_eq!(class(0.95, 0.1), ReflectionClass::Repeat);
        assert_eq!(class(0.9, 0.1), ReflectionClass::Rephrase); // sim not > 0.9
        assert_eq!(class(0.8, 0.3), ReflectionClass::Rephrase);
        assert_eq!(class(0.8, 0.35), ReflectionClass::Paraphrase); // info not < 0.35
        assert_eq!(class(0.6, 0.5), ReflectionClass::Paraphrase);
        assert_eq!(class(0.5, 0.5), ReflectionClass::Summarize); // sim not > 0.5
        assert_eq!(class(0.95, 0.7), ReflectionClass::Summarize);
        assert!(ReflectionClass::Paraphrase.is_complex());
        assert!(!ReflectionClass::Rephrase.is_complex());
    }

    #[test]
    fn worked_reflection_pair_scores_half_info() {
        let mut embedder = StubEmbedder::new();
        embedder.add_override("tired", "exhausted", 0.9).unwrap();
        let score = score_reflection_pair(
            "I feel so tired.",
            "It sounds like you are exhausted.",
            &embedder,
            &StopList::builtin(),
        )
        .unwrap();
        assert!((score.info - 0.5).abs() < 1e-12);
    }

    #[test]
    fn depth_matches_worked_pair() {
        let d = reflection_depth(&[ReflectionScore { sim: 0.70, info: 0.5 }]).unwrap();
        assert!((d - 0.58).abs() < 1e-12);
        assert_eq!(reflection_depth(&[]), Err(MetricError::NoPairs));
    }

    #[test]
    fn pair_scoring_edge_cases() {
        let embedder = StubEmbedder::new();
        let stops = StopList::builtin();
        // Reflection of pure stopwords has nothing to score.
        assert_eq!(
            score_reflection_pair("I feel tired.", "You are.", &embedder, &stops),
            Err(MetricError::NoContentTokens)
        );
        // Clientless content: everything the reflection says is new.
        let s = score_reflection_pair("I am.", "You keep busy.", &embedder, &stops).unwrap();
        assert!((s.info - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ratios_match_worked_counts() {
        let complex = complex_reflection_ratio(&[
            ReflectionClass::Repeat,
            ReflectionClass::Paraphrase,
        ])
        .unwrap();
        assert!((complex - 0.5).abs() < 1e-12);

        let codes = [
            TherapistCode::Question(Some(QuestionKind::Open)),
            TherapistCode::Question(Some(QuestionKind::Closed)),
            TherapistCode::Question(None),
            TherapistCode::Reflection(None),
        ];
        let q = open_question_ratio(&codes).unwrap();
        assert!((q - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(
            open_question_ratio(&[TherapistCode::Other]),
            Err(MetricError::NoQuestions)
        );

        let categories = cats(&[
            (TherapistCategory::Reflection, 12),
            (TherapistCategory::Question, 4),
            (TherapistCategory::Input, 2),
        ]);
        let rq = reflection_question_ratio(&categories).unwrap();
        assert_eq!(rq, 3.0);
        assert_eq!(
            reflection_question_ratio(&cats(&[(TherapistCategory::Reflection, 3)])),
            Err(MetricError::ZeroQuestions)
        );
    }

    #[test]
    fn thresholds_are_strict() {
        assert!(!(0.5 > COMPLEX_RATIO_THRESHOLD));
        assert!(!(7.0 / 10.0 > OPEN_QUESTION_THRESHOLD));
        assert!(0.71 > OPEN_QUESTION_THRESHOLD);
        assert!(!(2.0 > RQ_RATIO_THRESHOLD));
    }

    #[test]
    fn question_classifier_worked_examples() {
        let open = "What about your thoughts on the materials that you mentioned last time? \
                    Could you tell me more about it?";
        assert_eq!(classify_question(open), QuestionKind::Open);
        assert_eq!(classify_question("Did you sleep well?"), QuestionKind::Closed);
        assert_eq!(
            classify_question("Did you take medicine last week on time?"),
            QuestionKind::Closed
        );
        // One open out of three: 0.333.
        let questions = [
            open,
            "Did you sleep well?",
            "Did you take medicine last week on time?",
        ];
        let ratio = open_question_ratio_texts(&questions).unwrap();
        assert!((ratio - 1.0 / 3.0).abs() < 1e-3);
        assert_eq!(open_question_ratio_texts(&[]), Err(MetricError::NoQuestions));
    }

    #[test]
    fn question_classifier_cues_and_fallback() {
        assert_eq!(classify_question("Tell me about your week."), QuestionKind::Open);
        assert_eq!(classify_question("How are you feeling?"), QuestionKind::Open);
        // Unrecognized shape falls back to closed.
        assert_eq!(classify_question("You slept well."), QuestionKind::Closed);
        assert!(looks_like_question("Did you rest"));
        assert!(looks_like_question("anything else?"));
        assert!(!looks_like_question("You slept well."));
    }
}
