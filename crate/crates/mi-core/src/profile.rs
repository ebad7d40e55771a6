//! Questionnaire instrument, client profiles, and situational stories.
//!
//! A profile is a filled-in 23-item screening questionnaire spanning 13
//! symptom domains: one severity score plus one first-person explanation per
//! item, plus demographics. The primary symptom is the domain whose highest
//! item score is largest, ties going to the domain that appears first in the
//! instrument.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;

/// Response scale labels, index = raw score 0..=4.
pub const SCALE_LABELS: [&str; 5] = [
    "Not at all",
    "Rarely",
    "Several days",
    "More than half the days",
    "Almost always",
];

/// Maximum raw item score.
pub const MAX_SCORE: u8 = 4;

/// Hard word cap on situational stories (soft target is ~200).
pub const STORY_WORD_CAP: usize = 240;

/// One questionnaire item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstrumentItem {
    pub id: String,
    pub text: String,
    pub domain: String,
}

/// The screening questionnaire: 23 ordered items over 13 symptom domains,
/// plus the five scale labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionnaireInstrument {
    pub items: Vec<InstrumentItem>,
    pub scale_labels: Vec<String>,
}

impl QuestionnaireInstrument {
    /// Built-in instrument. Item wording is generic stand-in text; the
    /// licensed clinical measure can be loaded from a file instead.
    pub fn builtin() -> Self {
        let items = [
            ("depression", "Felt little interest or pleasure in doing things"),
            ("depression", "Felt down, low, or hopeless"),
            ("anger", "Felt more irritated or angry than usual"),
            ("mania", "Slept less than usual but still had lots of energy"),
            ("mania", "Started many more projects or took more risks than usual"),
            ("anxiety", "Felt nervous, anxious, or on edge"),
            ("anxiety", "Felt panic or was frightened"),
            ("anxiety", "Avoided situations that make you anxious"),
            ("somatic symptoms", "Had unexplained aches and pains"),
            ("somatic symptoms", "Felt that your illnesses were not taken seriously enough"),
            ("suicidal ideation", "Had thoughts of hurting yourself"),
            ("psychosis", "Heard things other people could not hear"),
            ("psychosis", "Felt that someone could hear your thoughts or that you could hear another person's thoughts"),
            ("sleep problems", "Had problems with sleep that affected your sleep quality"),
            ("memory", "Had problems with memory or with finding your way around familiar places"),
            ("repetitive thoughts and behaviors", "Had unpleasant thoughts, urges, or images that repeatedly entered your mind"),
            ("repetitive thoughts and behaviors", "Felt driven to perform certain behaviors or mental acts over and over"),
            ("dissociation", "Felt detached or distant from yourself, your body, your surroundings, or your memories"),
            ("personality functioning", "Did not know who you really are or what you want out of life"),
            ("personality functioning", "Did not feel close to other people or did not enjoy your relationships with them"),
            ("substance use", "Drank at least four drinks of any kind of alcohol in a single day"),
            ("substance use", "Smoked any cigarettes, a cigar, or pipe, or used snuff or chewing tobacco"),
            ("substance use", "Used any medicines on your own without a doctor's prescription, or in greater amounts or longer than prescribed"),
        ];
        QuestionnaireInstrument {
            items: items
                .into_iter()
                .enumerate()
                .map(|(i, (domain, text))| InstrumentItem {
                    id: format!("item-{:02}", i + 1),
                    text: text.to_string(),
                    domain: domain.to_string(),
                })
                .collect(),
            scale_labels: SCALE_LABELS.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Check shape: 23 items, 13 distinct domains, 5 scale labels, no empty
    /// fields.
    pub fn validate(&self) -> Result<(), CoreError> {
        if self.items.len() != 23 {
            return Err(CoreError::InvalidInstrument(format!(
                "expected 23 items, got {}",
                self.items.len()
            )));
        }
        if self.scale_labels.len() != 5 {
            return Err(CoreError::InvalidInstrument(format!(
                "expected 5 scale labels, got {}",
                self.scale_labels.len()
            )));
        }
        for (idx, item) in self.items.iter().enumerate() {
            if item.domain.trim().is_empty() || item.text.trim().is_empty() {
                return Err(CoreError::InvalidInstrument(format!(
                    "item {idx} has an empty domain or text"
                )));
            }
        }
        let domains = self.domains_in_order();
        if domains.len() != 13 {
            return Err(CoreError::InvalidInstrument(format!(
                "expected 13 distinct domains, got {}",
                domains.len()
            )));
        }
        Ok(())
    }

    /// Domains in first-occurrence order.
    pub fn domains_in_order(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for item in &self.items {
            if !seen.contains(&item.domain.as_str()) {
                seen.push(item.domain.as_str());
            }
        }
        seen
    }

    /// Highest possible total severity.
    pub fn max_total(&self) -> u32 {
        self.items.len() as u32 * MAX_SCORE as u32
    }
}

/// A client profile: scores and first-person explanations aligned with the
/// instrument's item order, plus demographics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientProfile {
    pub profile_id: String,
    /// Demographic label, e.g. "Adult".
    pub identity: String,
    pub age: u8,
    /// Item scores, each 0..=4.
    pub scores: Vec<u8>,
    /// One short first-person rationale per item.
    pub explanations: Vec<String>,
}

impl ClientProfile {
    /// Assemble a profile, checking every invariant against the instrument.
    pub fn new(
        instrument: &QuestionnaireInstrument,
        profile_id: impl Into<String>,
        identity: impl Into<String>,
        age: u8,
        scores: Vec<u8>,
        explanations: Vec<String>,
    ) -> Result<Self, CoreError> {
        instrument.validate()?;
        if scores.len() != instrument.items.len() {
            return Err(CoreError::InvalidProfile(format!(
                "expected {} scores, got {}",
                instrument.items.len(),
                scores.len()
            )));
        }
        if explanations.len() != instrument.items.len() {
            return Err(CoreError::InvalidProfile(format!(
                "expected {} explanations, got {}",
                instrument.items.len(),
                explanations.len()
            )));
        }
        if let Some(bad) = scores.iter().find(|&&s| s > MAX_SCORE) {
            return Err(CoreError::InvalidProfile(format!(
                "score {bad} is outside 0..={MAX_SCORE}"
            )));
        }
        if explanations.iter().any(|e| e.trim().is_empty()) {
            return Err(CoreError::InvalidProfile("empty explanation".to_string()));
        }
        if !(18..=65).contains(&age) {
            return Err(CoreError::InvalidProfile(format!("age {age} is outside 18..=65")));
        }
        Ok(ClientProfile {
            profile_id: profile_id.into(),
            identity: identity.into(),
            age,
            scores,
            explanations,
        })
    }

    /// Per-domain maximum item score.
    pub fn domain_scores(&self, instrument: &QuestionnaireInstrument) -> BTreeMap<String, u8> {
        let mut out: BTreeMap<String, u8> = BTreeMap::new();
        for (item, &score) in instrument.items.iter().zip(&self.scores) {
            let entry = out.entry(item.domain.clone()).or_insert(0);
            *entry = (*entry).max(score);
        }
        out
    }

    /// Domain with the highest item score; ties break to the domain that
    /// occurs first in the instrument.
    pub fn primary_symptom(&self, instrument: &QuestionnaireInstrument) -> String {
        let scores = self.domain_scores(instrument);
        let domains = instrument.domains_in_order();
        let best = domains.iter().map(|&d| scores[d]).max().unwrap_or(0);
        domains
            .into_iter()
            .find(|&d| scores[d] == best)
            .unwrap_or_default()
            .to_string()
    }

    /// Sum of the 23 item scores, in [0, 92].
    pub fn total_severity(&self) -> u32 {
        self.scores.iter().map(|&s| s as u32).sum()
    }

    /// Lines like `Felt down, low, or hopeless: Several days`, one per item,
    /// for prompt construction.
    pub fn item_lines(&self, instrument: &QuestionnaireInstrument) -> Vec<String> {
        instrument
            .items
            .iter()
            .zip(&self.scores)
            .map(|(item, &s)| format!("{}: {}", item.text, SCALE_LABELS[s as usize]))
            .collect()
    }
}

/// Number of words in a story, by whitespace splitting.
pub fn story_word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Cut a story at a sentence boundary so it fits the word cap. Falls back to
/// a hard word cut when the first sentence alone is over the cap.
pub fn truncate_story(text: &str, cap: usize) -> String {
    if story_word_count(text) <= cap {
        return text.trim().to_string();
    }
    let mut kept = String::new();
    let mut kept_words = 0usize;
    let mut sentence = String::new();
    for ch in text.chars() {
        sentence.push(ch);
        if matches!(ch, '.' | '!' | '?') {
            let words = story_word_count(&sentence);
            if kept_words + words > cap {
                break;
            }
            kept_words += words;
            kept.push_str(&sentence);
            sentence.clear();
        }
    }
    let kept = kept.trim();
    if kept.is_empty() {
        return text.split_whitespace().take(cap).collect::<Vec<_>>().join(" ");
    }
    kept.to_string()
}

/// A grounding story for one profile.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SituationalStory {
    pub profile_id: String,
    pub text: String,
    pub word_count: usize,
    pub primary_symptom: String,
}

impl SituationalStory {
    /// Wrap story text, enforcing the word cap.
    pub fn new(
        profile_id: impl Into<String>,
        text: impl Into<String>,
        primary_symptom: impl Into<String>,
    ) -> Result<Self, CoreError> {
        let text = text.into().trim().to_string();
        if text.is_empty() {
            return Err(CoreError::EmptyText);
        }
        let word_count = story_word_count(&text);
        if word_count > STORY_WORD_CAP {
            return Err(CoreError::StoryTooLong { words: word_count, cap: STORY_WORD_CAP });
        }
        Ok(SituationalStory {
            profile_id: profile_id.into(),
            text,
            word_count,
            primary_symptom: primary_symptom.into(),
        })
    }
}
