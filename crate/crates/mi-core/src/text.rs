//! Tokenization, stopword filtering, and a light plural stemmer.
//!
//! Content-token extraction feeds the reflection metrics: lowercase, split on
//! whitespace, strip non-alphanumeric edges, drop stopwords, then strip
//! plural/third-person `-s` endings so `sounds` and `sound` compare equal.
//! The stemmer deliberately leaves `-ed`/`-ing` forms alone.

/// Built-in stopword list, english function words.
pub const DEFAULT_STOP_WORDS: &[&str] = &[
    "a", "about", "all", "am", "an", "and", "any", "are", "as", "at", "be", "been", "being",
    "but", "by", "can", "could", "did", "do", "does", "doing", "for", "from", "had", "has",
    "have", "having", "he", "her", "here", "hers", "him", "his", "how", "i", "if", "in",
    "into", "is", "it", "its", "just", "like", "me", "my", "no", "not", "of", "on", "or",
    "our", "out", "she", "should", "so", "some", "than", "that", "the", "their", "them",
    "then", "there", "these", "they", "this", "to", "too", "up", "us", "very", "was", "we",
    "were", "what", "when", "where", "which", "who", "why", "will", "with", "would", "you",
    "your",
];

/// A set of stopwords, lowercase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopList {
    words: Vec<String>,
}

impl StopList {
    /// The built-in list.
    pub fn builtin() -> Self {
        StopList { words: DEFAULT_STOP_WORDS.iter().map(|w| w.to_string()).collect() }
    }

    /// Parse one word per line; blank lines and `#` comments are skipped.
    pub fn from_text(text: &str) -> Self {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| l.to_lowercase())
            .collect();
        StopList { words }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.iter().any(|w| w == word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

impl Default for StopList {
    fn default() -> Self {
        Self::builtin()
    }
}

/// Lowercase, split on whitespace, trim non-alphanumeric edges, drop empties.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|raw| {
            raw.trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase()
        })
        .filter(|t| !t.is_empty())
        .collect()
}

/// Strip plural / third-person `-s` endings: `ies` -> `y` (when long enough),
/// keep `-ss`/`-us`/`-is`, otherwise drop a trailing `s` from words longer
/// than three characters.
pub fn stem(token: &str) -> String {
    if token.len() > 4 {
        if let Some(base) = token.strip_suffix("ies") {
            return format!("{base}y");
        }
    }
    if token.ends_with("ss") || token.ends_with("us") || token.ends_with("is") {
        return token.to_string();
    }
    if token.len() > 3 {
        if let Some(base) = token.strip_suffix('s') {
            return base.to_string();
        }
    }
    token.to_string()
}

/// Unique stemmed content tokens in first-occurrence order. Stopwords are
/// dropped both before and after stemming.
pub fn content_tokens(text: &str, stops: &StopList) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for token in tokenize(text) {
        if stops.contains(&token) {
            continue;
        }
        let stemmed = stem(&token);
        if stops.contains(&stemmed) || out.contains(&stemmed) {
            continue;
        }
        out.push(stemmed);
    }
    out
}
