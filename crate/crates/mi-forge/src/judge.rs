//! Rubric-based session scoring by a judge model: six 5-point dimensions in
//! one structured call, plus aggregation into per-group dimension means.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::backend::{Backend, BackendError, CallMeta, ChatRequest};
use mi_core::dialogue::SessionRecord;

/// Verbatim rubric text shown to every judge (and to human annotators).
pub const RUBRICS: &str = include_str!("../data/rubrics.txt");

pub const DIMENSIONS: [&str; 6] =
    ["coherence", "depth", "progress", "naturalness", "empathy", "adherence"];

#[derive(Debug, thiserror::Error)]
pub enum JudgeError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("session {0} has no utterances")]
    EmptySession(String),
    #[error("no scores to aggregate")]
    EmptyAggregate,
}

/// One judge verdict over a session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RubricScore {
    pub session_id: String,
    pub judge_model: String,
    pub coherence: u8,
    pub depth: u8,
    pub progress: u8,
    pub naturalness: u8,
    pub empathy: u8,
    pub adherence: u8,
}

impl RubricScore {
    pub fn dimension(&self, name: &str) -> Option<u8> {
        match name {
            "coherence" => Some(self.coherence),
            "depth" => Some(self.depth),
            "progress" => Some(self.progress),
            "naturalness" => Some(self.naturalness),
            "empathy" => Some(self.empathy),
            "adherence" => Some(self.adherence),
            _ => None,
        }
    }
}

#[derive(Debug, Deserialize)]
struct JudgeReply {
    coherence: i64,
    depth: i64,
    progress: i64,
    naturalness: i64,
    empathy: i64,
    adherence: i64,
    #[allow(dead_code)]
    #[serde(default)]
    rationale: String,
}

impl JudgeReply {
    fn check(&self) -> Result<(), String> {
        let all = [
            ("coherence", self.coherence),
            ("depth", self.depth),
            ("progress", self.progress),
            ("naturalness", self.naturalness),
            ("empathy", self.empathy),
            ("adherence", self.adherence),
        ];
        for (name, v) in all {
            if !(1..=5).contains(&v) {
                return Err(format!("{name} score {v} outside 1..=5"));
            }
        }
        Ok(())
    }
}

/// Transcript lines for the judge; `include_codes` appends each utterance's
/// behavioral code in parentheses.
pub fn render_transcript(session: &SessionRecord, include_codes: bool) -> String {
    session
        .utterances
        .iter()
        .map(|u| {
            let label = match u.speaker {
                mi_core::code::Speaker::Client => "Client",
                mi_core::code::Speaker::Therapist => "Therapist",
            };
            if include_codes {
                format!("{label} ({}): {}", u.code, u.text)
            } else {
                format!("{label}: {}", u.text)
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn judge_request(session: &SessionRecord, include_codes: bool, backend: &Backend) -> ChatRequest {
    let transcript = render_transcript(session, include_codes);
    let system = "You are an impartial evaluator of counseling conversations. \
                  Score the session against the rubric exactly as written."
        .to_string();
    let user = format!(
        "Rubric:\n{RUBRICS}\n\
         Conversation:\n{transcript}\n\
         Task: Score the conversation on all six criteria.\n\
         Output: Return only valid JSON: {{\"coherence\": <1-5>, \"depth\": <1-5>, \
         \"progress\": <1-5>, \"naturalness\": <1-5>, \"empathy\": <1-5>, \
         \"adherence\": <1-5>, \"rationale\": \"...\"}}"
    );
    let mut req = ChatRequest::new(system, user, backend.params());
    // Deterministic judging where the provider honors it.
    req.temperature = 0.0;
    req
}

/// Score one session. Out-of-range or malformed replies get repair rounds;
/// persistent failure surfaces as an error.
pub fn judge_session(
    session: &SessionRecord,
    backend: &Backend,
    include_codes: bool,
) -> Result<RubricScore, JudgeError> {
    if session.utterances.is_empty() {
        return Err(JudgeError::EmptySession(session.session_id.clone()));
    }
    let req = judge_request(session, include_codes, backend);
    let meta = CallMeta::new(session.session_id.as_str(), "judge", session.turns);
    let reply: JudgeReply = backend.chat_structured(&meta, &req, JudgeReply::check)?;
    Ok(RubricScore {
        session_id: session.session_id.clone(),
        judge_model: backend.provider_name().to_string(),
        coherence: reply.coherence as u8,
        depth: reply.depth as u8,
        progress: reply.progress as u8,
        naturalness: reply.naturalness as u8,
        empathy: reply.empathy as u8,
        adherence: reply.adherence as u8,
    })
}

/// Per-dimension means plus the overall row: the mean of the six dimension
/// means, not the mean over all raw scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionMeans {
    pub n: usize,
    pub coherence: f64,
    pub depth: f64,
    pub progress: f64,
    pub naturalness: f64,
    pub empathy: f64,
    pub adherence: f64,
    pub overall: f64,
}

impl DimensionMeans {
    pub fn dimension(&self, name: &str) -> Option<f64> {
        match name {
            "coherence" => Some(self.coherence),
            "depth" => Some(self.depth),
            "progress" => Some(self.progress),
            "naturalness" => Some(self.naturalness),
            "empathy" => Some(self.empathy),
            "adherence" => Some(self.adherence),
            _ => None,
        }
    }
}

/// Overall row construction from six dimension means.
pub fn overall_mean(means: &[f64; 6]) -> f64 {
    means.iter().sum::<f64>() / 6.0
}

/// Mean of each dimension over a group of verdicts.
pub fn aggregate_scores(scores: &[RubricScore]) -> Result<DimensionMeans, JudgeError> {
    if scores.is_empty() {
        return Err(JudgeError::EmptyAggregate);
    }
    let n = scores.len() as f64;
    let mean_of = |f: fn(&RubricScore) -> u8| scores.iter().map(|s| f(s) as f64).sum::<f64>() / n;
    let means = [
        mean_of(|s| s.coherence),
        mean_of(|s| s.depth),
        mean_of(|s| s.progress),
        mean_of(|s| s.naturalness),
        mean_of(|s| s.empathy),
        mean_of(|s| s.adherence),
    ];
    Ok(DimensionMeans {
        n: scores.len(),
        coherence: means[0],
        depth: means[1],
        progress: means[2],
        naturalness: means[3],
        empathy: means[4],
        adherence: means[5],
        overall: overall_mean(&means),
    })
}

/// Group verdicts by an arbitrary key (model name, ablation label) and
/// aggregate each group.
pub fn aggregate_by(
    scores: &[RubricScore],
    key: impl Fn(&RubricScore) -> String,
) -> BTreeMap<String, DimensionMeans> {
    let mut groups: BTreeMap<String, Vec<RubricScore>> = BTreeMap::new();
    for s in scores {
        groups.entry(key(s)).or_default().push(s.clone());
    }
    groups
        .into_iter()
        .map(|(k, v)| {
            let means = aggregate_scores(&v).expect("groups are nonempty by construction");
            (k, means)
        })
        .collect()
}
