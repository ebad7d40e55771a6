//! Questionnaire-based profiling and situational story generation.

use crate::backend::{Backend, BackendError, CallMeta, ChatRequest};
use crate::prompts;
use mi_core::error::CoreError;
use mi_core::profile::{
    story_word_count, truncate_story, ClientProfile, QuestionnaireInstrument, SituationalStory,
    STORY_WORD_CAP,
};

use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ProfilerError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Core(#[from] CoreError),
}

/// Demographics supplied to the profiling prompt.
#[derive(Debug, Clone)]
pub struct Demographics {
    pub identity: String,
    pub age: u8,
}

impl Demographics {
    pub fn adult(age: u8) -> Self {
        Demographics { identity: "Adult".to_string(), age }
    }
}

#[derive(Deserialize)]
struct QuestionnaireReply {
    scores: Vec<i64>,
    explanations: Vec<String>,
}

/// Score all 23 items in character, enforcing shape and range via structured
/// output with repair rounds.
pub fn fill_questionnaire(
    instrument: &QuestionnaireInstrument,
    demographics: &Demographics,
    profile_id: &str,
    backend: &Backend,
) -> Result<ClientProfile, ProfilerError> {
    instrument.validate()?;
    let client_info = format!(
        "Identity: {}; Age: {}",
        demographics.identity, demographics.age
    );
    let prompt = prompts::profiling(&client_info, instrument);
    let req = ChatRequest::new(prompt.system, prompt.user, backend.params());
    let meta = CallMeta::new(profile_id, "profile", 0);
    let n = instrument.items.len();
    let reply: QuestionnaireReply = backend.chat_structured(&meta, &req, |r: &QuestionnaireReply| {
        if r.scores.len() != n {
            return Err(format!("expected {n} scores, got {}", r.scores.len()));
        }
        if r.explanations.len() != n {
            return Err(format!("expected {n} explanations, got {}", r.explanations.len()));
        }
        if let Some(bad) = r.scores.iter().find(|&&s| !(0..=4).contains(&s)) {
            return Err(format!("score {bad} outside 0..=4"));
        }
        if r.explanations.iter().any(|e| e.trim().is_empty()) {
            return Err("empty explanation".to_string());
        }
        Ok(())
    })?;
    let scores: Vec<u8> = reply.scores.iter().map(|&s| s as u8).collect();
    Ok(ClientProfile::new(
        instrument,
        profile_id,
        demographics.identity.clone(),
        demographics.age,
        scores,
        reply.explanations,
    )?)
}

/// Expand a profile into a grounded first-person story. Over-cap replies get
/// one regeneration, then a sentence-boundary truncation.
pub fn generate_story(
    profile: &ClientProfile,
    instrument: &QuestionnaireInstrument,
    backend: &Backend,
) -> Result<SituationalStory, ProfilerError> {
    let prompt = prompts::story(profile, instrument);
    let meta = CallMeta::new(profile.profile_id.clone(), "story", 0);
    let req = ChatRequest::new(prompt.system.clone(), prompt.user.clone(), backend.params());
    let mut text = backend.chat(&meta, &req)?;
    if story_word_count(&text) > STORY_WORD_CAP {
        let retry = ChatRequest::new(
            prompt.system,
            format!("{}\n{}", prompt.user, prompts::STORY_RETRY_INSTRUCTION),
            backend.params(),
        );
        text = backend.chat(&meta, &retry)?;
        if story_word_count(&text) > STORY_WORD_CAP {
            backend.note_warning(
                &meta,
                format!("story still {} words after retry; truncating", story_word_count(&text)),
            );
            text = truncate_story(&text, STORY_WORD_CAP);
        }
    }
    Ok(SituationalStory::new(
        profile.profile_id.clone(),
        text,
        profile.primary_symptom(instrument),
    )?)
}
