//! Dialogue state and session records.
//!
//! A session is a strictly alternating client/therapist transcript opened by
//! a therapist greeting. The turn counter counts completed exchanges: it
//! starts at 0 after the greeting and increments each time a therapist
//! utterance answers a client utterance.

use serde::{Deserialize, Serialize};

use crate::code::{ClientCode, MiCode, Speaker, TherapistCategory, TherapistCode};
use crate::error::CoreError;

/// One utterance with its behavioral code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub speaker: Speaker,
    pub text: String,
    pub code: MiCode,
    /// Exchange index this utterance belongs to. The greeting is 0; the
    /// first client/therapist exchange is 1.
    pub turn_index: usize,
}

impl Utterance {
    pub fn new(
        speaker: Speaker,
        text: impl Into<String>,
        code: MiCode,
        turn_index: usize,
    ) -> Result<Self, CoreError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(CoreError::EmptyText);
        }
        if code.side() != speaker {
            return Err(CoreError::SideMismatch {
                speaker: speaker.to_string(),
                code_side: code.side().to_string(),
            });
        }
        Ok(Utterance { speaker, text, code, turn_index })
    }
}

/// Why a session stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MonitorComplete,
    TurnCapReached,
}

/// Mutable in-flight dialogue.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DialogueState {
    pub utterances: Vec<Utterance>,
    /// Codes in utterance order; always utterances.len() long.
    pub code_trajectory: Vec<MiCode>,
    /// Completed exchanges so far.
    pub turn: usize,
    pub complete: bool,
}

impl DialogueState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Who speaks next. The therapist opens; afterwards client and therapist
    /// alternate.
    pub fn expected_speaker(&self) -> Speaker {
        match self.utterances.last() {
            None => Speaker::Therapist,
            Some(u) => match u.speaker {
                Speaker::Therapist => Speaker::Client,
                Speaker::Client => Speaker::Therapist,
            },
        }
    }

    /// Exchange index the next utterance must carry.
    pub fn next_turn_index(&self) -> usize {
        match self.utterances.last() {
            None => 0,
            Some(u) => match u.speaker {
                // A client utterance opens the next exchange.
                Speaker::Therapist => u.turn_index + 1,
                // The therapist reply closes the current one.
                Speaker::Client => u.turn_index,
            },
        }
    }

    /// Append an utterance, enforcing alternation and exchange indexing.
    pub fn push(&mut self, utterance: Utterance) -> Result<(), CoreError> {
        let expected = self.expected_speaker();
        if utterance.speaker != expected {
            return Err(CoreError::SideMismatch {
                speaker: expected.to_string(),
                code_side: utterance.speaker.to_string(),
            });
        }
        let want = self.next_turn_index();
        if utterance.turn_index != want {
            return Err(CoreError::OutOfOrderTurn { expected: want, got: utterance.turn_index });
        }
        let closes_exchange = utterance.speaker == Speaker::Therapist && utterance.turn_index > 0;
        self.code_trajectory.push(utterance.code.clone());
        self.utterances.push(utterance);
        if closes_exchange {
            self.turn += 1;
        }
        Ok(())
    }

    pub fn mark_complete(&mut self) {
        self.complete = true;
    }

    pub fn last_client(&self) -> Option<&Utterance> {
        self.utterances.iter().rev().find(|u| u.speaker == Speaker::Client)
    }

    /// Utterances from the last k exchanges, greeting excluded. A pending
    /// client utterance counts as the current exchange.
    pub fn recent_window(&self, k: usize) -> Vec<&Utterance> {
        if k == 0 {
            return Vec::new();
        }
        let current = self.utterances.last().map_or(0, |u| u.turn_index);
        if current == 0 {
            return Vec::new();
        }
        let from_turn = current.saturating_sub(k - 1).max(1);
        self.utterances.iter().filter(|u| u.turn_index >= from_turn).collect()
    }
}

/// What the strategy selector asked for versus what it saw, one entry per
/// selector call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorStep {
    pub turn: usize,
    /// Code the client agent was instructed to express this exchange.
    pub target_client_code: ClientCode,
    /// Code the selector assigned to the client utterance it just read.
    pub classified_client_code: ClientCode,
    /// Therapist category the selector picked.
    pub selected_category: String,
}

/// Which grounding inputs a session was generated with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationFlags {
    pub story_used: bool,
    pub mi_code_used: bool,
}

impl Default for AblationFlags {
    fn default() -> Self {
        AblationFlags { story_used: true, mi_code_used: true }
    }
}

/// Sampling and session-shape parameters recorded with every session.
/// Fields default individually so partial config sections parse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionParams {
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_top_p")]
    pub top_p: f64,
    #[serde(default = "default_t_min")]
    pub t_min: usize,
    #[serde(default = "default_t_max")]
    pub t_max: usize,
    #[serde(default = "default_context_window_k")]
    pub context_window_k: usize,
}

fn default_temperature() -> f64 {
    0.7
}

fn default_top_p() -> f64 {
    0.9
}

fn default_t_min() -> usize {
    10
}

fn default_t_max() -> usize {
    40
}

fn default_context_window_k() -> usize {
    5
}

impl Default for SessionParams {
    fn default() -> Self {
        SessionParams {
            temperature: default_temperature(),
            top_p: default_top_p(),
            t_min: default_t_min(),
            t_max: default_t_max(),
            context_window_k: default_context_window_k(),
        }
    }
}

/// A finished session as persisted to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub profile_ref: String,
    pub story_ref: Option<String>,
    pub model_name: String,
    pub seed: u64,
    pub ablation: AblationFlags,
    pub generation_params: SessionParams,
    pub utterances: Vec<Utterance>,
    /// Completed exchanges.
    pub turns: usize,
    pub stop_reason: StopReason,
    /// Backend chat calls spent producing this session.
    pub llm_call_count: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub selector_trace: Vec<SelectorStep>,
}

impl SessionRecord {
    /// Therapist top-level categories in utterance order.
    pub fn therapist_categories(&self) -> Vec<TherapistCategory> {
        self.utterances
            .iter()
            .filter_map(|u| u.code.project_category())
            .collect()
    }

    /// Therapist codes in utterance order.
    pub fn therapist_codes(&self) -> Vec<TherapistCode> {
        self.utterances
            .iter()
            .filter_map(|u| match &u.code {
                MiCode::Therapist(c) => Some(c.clone()),
                MiCode::Client(_) => None,
            })
            .collect()
    }

    /// Client codes in utterance order.
    pub fn client_codes(&self) -> Vec<ClientCode> {
        self.utterances
            .iter()
            .filter_map(|u| match &u.code {
                MiCode::Client(c) => Some(*c),
                MiCode::Therapist(_) => None,
            })
            .collect()
    }

    /// (client text, reflection text) pairs where a reflection-coded
    /// therapist utterance directly answers a client utterance.
    pub fn reflection_pairs(&self) -> Vec<(&str, &str)> {
        self.utterances
            .windows(2)
            .filter_map(|w| match (&w[0], &w[1]) {
                (a, b)
                    if a.speaker == Speaker::Client
                        && b.speaker == Speaker::Therapist
                        && matches!(b.code, MiCode::Therapist(TherapistCode::Reflection(_))) =>
                {
                    Some((a.text.as_str(), b.text.as_str()))
                }
                _ => None,
            })
            .collect()
    }

    /// Replay the transcript through DialogueState, checking alternation,
    /// exchange indexing, and the turn count.
    pub fn validate(&self) -> Result<(), CoreError> {
        let mut state = DialogueState::new();
        for u in &self.utterances {
            state.push(u.clone())?;
        }
        if state.turn != self.turns {
            return Err(CoreError::InvalidRecord(format!(
                "recorded {} turns but transcript has {}",
                self.turns, state.turn
            )));
        }
        if self.llm_call_count > 0 && (self.llm_call_count as usize) < self.utterances.len() {
            return Err(CoreError::InvalidRecord(format!(
                "{} llm calls cannot produce {} utterances",
                self.llm_call_count,
                self.utterances.len()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::{InputKind, QuestionKind, ReflectionKind};

    fn therapist(code: TherapistCode) -> MiCode {
        MiCode::Therapist(code)
    }

    fn client(code: ClientCode) -> MiCode {
        MiCode::Client(code)
    }

    fn scripted_state(exchanges: usize) -> DialogueState {
        let mut s = DialogueState::new();
        s.push(
            Utterance::new(
                Speaker::Therapist,
                "Hello, good to see you.",
                therapist(TherapistCode::Input(Some(InputKind::Affirmation))),
                0,
            )
            .unwrap(),
        )
        .unwrap();
        for t in 1..=exchanges {
            s.push(
                Utterance::new(
                    Speaker::Client,
                    format!("Client line {t}."),
                    client(ClientCode::Neutral),
                    t,
                )
                .unwrap(),
            )
            .unwrap();
            s.push(
                Utterance::new(
                    Speaker::Therapist,
                    format!("Therapist line {t}."),
                    therapist(TherapistCode::Reflection(Some(ReflectionKind::Simple))),
                    t,
                )
                .unwrap(),
            )
            .unwrap();
        }
        s
    }

    #[test]
    fn utterance_rejects_empty_text_and_side_mismatch() {
        assert!(matches!(
            Utterance::new(Speaker::Client, "  ", client(ClientCode::Neutral), 1),
            Err(CoreError::EmptyText)
        ));
        assert!(matches!(
            Utterance::new(Speaker::Client, "hi", therapist(TherapistCode::Other), 1),
            Err(CoreError::SideMismatch { .. })
        ));
    }

    #[test]
    fn turn_counts_completed_exchanges() {
        let s = scripted_state(3);
        assert_eq!(s.turn, 3);
        assert_eq!(s.utterances.len(), 7);
        assert_eq!(s.code_trajectory.len(), 7);
        assert_eq!(s.expected_speaker(), Speaker::Client);
        assert_eq!(s.next_turn_index(), 4);
    }

    #[test]
    fn greeting_does_not_advance_turn() {
        let mut s = DialogueState::new();
        s.push(
            Utterance::new(
                Speaker::Therapist,
                "Hello.",
                therapist(TherapistCode::Input(Some(InputKind::Affirmation))),
                0,
            )
            .unwrap(),
        )
        .unwrap();
        assert_eq!(s.turn, 0);
        assert_eq!(s.expected_speaker(), Speaker::Client);
        assert_eq!(s.next_turn_index(), 1);
    }

    #[test]
    fn push_rejects_wrong_speaker_and_wrong_index() {
        let mut s = DialogueState::new();
        let c = Utterance::new(Speaker::Client, "hi", client(ClientCode::Neutral), 1).unwrap();
        assert!(matches!(s.push(c), Err(CoreError::SideMismatch { .. })));

        let mut s = scripted_state(1);
        let wrong_index =
            Utterance::new(Speaker::Client, "next", client(ClientCode::Neutral), 5).unwrap();
        assert!(matches!(
            s.push(wrong_index),
            Err(CoreError::OutOfOrderTurn { expected: 2, got: 5 })
        ));
    }

    #[test]
    fn code_trajectory_mirrors_utterance_codes() {
        let s = scripted_state(2);
        for (u, c) in s.utterances.iter().zip(&s.code_trajectory) {
            assert_eq!(&u.code, c);
        }
    }

    #[test]
    fn recent_window_keeps_last_k_exchanges() {
        let s = scripted_state(8);
        let w = s.recent_window(5);
        // Exchanges 4..=8, two utterances each.
        assert_eq!(w.len(), 10);
        assert_eq!(w[0].turn_index, 4);
        assert!(w.iter().all(|u| u.turn_index >= 4));

        // Window bigger than history: everything but the greeting.
        let all = s.recent_window(100);
        assert_eq!(all.len(), 16);
        assert_eq!(all[0].turn_index, 1);

        assert!(s.recent_window(0).is_empty());
    }

    #[test]
    fn recent_window_counts_pending_client_utterance_as_current_exchange() {
        let mut s = scripted_state(6);
        s.push(
            Utterance::new(Speaker::Client, "pending", client(ClientCode::Change), 7).unwrap(),
        )
        .unwrap();
        let w = s.recent_window(2);
        // Exchange 6 (both sides) plus the pending client utterance of 7.
        assert_eq!(w.len(), 3);
        assert_eq!(w[0].turn_index, 6);
        assert_eq!(w.last().unwrap().text, "pending");
    }

    #[test]
    fn greeting_only_state_has_empty_window() {
        let mut s = DialogueState::new();
        s.push(
            Utterance::new(
                Speaker::Therapist,
                "Hello.",
                therapist(TherapistCode::Input(Some(InputKind::Affirmation))),
                0,
            )
            .unwrap(),
        )
        .unwrap();
        assert!(s.recent_window(5).is_empty());
    }

    fn sample_record() -> SessionRecord {
        let mut s = scripted_state(2);
        s.utterances[2] = Utterance::new(
            Speaker::Therapist,
            "Did that help?",
            therapist(TherapistCode::Question(Some(QuestionKind::Closed))),
            1,
        )
        .unwrap();
        SessionRecord {
            session_id: "s-1".to_string(),
            profile_ref: "p-1".to_string(),
            story_ref: Some("p-1".to_string()),
            model_name: "scripted".to_string(),
            seed: 7,
            ablation: AblationFlags::default(),
            generation_params: SessionParams::default(),
            utterances: s.utterances,
            turns: 2,
            stop_reason: StopReason::TurnCapReached,
            llm_call_count: 7,
            selector_trace: Vec::new(),
        }
    }

    #[test]
    fn record_projections() {
        let r = sample_record();
        assert_eq!(
            r.therapist_categories(),
            vec![
                TherapistCategory::Input,
                TherapistCategory::Question,
                TherapistCategory::Reflection
            ]
        );
        assert_eq!(r.client_codes(), vec![ClientCode::Neutral, ClientCode::Neutral]);
        let pairs = r.reflection_pairs();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].0, "Client line 2.");
        assert_eq!(pairs[0].1, "Therapist line 2.");
    }

    #[test]
    fn record_validate_checks_turns_and_call_floor() {
        let mut r = sample_record();
        r.validate().unwrap();
        r.turns = 3;
        assert!(matches!(r.validate(), Err(CoreError::InvalidRecord(_))));
        let mut r = sample_record();
        r.llm_call_count = 2;
        assert!(matches!(r.validate(), Err(CoreError::InvalidRecord(_))));
    }

    #[test]
    fn record_round_trips_through_json() {
        let r = sample_record();
        let json = serde_json::to_string(&r).unwrap();
        let back: SessionRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(r, back);
        // No selector trace -> the field is omitted entirely.
        assert!(!json.contains("selector_trace"));
    }
}
