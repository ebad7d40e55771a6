//! The three-agent session loop: greeting, client turn, strategy selection,
//! therapist turn, synchronization, termination.
//!
//! Call shape per session: 1 greeting, then per exchange a client call, a
//! selector call (MI mode only), and a therapist call; once the turn counter
//! exceeds t_min every exchange also ends with a monitor call. Totals for a
//! full-config session of n exchanges: 1 + 3*min(n, t_min) + 4*max(0, n - t_min).

use serde::Deserialize;

use crate::backend::{Backend, BackendError, CallMeta, ChatRequest};
use crate::prompts::{self, Phase};
use mi_core::code::{ClientCode, MiCode, Speaker, TherapistCode};
use mi_core::dialogue::{
    AblationFlags, DialogueState, SelectorStep, SessionParams, SessionRecord, StopReason,
    Utterance,
};
use mi_core::error::CoreError;
use mi_core::profile::{ClientProfile, SituationalStory};

/// Identifiers stamped onto the finished record.
#[derive(Debug, Clone)]
pub struct SessionSpec {
    pub session_id: String,
    pub profile_ref: String,
    pub story_ref: Option<String>,
    pub model_name: String,
    pub seed: u64,
}

/// Loop shape plus ablation switches.
#[derive(Debug, Clone, Default)]
pub struct SessionSettings {
    pub params: SessionParams,
    pub ablation: AblationFlags,
}

#[derive(Debug, thiserror::Error)]
pub enum OrchestratorError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Core(#[from] CoreError),
}

/// A session abort carrying whatever transcript existed at failure time.
#[derive(Debug, thiserror::Error)]
#[error("session aborted after {} utterances: {source}", partial.len())]
pub struct SessionError {
    pub source: OrchestratorError,
    pub partial: Vec<Utterance>,
}

/// Category the selector may pick; `other` is deliberately not an option.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectedCategory {
    Reflection,
    Question,
    #[serde(alias = "input")]
    TherapistInput,
}

impl SelectedCategory {
    pub fn token(self) -> &'static str {
        match self {
            SelectedCategory::Reflection => "reflection",
            SelectedCategory::Question => "question",
            SelectedCategory::TherapistInput => "therapist_input",
        }
    }

    fn code(self) -> TherapistCode {
        match self {
            SelectedCategory::Reflection => TherapistCode::Reflection(None),
            SelectedCategory::Question => TherapistCode::Question(None),
            SelectedCategory::TherapistInput => TherapistCode::Input(None),
        }
    }
}

/// Interaction-agent output for one exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub struct StrategySelection {
    pub client_mi_code: ClientCode,
    pub therapist_mi_code: SelectedCategory,
}

/// Opening therapist utterance, coded as an affirmation.
pub fn greet(backend: &Backend, session_id: &str) -> Result<Utterance, OrchestratorError> {
    let prompt = prompts::greeting();
    let req = ChatRequest::new(prompt.system, prompt.user, backend.params());
    let meta = CallMeta::new(session_id, "greeting", 0);
    let text = backend.chat(&meta, &req)?;
    Ok(Utterance::new(
        Speaker::Therapist,
        text,
        MiCode::parse("therapist_input/affirmation")?,
        0,
    )?)
}

/// Classify the client's last utterance and pick the next therapist move,
/// seeing exactly the last k exchanges.
pub fn select_strategy(
    state: &DialogueState,
    settings: &SessionSettings,
    backend: &Backend,
    session_id: &str,
) -> Result<StrategySelection, OrchestratorError> {
    let window = state.recent_window(settings.params.context_window_k);
    let history = prompts::format_messages(&window);
    let phase = Phase::of(state.turn, settings.params.t_min, settings.params.t_max);
    let prompt = prompts::selector(&history, phase);
    let req = ChatRequest::new(prompt.system, prompt.user, backend.params());
    let meta = CallMeta::new(session_id, "selector", state.turn + 1);
    let selection: StrategySelection =
        backend.chat_structured(&meta, &req, |_| Ok(()))?;
    Ok(selection)
}

/// One client utterance aiming for `target` (None under the no-MI ablation).
pub fn client_turn(
    state: &DialogueState,
    background: &str,
    target: Option<ClientCode>,
    settings: &SessionSettings,
    backend: &Backend,
    session_id: &str,
) -> Result<Utterance, OrchestratorError> {
    let window = state.recent_window(settings.params.context_window_k);
    let (history_part, last) = match window.split_last() {
        Some((last, rest)) => (prompts::format_messages(rest), last.text.as_str()),
        None => (prompts::format_messages(&[]), ""),
    };
    let target_token = target.map(|c| MiCode::Client(c).to_string());
    let prompt =
        prompts::client_turn(background, &history_part, last, target_token.as_deref());
    let req = ChatRequest::new(prompt.system, prompt.user, backend.params());
    let turn = state.next_turn_index();
    let meta = CallMeta::new(session_id, "client", turn);
    let text = backend.chat(&meta, &req)?;
    let code = target.unwrap_or_else(|| heuristic_client_code(&text));
    Ok(Utterance::new(Speaker::Client, text, MiCode::Client(code), turn)?)
}

/// One therapist utterance following `selected` (None under the no-MI
/// ablation, where the code is recovered heuristically for metrics).
pub fn therapist_turn(
    state: &DialogueState,
    selected: Option<SelectedCategory>,
    settings: &SessionSettings,
    backend: &Backend,
    session_id: &str,
) -> Result<Utterance, OrchestratorError> {
    let window = state.recent_window(settings.params.context_window_k);
    let history = prompts::format_messages(&window);
    let turn = state.next_turn_index();
    // Wrap up while generating the final possible exchange.
    let wrap_up = turn == settings.params.t_max;
    let prompt = prompts::therapist_turn(&history, selected.map(|s| s.token()), wrap_up);
    let req = ChatRequest::new(prompt.system, prompt.user, backend.params());
    let meta = CallMeta::new(session_id, "therapist", turn);
    let text = backend.chat(&meta, &req)?;
    let code = match selected {
        Some(s) => s.code(),
        None => heuristic_therapist_code(&text),
    };
    Ok(Utterance::new(Speaker::Therapist, text, MiCode::Therapist(code), turn)?)
}

#[derive(Deserialize)]
struct MonitorReply {
    result: String,
    #[allow(dead_code)]
    #[serde(default)]
    reason: String,
}

/// Ask the monitor whether to stop. Structured failures fail open: the
/// session continues and a warning lands in the event log.
pub fn check_termination(
    state: &DialogueState,
    backend: &Backend,
    session_id: &str,
) -> Result<bool, OrchestratorError> {
    let all: Vec<&Utterance> = state.utterances.iter().collect();
    let history = prompts::format_messages(&all);
    let prompt = prompts::monitor(&history);
    let req = ChatRequest::new(prompt.system, prompt.user, backend.params());
    let meta = CallMeta::new(session_id, "monitor", state.turn);
    match backend.chat_structured::<MonitorReply>(&meta, &req, |r| {
        if r.result == "complete" || r.result == "continue" {
            Ok(())
        } else {
            Err(format!("result must be complete or continue, got {}", r.result))
        }
    }) {
        Ok(reply) => Ok(reply.result == "complete"),
        Err(BackendError::StructuredOutput { error, .. }) => {
            backend.note_warning(&meta, format!("monitor output invalid, continuing: {error}"));
            Ok(false)
        }
        Err(other) => Err(other.into()),
    }
}

/// Keyword coding for transcripts generated without the interaction agent.
pub fn heuristic_client_code(text: &str) -> ClientCode {
    let lower = text.to_lowercase();
    let change = ["i want", "i will", "i could try", "i need this to be different", "i think i can"];
    let sustain = ["can't", "cannot", "won't", "why bother", "no point", "easier to keep"];
    if change.iter().any(|k| lower.contains(k)) {
        ClientCode::Change
    } else if sustain.iter().any(|k| lower.contains(k)) {
        ClientCode::Sustain
    } else {
        ClientCode::Neutral
    }
}

/// Surface-cue coding of an uncoded therapist utterance.
pub fn heuristic_therapist_code(text: &str) -> TherapistCode {
    let lower = text.to_lowercase();
    if lower.contains('?') {
        return TherapistCode::Question(None);
    }
    let reflective = ["it sounds", "sounds like", "you ", "i hear", "it seems"];
    if reflective.iter().any(|k| lower.starts_with(k)) {
        return TherapistCode::Reflection(None);
    }
    TherapistCode::Input(None)
}

/// Drive a whole session per the coded-dialogue loop.
pub fn run_session(
    spec: &SessionSpec,
    settings: &SessionSettings,
    profile: &ClientProfile,
    story: Option<&SituationalStory>,
    backend: &Backend,
) -> Result<SessionRecord, SessionError> {
    let mut state = DialogueState::new();
    let mut trace: Vec<SelectorStep> = Vec::new();
    let stop_reason = drive(spec, settings, profile, story, backend, &mut state, &mut trace)
        .map_err(|source| SessionError { source, partial: state.utterances.clone() })?;
    let record = SessionRecord {
        session_id: spec.session_id.clone(),
        profile_ref: spec.profile_ref.clone(),
        story_ref: spec.story_ref.clone(),
        model_name: spec.model_name.clone(),
        seed: spec.seed,
        ablation: settings.ablation,
        generation_params: settings.params.clone(),
        utterances: state.utterances,
        turns: state.turn,
        stop_reason,
        llm_call_count: backend.call_count(),
        selector_trace: trace,
    };
    record
        .validate()
        .map_err(|e| SessionError { source: e.into(), partial: record.utterances.clone() })?;
    Ok(record)
}

fn drive(
    spec: &SessionSpec,
    settings: &SessionSettings,
    profile: &ClientProfile,
    story: Option<&SituationalStory>,
    backend: &Backend,
    state: &mut DialogueState,
    trace: &mut Vec<SelectorStep>,
) -> Result<StopReason, OrchestratorError> {
    debug_assert_eq!(settings.ablation.story_used, story.is_some());
    let background = match story {
        Some(s) => s.text.clone(),
        // Without a story only the questionnaire explanations ground the persona.
        None => profile.explanations.join(" "),
    };
    let sid = &spec.session_id;

    state.push(greet(backend, sid)?)?;

    let mut target = ClientCode::Neutral;
    loop {
        let client_target = settings.ablation.mi_code_used.then_some(target);
        state.push(client_turn(state, &background, client_target, settings, backend, sid)?)?;

        let selected = if settings.ablation.mi_code_used {
            let selection = select_strategy(state, settings, backend, sid)?;
            trace.push(SelectorStep {
                turn: state.next_turn_index(),
                target_client_code: target,
                classified_client_code: selection.client_mi_code,
                selected_category: selection.therapist_mi_code.token().to_string(),
            });
            target = selection.client_mi_code;
            Some(selection.therapist_mi_code)
        } else {
            None
        };

        state.push(therapist_turn(state, selected, settings, backend, sid)?)?;

        // Monitor gate: first check happens once the count exceeds t_min.
        if state.turn > settings.params.t_min && check_termination(state, backend, sid)? {
            state.mark_complete();
            return Ok(StopReason::MonitorComplete);
        }
        if state.turn >= settings.params.t_max {
            return Ok(StopReason::TurnCapReached);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{CallEvent, ChatProvider, GenerationParams, SyntheticProvider};
    use mi_core::code::TherapistCategory;
    use mi_core::profile::QuestionnaireInstrument;
    use std::sync::Arc;

    fn test_profile() -> ClientProfile {
        let instrument = QuestionnaireInstrument::builtin();
        let mut scores = vec![0u8; 23];
        scores[5] = 3;
        ClientProfile::new(
            &instrument,
            "p-1",
            "Adult",
            31,
            scores,
            (0..23).map(|i| format!("Thought {i}.")).collect(),
        )
        .unwrap()
    }

    fn test_story() -> SituationalStory {
        SituationalStory::new("p-1", "I froze at my desk again this morning.", "anxiety").unwrap()
    }

    fn spec() -> SessionSpec {
        SessionSpec {
            session_id: "s-1".to_string(),
            profile_ref: "p-1".to_string(),
            story_ref: Some("p-1".to_string()),
            model_name: "synthetic".to_string(),
            seed: 9,
        }
    }

    fn settings(t_min: usize, t_max: usize) -> SessionSettings {
        SessionSettings {
            params: SessionParams { t_min, t_max, ..SessionParams::default() },
            ablation: AblationFlags::default(),
        }
    }

    fn run(
        provider: impl ChatProvider + 'static,
        settings: &SessionSettings,
        with_story: bool,
    ) -> (SessionRecord, Vec<CallEvent>) {
        let backend = Backend::new(Arc::new(provider), GenerationParams::default());
        let profile = test_profile();
        let story = test_story();
        let mut spec = spec();
        if !with_story {
            spec.story_ref = None;
        }
        let record = run_session(
            &spec,
            settings,
            &profile,
            with_story.then_some(&story),
            &backend,
        )
        .unwrap();
        (record, backend.events())
    }

    fn call_formula(n: usize, t_min: usize) -> u64 {
        (1 + 3 * n.min(t_min) + 4 * n.saturating_sub(t_min)) as u64
    }

    #[test]
    fn capped_session_matches_call_formula() {
        for (n, t_min) in [(5usize, 10usize), (10, 10), (17, 10), (23, 10)] {
            let s = settings(t_min, n);
            // A monitor that never completes, so the cap is what stops us.
            let provider = SyntheticProvider::new(1).monitor_complete_after(usize::MAX);
            let (record, events) = run(provider, &s, true);
            assert_eq!(record.turns, n);
            assert_eq!(record.llm_call_count, call_formula(n, t_min), "n={n}");
            assert_eq!(
                events.iter().map(|e| e.calls()).sum::<u64>(),
                record.llm_call_count
            );
            assert_eq!(record.stop_reason, StopReason::TurnCapReached);
        }
    }

    #[test]
    fn monitor_complete_stops_early_with_same_accounting() {
        // Monitor completes once it sees 17 client utterances.
        let provider = SyntheticProvider::new(2).monitor_complete_after(17);
        let s = settings(10, 40);
        let (record, events) = run(provider, &s, true);
        assert_eq!(record.turns, 17);
        assert_eq!(record.stop_reason, StopReason::MonitorComplete);
        assert_eq!(record.llm_call_count, call_formula(17, 10));
        // No monitor event at or before turn 10.
        assert!(events
            .iter()
            .filter(|e| e.role == "monitor")
            .all(|e| e.turn > 10));
    }

    #[test]
    fn no_mi_ablation_drops_selector_and_code_lines() {
        let s = SessionSettings {
            params: SessionParams { t_min: 10, t_max: 17, ..SessionParams::default() },
            ablation: AblationFlags { story_used: true, mi_code_used: false },
        };
        let (record, events) = run(SyntheticProvider::new(3), &s, true);
        assert_eq!(record.turns, 17);
        // 1 + 2*10 + 3*7 = 42.
        assert_eq!(record.llm_call_count, 42);
        assert!(events.iter().all(|e| e.role != "selector"));
        assert!(record.selector_trace.is_empty());
        // Post-hoc codes are still drawn from the therapist taxonomy.
        assert!(!record.therapist_categories().is_empty());
    }

    #[test]
    fn no_story_ablation_keeps_call_counts() {
        let full = settings(10, 12);
        let (with_story, _) = run(SyntheticProvider::new(4), &full, true);
        let bare = SessionSettings {
            params: full.params.clone(),
            ablation: AblationFlags { story_used: false, mi_code_used: true },
        };
        let (without_story, _) = run(SyntheticProvider::new(4), &bare, false);
        assert_eq!(with_story.llm_call_count, without_story.llm_call_count);
        assert!(without_story.story_ref.is_none());
    }

    #[test]
    fn transcript_structure_is_sound() {
        let s = settings(3, 8);
        let (record, _) = run(SyntheticProvider::new(5), &s, true);
        record.validate().unwrap();
        assert_eq!(record.utterances[0].speaker, Speaker::Therapist);
        assert_eq!(record.utterances[0].turn_index, 0);
        assert_eq!(
            record.utterances[0].code.project_category(),
            Some(TherapistCategory::Input)
        );
        for pair in record.utterances[1..].chunks(2) {
            assert_eq!(pair[0].speaker, Speaker::Client);
            if pair.len() == 2 {
                assert_eq!(pair[1].speaker, Speaker::Therapist);
                assert_eq!(pair[0].turn_index, pair[1].turn_index);
            }
        }
        // First selector step targeted neutral (initialization rule).
        assert_eq!(record.selector_trace[0].target_client_code, ClientCode::Neutral);
        // Later targets reuse the previous classification.
        for w in record.selector_trace.windows(2) {
            assert_eq!(w[1].target_client_code, w[0].classified_client_code);
        }
    }

    #[test]
    fn greeting_failure_aborts_with_empty_partial() {
        struct Dead;
        impl ChatProvider for Dead {
            fn name(&self) -> &str {
                "dead"
            }
            fn complete(&self, _: &ChatRequest) -> Result<String, BackendError> {
                Err(BackendError::Http("down".to_string()))
            }
        }
        let backend = Backend::new(Arc::new(Dead), GenerationParams::default());
        let err = run_session(&spec(), &settings(2, 4), &test_profile(), Some(&test_story()), &backend)
            .unwrap_err();
        assert!(err.partial.is_empty());
        assert!(matches!(err.source, OrchestratorError::Backend(_)));
    }

    #[test]
    fn monitor_garbage_fails_open() {
        // Valid everywhere except the monitor, which returns prose.
        struct BadMonitor(SyntheticProvider);
        impl ChatProvider for BadMonitor {
            fn name(&self) -> &str {
                "bad-monitor"
            }
            fn complete(&self, req: &ChatRequest) -> Result<String, BackendError> {
                if req.system.starts_with("You are a session monitor") {
                    Ok("hard to say, really".to_string())
                } else {
                    self.0.complete(req)
                }
            }
        }
        let s = settings(2, 4);
        let backend = Backend::new(
            Arc::new(BadMonitor(SyntheticProvider::new(6))),
            GenerationParams::default(),
        );
        let record = run_session(&spec(), &s, &test_profile(), Some(&test_story()), &backend)
            .unwrap();
        // Monitor never manages to complete; the cap stops the session.
        assert_eq!(record.stop_reason, StopReason::TurnCapReached);
        assert_eq!(record.turns, 4);
        let events = backend.events();
        assert!(events.iter().any(|e| e.role == "monitor_warning" && !e.ok));
        // Each failed monitor chat chain burned its repair rounds but the
        // session survived.
        assert!(events.iter().filter(|e| e.role == "monitor").all(|e| e.ok));
    }

    #[test]
    fn heuristic_codes_cover_the_taxonomy() {
        assert_eq!(
            heuristic_therapist_code("What would help most right now?"),
            TherapistCode::Question(None)
        );
        assert_eq!(
            heuristic_therapist_code("You are carrying a lot right now."),
            TherapistCode::Reflection(None)
        );
        assert_eq!(
            heuristic_therapist_code("One option is a short walk after dinner."),
            TherapistCode::Input(None)
        );
        assert_eq!(heuristic_client_code("I want to fix this."), ClientCode::Change);
        assert_eq!(heuristic_client_code("I can't change any of it."), ClientCode::Sustain);
        assert_eq!(heuristic_client_code("Work was fine."), ClientCode::Neutral);
    }
}
