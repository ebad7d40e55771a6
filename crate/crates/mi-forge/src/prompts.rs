//! Prompt templates for every agent role.
//!
//! Template wording is part of the generation contract: downstream behavior
//! (code adherence, termination cues, JSON shape) depends on these exact
//! instructions, so edit with care.

use mi_core::code::Speaker;
use mi_core::dialogue::Utterance;
use mi_core::profile::{ClientProfile, QuestionnaireInstrument};

/// Behavioral code definitions injected wherever a template has an
/// `MI Code Definitions` slot.
pub const MI_CODE_DEFINITIONS: &str = "\
Therapist Codes:
- Reflection: Mirrors back the essence of client statements; includes simple and complex reflections.
- Question: Seeks clarity or explores client perspective. Open: invites elaboration. Closed: expects yes/no or brief answer.
- Input (therapist_input): Non-reflection, non-question utterances: information-giving, advice, affirmations, or goal-setting.
Client Codes:
- Change: Language favoring change: desire, ability, reasons, need, commitment, or taking steps.
- Sustain: Language opposing change or favoring status quo.
- Neutral: Utterances without directional motivational content.";

/// A fully rendered system + user prompt pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptPair {
    pub system: String,
    pub user: String,
}

/// `Therapist: ...` / `Client: ...` lines for a history slot.
pub fn format_messages(utterances: &[&Utterance]) -> String {
    if utterances.is_empty() {
        return "(no prior conversation)".to_string();
    }
    utterances
        .iter()
        .map(|u| {
            let label = match u.speaker {
                Speaker::Client => "Client",
                Speaker::Therapist => "Therapist",
            };
            format!("{label}: {}", u.text)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Questionnaire profiling prompt: score all 23 items in character.
pub fn profiling(client_info: &str, instrument: &QuestionnaireInstrument) -> PromptPair {
    let questions = instrument
        .items
        .iter()
        .enumerate()
        .map(|(i, item)| format!("{}. {}", i + 1, item.text))
        .collect::<Vec<_>>()
        .join("\n");
    PromptPair {
        system: format!(
            "You are now a client seeking psychological counseling. \
             Your basic information: {client_info}. Question list:\n{questions}"
        ),
        user: "For every question (exactly 23), you must: \
               (1) Choose one integer score from 0 to 4 (0 = \"Not at all\", 4 = \"Almost always\") \
               that best fits the client's feelings. \
               (2) Write one short explanation (1-2 sentences) reflecting the severity, \
               as if the client were speaking.\n\
               Constraints: The arrays must have exactly 23 elements.\n\
               Output: {\"scores\": [s1...s23], \"explanations\": [\"exp1\"...\"exp23\"]}"
            .to_string(),
    }
}

/// Situational story prompt grounded in questionnaire results.
pub fn story(profile: &ClientProfile, instrument: &QuestionnaireInstrument) -> PromptPair {
    let results = profile.item_lines(instrument).join("\n");
    let user_response = profile.explanations.join(" ");
    PromptPair {
        system: "Based on the questionnaire screening results, write a first-person \
                 narrative (<200 words)."
            .to_string(),
        user: format!(
            "Requirements: Choose one primary symptom (most severe). \
             Focus on ONE specific scene (work, dinner, morning routine). \
             Describe concrete actions and behaviors. \
             Show how the symptom disrupts normal activity. \
             Use short, direct sentences with minimal adjectives.\n\
             Questionnaire results:\n{results}\n\
             User explanations: {user_response}\n\
             Output: Return only the story without additional text."
        ),
    }
}

/// Follow-up instruction when a story reply breaches the word cap.
pub const STORY_RETRY_INSTRUCTION: &str =
    "The previous story was too long. Rewrite it in under 200 words. \
     Return only the story without additional text.";

/// Client response prompt. `target_code` is None under the no-MI ablation,
/// which also drops the code-definition block.
pub fn client_turn(
    background_story: &str,
    history: &str,
    therapist_utterance: &str,
    target_code: Option<&str>,
) -> PromptPair {
    let mut system = format!(
        "You are a client receiving psychological counseling. \
         This is your story/past traumatic experience: {background_story}."
    );
    if target_code.is_some() {
        system.push_str(&format!("\nMI Code Definitions:\n{MI_CODE_DEFINITIONS}"));
    }
    let mut user = String::new();
    match target_code {
        Some(code) => {
            user.push_str(
                "Task: Generate a response that naturally embodies the specified client \
                 MI code while maintaining consistency with your story and the \
                 conversation flow.\n\
                 Client MI Codes: Change = language favoring behavior change (desire, \
                 ability, reasons, commitment); Sustain = language opposing change or \
                 favoring status quo; Neutral = no directional motivational content.\n",
            );
            user.push_str(&format!("Target client MI code: {code}\n"));
        }
        None => {
            user.push_str(
                "Task: Generate a response consistent with your story and the \
                 conversation flow.\n",
            );
        }
    }
    user.push_str(&format!(
        "Constraints: Use natural, colloquial language; avoid metaphors and dramatic \
         wording. Generate only ONE utterance per turn. Don't start with \"It seems \
         that\" or similar phrases.\n\
         Conversation history:\n{history}\n\
         Therapist utterance: {therapist_utterance}\n\
         Output: Return only the client response content."
    ));
    PromptPair { system, user }
}

/// Therapist response prompt. `selected_code` is None under the no-MI
/// ablation; `wrap_up` injects the closing instruction near t_max.
pub fn therapist_turn(history: &str, selected_code: Option<&str>, wrap_up: bool) -> PromptPair {
    let wrap_up_instruction = if wrap_up {
        " The session is ending now: summarize the progress made, affirm the client, \
         and say goodbye to wrap up the conversation."
    } else {
        ""
    };
    let system =
        format!("You are an experienced psychotherapist skilled in MI techniques.{wrap_up_instruction}");
    let mut user = String::new();
    match selected_code {
        Some(code) => {
            user.push_str("Task: Generate a response that strictly follows the selected MI code.\n");
            user.push_str(&format!("MI Codes:\n{MI_CODE_DEFINITIONS}\n"));
            user.push_str(&format!("Selected Code: {code}\n"));
        }
        None => {
            user.push_str("Task: Generate a helpful therapist response.\n");
        }
    }
    user.push_str(&format!(
        "Constraints: Generate 1-2 utterances using casual, natural language. \
         Do not use repetitive sentence patterns. Avoid \"It seems that\", \
         \"It sounds like\" phrases.\n\
         History:\n{history}\n\
         Output: Return only the therapist response content."
    ));
    PromptPair { system, user }
}

/// Opening greeting before any client input.
pub fn greeting() -> PromptPair {
    PromptPair {
        system: "You are an experienced psychotherapist skilled in MI techniques.".to_string(),
        user: "Task: Open the session. Warmly greet the client, affirm their decision to \
               come in, and invite them to share what brings them here today.\n\
               Constraints: Generate 1-2 utterances using casual, natural language.\n\
               Output: Return only the therapist response content."
            .to_string(),
    }
}

/// Session phase relative to t_min/t_max, used to steer the selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Early,
    Middle,
    Later,
}

impl Phase {
    /// early: t < t_min/2; later: t >= t_max - 5; middle otherwise.
    pub fn of(turn: usize, t_min: usize, t_max: usize) -> Phase {
        if 2 * turn < t_min {
            Phase::Early
        } else if turn >= t_max.saturating_sub(5) {
            Phase::Later
        } else {
            Phase::Middle
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Phase::Early => "early",
            Phase::Middle => "middle",
            Phase::Later => "later",
        }
    }
}

/// Strategy selector prompt over the recent window.
pub fn selector(history: &str, phase: Phase) -> PromptPair {
    PromptPair {
        system: "You are an expert MI strategy selector.".to_string(),
        user: format!(
            "Task: (1) Classify the MI code of the client's last utterance \
             (change/sustain/neutral). (2) Select the optimal MI technique the \
             therapist should use next.\n\
             Phase-aware selection: Early = more open questions and reflections; \
             Middle = more complex reflections; Later = information giving and advice.\n\
             Current phase: {}.\n\
             MI Code Definitions:\n{MI_CODE_DEFINITIONS}\n\
             Conversation History:\n{history}\n\
             Output: {{\"client_mi_code\": \"<change|sustain|neutral>\", \
             \"therapist_mi_code\": \"<reflection|question|therapist_input>\"}}",
            phase.label()
        ),
    }
}

/// Session monitor prompt deciding complete vs continue.
pub fn monitor(history: &str) -> PromptPair {
    PromptPair {
        system: "You are a session monitor.".to_string(),
        user: format!(
            "Task: Output valid JSON {{\"result\": \"<complete|continue>\", \
             \"reason\": \"...\"}} to determine if the session should end.\n\
             Rules: Return complete if the therapist uses closing cues (e.g., \
             \"wrap up\", \"goodbye\") without introducing new topics, or if the \
             client explicitly ends. Return continue if new topics emerge, \
             substantive questions need answers, or ending signals are ambiguous.\n\
             Conversation History:\n{history}"
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use mi_core::code::{MiCode, Speaker};

    #[test]
    fn history_formatting() {
        let a = Utterance::new(
            Speaker::Therapist,
            "Hello.",
            MiCode::parse("therapist_input/affirmation").unwrap(),
            0,
        )
        .unwrap();
        let b =
            Utterance::new(Speaker::Client, "Hi.", MiCode::parse("neutral").unwrap(), 1).unwrap();
        let joined = format_messages(&[&a, &b]);
        assert_eq!(joined, "Therapist: Hello.\nClient: Hi.");
        assert_eq!(format_messages(&[]), "(no prior conversation)");
    }

    #[test]
    fn profiling_prompt_numbers_all_items() {
        let instrument = QuestionnaireInstrument::builtin();
        let p = profiling("Identity: Adult; Age: 30", &instrument);
        assert!(p.system.contains("1. "));
        assert!(p.system.contains("23. "));
        assert!(p.user.contains("exactly 23 elements"));
        assert!(p.user.contains("\"scores\""));
    }

    #[test]
    fn client_prompt_ablation_shapes() {
        let full = client_turn("my story", "Therapist: Hi.", "Hi.", Some("change"));
        assert!(full.system.contains("my story"));
        assert!(full.system.contains("Reflection"));
        assert!(full.user.contains("Target client MI code: change"));

        let bare = client_turn("my story", "Therapist: Hi.", "Hi.", None);
        assert!(!bare.user.contains("Target client MI code"));
        assert!(!bare.system.contains("MI Code Definitions"));
    }

    #[test]
    fn therapist_prompt_wrap_up_and_code_slots() {
        let coded = therapist_turn("Client: Hey.", Some("reflection"), false);
        assert!(coded.user.contains("Selected Code: reflection"));
        assert!(!coded.system.contains("wrap up"));

        let closing = therapist_turn("Client: Hey.", Some("therapist_input"), true);
        assert!(closing.system.contains("wrap up"));

        let bare = therapist_turn("Client: Hey.", None, false);
        assert!(!bare.user.contains("Selected Code"));
    }

    #[test]
    fn phase_boundaries() {
        // t_min 10, t_max 40: early below 5, later from 35.
        assert_eq!(Phase::of(0, 10, 40), Phase::Early);
        assert_eq!(Phase::of(4, 10, 40), Phase::Early);
        assert_eq!(Phase::of(5, 10, 40), Phase::Middle);
        assert_eq!(Phase::of(34, 10, 40), Phase::Middle);
        assert_eq!(Phase::of(35, 10, 40), Phase::Later);
    }

    #[test]
    fn selector_and_monitor_mention_their_schemas() {
        let s = selector("Client: Hi.", Phase::Early);
        assert!(s.user.contains("client_mi_code"));
        assert!(s.user.contains("<reflection|question|therapist_input>"));
        assert!(s.user.contains("Current phase: early"));
        let m = monitor("Client: Bye.");
        assert!(m.user.contains("<complete|continue>"));
    }
}
