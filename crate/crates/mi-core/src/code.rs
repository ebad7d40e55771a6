//! Behavioral code taxonomy for MI dialogue.
//!
//! Therapist utterances carry one of four categories (reflection, question,
//! therapist input, other); reflections, questions, and inputs optionally carry
//! a subtype. Client utterances carry change/sustain/neutral talk codes. The
//! string form is `category` or `category/subtype`, e.g. `question/open`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;

/// Who produced an utterance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    Client,
    Therapist,
}

impl fmt::Display for Speaker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Speaker::Client => write!(f, "client"),
            Speaker::Therapist => write!(f, "therapist"),
        }
    }
}

/// Reflection subtype: simple restates, complex adds meaning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReflectionKind {
    Simple,
    Complex,
}

/// Question subtype.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionKind {
    Open,
    Closed,
}

/// Therapist-input subtype.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    Information,
    Advice,
    Affirmation,
    GoalSetting,
}

/// Full therapist code: category plus optional subtype.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TherapistCode {
    Reflection(Option<ReflectionKind>),
    Question(Option<QuestionKind>),
    Input(Option<InputKind>),
    Other,
}

/// Client talk code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClientCode {
    Change,
    Sustain,
    Neutral,
}

impl fmt::Display for ClientCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClientCode::Change => write!(f, "change"),
            ClientCode::Sustain => write!(f, "sustain"),
            ClientCode::Neutral => write!(f, "neutral"),
        }
    }
}

/// Therapist category with subtype stripped; the unit the strategy metrics
/// count over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TherapistCategory {
    Reflection,
    Question,
    Input,
    Other,
}

impl TherapistCategory {
    /// Token used in metric output and distribution labels.
    pub fn token(self) -> &'static str {
        match self {
            TherapistCategory::Reflection => "reflection",
            TherapistCategory::Question => "question",
            TherapistCategory::Input => "input",
            TherapistCategory::Other => "other",
        }
    }

    /// All categories in canonical (distribution) order.
    pub const ALL: [TherapistCategory; 4] = [
        TherapistCategory::Reflection,
        TherapistCategory::Question,
        TherapistCategory::Input,
        TherapistCategory::Other,
    ];
}

impl fmt::Display for TherapistCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.token())
    }
}

/// A behavioral code from either side of the conversation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum MiCode {
    Therapist(TherapistCode),
    Client(ClientCode),
}

impl MiCode {
    /// Speaker side this code belongs to.
    pub fn side(self) -> Speaker {
        match self {
            MiCode::Therapist(_) => Speaker::Therapist,
            MiCode::Client(_) => Speaker::Client,
        }
    }

    /// Therapist category, if this is a therapist-side code.
    pub fn project_category(self) -> Option<TherapistCategory> {
        match self {
            MiCode::Therapist(TherapistCode::Reflection(_)) => {
                Some(TherapistCategory::Reflection)
            }
            MiCode::Therapist(TherapistCode::Question(_)) => Some(TherapistCategory::Question),
            MiCode::Therapist(TherapistCode::Input(_)) => Some(TherapistCategory::Input),
            MiCode::Therapist(TherapistCode::Other) => Some(TherapistCategory::Other),
            MiCode::Client(_) => None,
        }
    }

    /// Parse the `category` / `category/subtype` string form.
    pub fn parse(token: &str) -> Result<Self, CoreError> {
        let token = token.trim();
        let (category, subtype) = match token.split_once('/') {
            Some((c, s)) => (c.trim(), Some(s.trim())),
            None => (token, None),
        };
        let illegal = |subtype: &str| CoreError::IllegalSubtype {
            category: category.to_string(),
            subtype: subtype.to_string(),
        };
        match category {
            "reflection" => match subtype {
                None => Ok(MiCode::Therapist(TherapistCode::Reflection(None))),
                Some("simple") => Ok(MiCode::Therapist(TherapistCode::Reflection(Some(
                    ReflectionKind::Simple,
                )))),
                Some("complex") => Ok(MiCode::Therapist(TherapistCode::Reflection(Some(
                    ReflectionKind::Complex,
                )))),
                Some(s) => Err(illegal(s)),
            },
            "question" => match subtype {
                None => Ok(MiCode::Therapist(TherapistCode::Question(None))),
                Some("open") => Ok(MiCode::Therapist(TherapistCode::Question(Some(
                    QuestionKind::Open,
                )))),
                Some("closed") => Ok(MiCode::Therapist(TherapistCode::Question(Some(
                    QuestionKind::Closed,
                )))),
                Some(s) => Err(illegal(s)),
            },
            // "input" is the projected metric token for the same category.
            "therapist_input" | "input" => match subtype {
                None => Ok(MiCode::Therapist(TherapistCode::Input(None))),
                Some("information") => Ok(MiCode::Therapist(TherapistCode::Input(Some(
                    InputKind::Information,
                )))),
                Some("advice") => {
                    Ok(MiCode::Therapist(TherapistCode::Input(Some(InputKind::Advice))))
                }
                Some("affirmation") => Ok(MiCode::Therapist(TherapistCode::Input(Some(
                    InputKind::Affirmation,
                )))),
                Some("goal_setting") => Ok(MiCode::Therapist(TherapistCode::Input(Some(
                    InputKind::GoalSetting,
                )))),
                Some(s) => Err(illegal(s)),
            },
            "other" => match subtype {
                None => Ok(MiCode::Therapist(TherapistCode::Other)),
                Some(s) => Err(illegal(s)),
            },
            "change" | "sustain" | "neutral" => match subtype {
                None => Ok(MiCode::Client(match category {
                    "change" => ClientCode::Change,
                    "sustain" => ClientCode::Sustain,
                    _ => ClientCode::Neutral,
                })),
                Some(s) => Err(illegal(s)),
            },
            _ => Err(CoreError::UnknownCode(token.to_string())),
        }
    }
}

impl fmt::Display for MiCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MiCode::Therapist(TherapistCode::Reflection(kind)) => match kind {
                None => write!(f, "reflection"),
                Some(ReflectionKind::Simple) => write!(f, "reflection/simple"),
                Some(ReflectionKind::Complex) => write!(f, "reflection/complex"),
            },
            MiCode::Therapist(TherapistCode::Question(kind)) => match kind {
                None => write!(f, "question"),
                Some(QuestionKind::Open) => write!(f, "question/open"),
                Some(QuestionKind::Closed) => write!(f, "question/closed"),
            },
            MiCode::Therapist(TherapistCode::Input(kind)) => match kind {
                None => write!(f, "therapist_input"),
                Some(InputKind::Information) => write!(f, "therapist_input/information"),
                Some(InputKind::Advice) => write!(f, "therapist_input/advice"),
                Some(InputKind::Affirmation) => write!(f, "therapist_input/affirmation"),
                Some(InputKind::GoalSetting) => write!(f, "therapist_input/goal_setting"),
            },
            MiCode::Therapist(TherapistCode::Other) => write!(f, "other"),
            MiCode::Client(code) => write!(f, "{code}"),
        }
    }
}

impl From<MiCode> for String {
    fn from(code: MiCode) -> Self {
        code.to_string()
    }
}

impl TryFrom<String> for MiCode {
    type Error = CoreError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        MiCode::parse(&value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_every_token() {
        let tokens = [
            "reflection",
            "reflection/simple",
            "reflection/complex",
            "question",
            "question/open",
            "question/closed",
            "therapist_input",
            "therapist_input/information",
            "therapist_input/advice",
            "therapist_input/affirmation",
            "therapist_input/goal_setting",
            "other",
            "change",
            "sustain",
            "neutral",
        ];
        for token in tokens {
            let code = MiCode::parse(token).unwrap();
            assert_eq!(code.to_string(), token);
            let json = serde_json::to_string(&code).unwrap();
            assert_eq!(json, format!("\"{token}\""));
            let back: MiCode = serde_json::from_str(&json).unwrap();
            assert_eq!(back, code);
        }
    }

    #[test]
    fn rejects_unknown_and_illegal() {
        assert_eq!(
            MiCode::parse("reflect"),
            Err(CoreError::UnknownCode("reflect".to_string()))
        );
        assert_eq!(
            MiCode::parse("question/openish"),
            Err(CoreError::IllegalSubtype {
                category: "question".to_string(),
                subtype: "openish".to_string(),
            })
        );
        assert!(MiCode::parse("other/simple").is_err());
        assert!(MiCode::parse("change/strong").is_err());
    }

    #[test]
    fn category_projection_drops_subtype_and_renames_input() {
        let code = MiCode::parse("therapist_input/advice").unwrap();
        assert_eq!(code.project_category(), Some(TherapistCategory::Input));
        assert_eq!(code.project_category().unwrap().token(), "input");
        // Projected tokens parse back to the same category.
        for cat in TherapistCategory::ALL {
            let reparsed = MiCode::parse(cat.token()).unwrap();
            assert_eq!(reparsed.project_category(), Some(cat));
        }
        assert_eq!(
            MiCode::parse("question/open").unwrap().project_category(),
            Some(TherapistCategory::Question)
        );
        assert_eq!(MiCode::Client(ClientCode::Change).project_category(), None);
    }

    #[test]
    fn sides_match_variants() {
        assert_eq!(MiCode::parse("other").unwrap().side(), Speaker::Therapist);
        assert_eq!(MiCode::parse("neutral").unwrap().side(), Speaker::Client);
    }
}
