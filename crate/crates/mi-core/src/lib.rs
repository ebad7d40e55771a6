//! Domain types and evaluation math for coded motivational-interviewing (MI)
//! dialogue.
//!
//! This crate is the IO-free half of the workspace: behavioral code taxonomy,
//! dialogue/session state, client profiles, lexical diversity metrics, MI
//! strategy metrics, and the agreement/correlation statistics used to compare
//! automated judges against human raters. Everything here is deterministic
//! and side-effect free; network backends, file formats, and the CLI live in
//! the companion `mi-forge` crate.

pub mod code;
pub mod dialogue;
pub mod embed;
pub mod error;
pub mod lexical;
pub mod profile;
pub mod stats;
pub mod strategy;
pub mod text;

pub use code::{ClientCode, MiCode, Speaker, TherapistCategory, TherapistCode};
pub use dialogue::{
    AblationFlags, DialogueState, SelectorStep, SessionParams, SessionRecord, StopReason,
    Utterance,
};
pub use error::{CoreError, EmbedError, MetricError, StatsError};
pub use profile::{ClientProfile, QuestionnaireInstrument, SituationalStory};
