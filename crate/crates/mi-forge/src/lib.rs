//! Generation and evaluation pipeline for coded MI dialogue.
//!
//! Builds on `mi-core`: chat/embedding backends (HTTP, scripted replay, and
//! a deterministic synthetic provider), the three-agent session orchestrator,
//! profile and story generation, the judge, metric/statistics drivers, JSONL
//! persistence, and the report writer behind the `mi-forge` CLI.

pub mod backend;
pub mod config;
pub mod formats;
pub mod judge;
pub mod orchestrator;
pub mod pipeline;
pub mod profiler;
pub mod prompts;
pub mod report;
