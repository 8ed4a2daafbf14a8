//! Library for building and evaluating an informal theorem-proving pipeline:
//! corpus records and their invariants, prompt templates, model providers
//! (HTTP, mock, and record/replay cache), embedding-based decontamination,
//! staged theorem curation, contradictory-variant expansion, verifiable
//! rewards with group-normalized advantages, and outcome/process evaluation.

pub mod config;
pub mod corpus;
pub mod curation;
pub mod decontam;
pub mod evaluation;
pub mod prompts;
pub mod providers;
pub mod reward;
pub mod stats;
pub mod variants;
