//! Phased evolutionary optimization of LLM prompts.
//!
//! A prompt is a single text genome (instruction plus any in-context examples).
//! The [`engine`] runs four phases over a scored [`domain::Population`]:
//! global initialization, local feedback mutation, global evolution (EDA then
//! crossover) and local semantic mutation, each phase stopping on an
//! operator-specific tolerance of non-improving iterations.
//!
//! All model access goes through [`gateway::Gateway`], which fronts a live
//! chat-completions endpoint, a scripted mock, or a replay cache, and keeps a
//! per-phase cost ledger.

pub mod checkpoint;
pub mod config;
pub mod domain;
pub mod engine;
pub mod error;
pub mod evaluation;
pub mod exec;
pub mod gateway;
pub mod lab;
pub mod landscape;
pub mod operators;
pub mod report;
pub mod task;

pub use domain::{
    CandidateId, Lineage, Origin, PerformanceVector, PhaseId, Population, PromptCandidate,
};
pub use config::{RunConfig, Settings};
pub use engine::{run, run_random_evolution_baseline, RunRecord};
pub use error::{Error, Result};
pub use gateway::{CompletionRequest, CompletionResponse, CostLedger, Gateway, Purpose};
pub use operators::OperatorKind;
