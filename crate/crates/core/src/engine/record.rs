use serde::{Deserialize, Serialize};

use super::state::EvolutionBlock;
use crate::domain::{CandidateId, Origin, PhaseId, PromptCandidate};
use crate::operators::OperatorKind;

/// A candidate created (and scored) during one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChildSummary {
    pub id: CandidateId,
    pub origin: Origin,
    pub parent_ids: Vec<CandidateId>,
    pub score: f64,
    pub tokens: usize,
}

impl ChildSummary {
    pub fn of(c: &PromptCandidate) -> Self {
        ChildSummary {
            id: c.id.clone(),
            origin: c.lineage.operator,
            parent_ids: c.lineage.parent_ids.clone(),
            score: c.dev_score.unwrap_or(0.0),
            tokens: c.token_estimate,
        }
    }
}

/// Population state after one step. Index 0 is the initialization step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub index: usize,
    pub phase: PhaseId,
    pub block: Option<EvolutionBlock>,
    /// Operator drawn by the random-evolution baseline.
    pub operator: Option<OperatorKind>,
    pub phase_iteration: usize,
    pub best: f64,
    pub avg: f64,
    pub worst: f64,
    pub mean_tokens: f64,
    /// Gateway calls and tokens spent during this step.
    pub calls: u64,
    pub tokens: u64,
    pub total_calls: u64,
    pub mutation_applications: usize,
    pub improved: bool,
    pub children: Vec<ChildSummary>,
    pub survivors: Vec<CandidateId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub phase: PhaseId,
    pub iterations: usize,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunRecord {
    pub phases: Vec<PhaseSummary>,
    pub snapshots: Vec<Snapshot>,
    pub best: Option<PromptCandidate>,
    /// Optimization iterations, not counting initialization.
    pub total_iterations: usize,
}

impl RunRecord {
    pub fn initial_best(&self) -> Option<f64> {
        self.snapshots.first().map(|s| s.best)
    }

    pub fn final_best(&self) -> Option<f64> {
        self.snapshots.last().map(|s| s.best)
    }

    pub fn mutation_applications(&self) -> usize {
        self.snapshots.iter().map(|s| s.mutation_applications).sum()
    }

    /// Applications per phase.
    pub fn applications_in(&self, phase: PhaseId) -> usize {
        self.snapshots
            .iter()
            .filter(|s| s.phase == phase)
            .map(|s| s.mutation_applications)
            .sum()
    }

    pub fn iterations_in(&self, phase: PhaseId, block: Option<EvolutionBlock>) -> usize {
        self.snapshots
            .iter()
            .filter(|s| s.phase == phase && (block.is_none() || s.block == block))
            .count()
    }

    pub fn phase(&self, phase: PhaseId) -> Option<&PhaseSummary> {
        self.phases.iter().find(|p| p.phase == phase)
    }

    pub(crate) fn note(&mut self, note: impl Into<String>) {
        let note = note.into();
        log::info!("note={note:?}");
        if let Some(p) = self.phases.last_mut() {
            p.notes.push(note);
        }
    }
}
