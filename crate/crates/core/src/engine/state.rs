use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::domain::PhaseId;

/// The two halves of the evolution phase, run in this order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EvolutionBlock {
    #[serde(rename = "EDA")]
    Eda,
    Crossover,
}

impl EvolutionBlock {
    pub fn name(self) -> &'static str {
        match self {
            EvolutionBlock::Eda => "EDA",
            EvolutionBlock::Crossover => "Crossover",
        }
    }
}

/// Stop-criterion bookkeeping for the running phase (or evolution block).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub phase: PhaseId,
    pub block: Option<EvolutionBlock>,
    pub iteration: usize,
    pub no_improve: usize,
    pub tolerance: usize,
    pub min_iterations: usize,
    pub best_score_seen: f64,
}

impl PhaseState {
    pub fn new(phase: PhaseId, block: Option<EvolutionBlock>, tolerance: usize, min_iterations: usize, best: f64) -> Self {
        PhaseState {
            phase,
            block,
            iteration: 0,
            no_improve: 0,
            tolerance,
            min_iterations,
            best_score_seen: best,
        }
    }

    /// Fresh counters for `phase`/`block` with tolerances from `config`.
    pub fn enter(phase: PhaseId, block: Option<EvolutionBlock>, config: &RunConfig, best: f64) -> Self {
        let (tolerance, min_iterations) = match (phase, block) {
            (PhaseId::Feedback, _) => (config.tolerance_feedback, config.min_iterations_feedback),
            (PhaseId::Evolution, Some(EvolutionBlock::Crossover)) => {
                (config.tolerance_crossover, config.min_iterations_crossover)
            }
            (PhaseId::Evolution, _) => (config.tolerance_eda, config.min_iterations_eda),
            (PhaseId::Semantic, _) => (config.tolerance_semantic, config.min_iterations_semantic),
            (PhaseId::Init | PhaseId::Done, _) => (1, 0),
        };
        PhaseState::new(phase, block, tolerance, min_iterations, best)
    }

    /// Books one finished iteration whose surviving best is `best`.
    /// Returns whether it counted as an improvement.
    pub fn record_iteration(&mut self, best: f64, epsilon: f64) -> bool {
        self.iteration += 1;
        if best > self.best_score_seen + epsilon {
            self.best_score_seen = best;
            self.no_improve = 0;
            true
        } else {
            self.no_improve += 1;
            false
        }
    }

    pub fn should_advance(&self) -> bool {
        should_advance(self)
    }
}

pub fn should_advance(state: &PhaseState) -> bool {
    state.no_improve >= state.tolerance && state.iteration >= state.min_iterations
}
