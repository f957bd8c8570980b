use serde::{Deserialize, Serialize};

use super::Purpose;
use crate::domain::PhaseId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Usage {
    pub calls: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl Usage {
    pub fn tokens(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }

    fn add(&mut self, other: &Usage) {
        self.calls += other.calls;
        self.prompt_tokens += other.prompt_tokens;
        self.completion_tokens += other.completion_tokens;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub phase: PhaseId,
    pub purpose: Purpose,
    #[serde(flatten)]
    pub usage: Usage,
}

/// API usage per (phase, purpose). Entries stay sorted by that pair.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CostLedger {
    entries: Vec<LedgerEntry>,
    cache_hits: u64,
}

impl CostLedger {
    pub fn record(&mut self, phase: PhaseId, purpose: Purpose, prompt_tokens: u64, completion_tokens: u64) {
        let usage = Usage {
            calls: 1,
            prompt_tokens,
            completion_tokens,
        };
        match self
            .entries
            .binary_search_by(|e| (e.phase, e.purpose).cmp(&(phase, purpose)))
        {
            Ok(i) => self.entries[i].usage.add(&usage),
            Err(i) => self.entries.insert(
                i,
                LedgerEntry {
                    phase,
                    purpose,
                    usage,
                },
            ),
        }
    }

    pub fn record_cache_hit(&mut self) {
        self.cache_hits += 1;
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn cache_hits(&self) -> u64 {
        self.cache_hits
    }

    pub fn usage(&self, phase: PhaseId, purpose: Purpose) -> Usage {
        self.entries
            .iter()
            .find(|e| e.phase == phase && e.purpose == purpose)
            .map(|e| e.usage)
            .unwrap_or_default()
    }

    pub fn calls(&self, phase: PhaseId, purpose: Purpose) -> u64 {
        self.usage(phase, purpose).calls
    }

    /// Calls for one purpose summed over phases.
    pub fn calls_for(&self, purpose: Purpose) -> u64 {
        self.entries
            .iter()
            .filter(|e| e.purpose == purpose)
            .map(|e| e.usage.calls)
            .sum()
    }

    pub fn phase_totals(&self, phase: PhaseId) -> Usage {
        let mut u = Usage::default();
        for e in self.entries.iter().filter(|e| e.phase == phase) {
            u.add(&e.usage);
        }
        u
    }

    pub fn totals(&self) -> Usage {
        let mut u = Usage::default();
        for e in &self.entries {
            u.add(&e.usage);
        }
        u
    }

    /// Total calls made for mutation operators (everything but evaluation).
    pub fn mutation_calls(&self) -> u64 {
        self.totals().calls - self.calls_for(Purpose::Evaluation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::OperatorKind;

    #[test]
    fn totals_sum_buckets() {
        let mut l = CostLedger::default();
        l.record(PhaseId::Feedback, Purpose::Operator(OperatorKind::Feedback), 10, 5);
        l.record(PhaseId::Init, Purpose::Evaluation, 3, 1);
        l.record(PhaseId::Feedback, Purpose::Operator(OperatorKind::Feedback), 2, 2);
        assert_eq!(
            l.totals(),
            Usage {
                calls: 3,
                prompt_tokens: 15,
                completion_tokens: 8
            }
        );
        assert_eq!(l.calls(PhaseId::Feedback, Purpose::Operator(OperatorKind::Feedback)), 2);
        assert_eq!(l.mutation_calls(), 2);
        assert_eq!(l.entries()[0].phase, PhaseId::Init);
    }

    #[test]
    fn serializes_with_stable_names() {
        let mut l = CostLedger::default();
        l.record(PhaseId::Evolution, Purpose::Operator(OperatorKind::EdaIndex), 1, 1);
        let s = serde_json::to_string(&l).unwrap();
        assert!(s.contains("\"P2_Evolution\""), "{s}");
        assert!(s.contains("\"EDA_Index\""), "{s}");
        assert_eq!(serde_json::from_str::<CostLedger>(&s).unwrap(), l);
    }
}
