//! Candidates, performance vectors, populations and the selection rules
//! shared by every phase.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::OperatorKind;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CandidateId(String);

impl CandidateId {
    pub fn new(id: impl Into<String>) -> Self {
        CandidateId(id.into())
    }

    /// Engine-issued ids are zero padded so lexicographic order matches
    /// creation order.
    pub fn from_sequence(n: u64) -> Self {
        CandidateId(format!("c{n:06}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CandidateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Phases of a run, in the only order they may be visited.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PhaseId {
    #[serde(rename = "P0_Init")]
    Init,
    #[serde(rename = "P1_Feedback")]
    Feedback,
    #[serde(rename = "P2_Evolution")]
    Evolution,
    #[serde(rename = "P3_Semantic")]
    Semantic,
    Done,
}

impl PhaseId {
    pub fn name(self) -> &'static str {
        match self {
            PhaseId::Init => "P0_Init",
            PhaseId::Feedback => "P1_Feedback",
            PhaseId::Evolution => "P2_Evolution",
            PhaseId::Semantic => "P3_Semantic",
            PhaseId::Done => "Done",
        }
    }

    pub fn next(self) -> PhaseId {
        match self {
            PhaseId::Init => PhaseId::Feedback,
            PhaseId::Feedback => PhaseId::Evolution,
            PhaseId::Evolution => PhaseId::Semantic,
            PhaseId::Semantic | PhaseId::Done => PhaseId::Done,
        }
    }
}

impl fmt::Display for PhaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-dev-example correctness bits, index aligned with the dev split.
///
/// Serialized as a compact string of `0`/`1` characters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct PerformanceVector(Vec<bool>);

impl PerformanceVector {
    pub fn new(bits: Vec<bool>) -> Self {
        PerformanceVector(bits)
    }

    /// Builds a vector from 0/1 integers; any other value is rejected.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        bits.iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::InvalidArgument(format!(
                    "performance vector element must be 0 or 1, got {other}"
                ))),
            })
            .collect::<Result<Vec<_>>>()
            .map(PerformanceVector)
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn zeros(&self) -> usize {
        self.len() - self.ones()
    }

    /// Fraction of ones; 0 for an empty vector.
    pub fn score(&self) -> f64 {
        if self.0.is_empty() {
            0.0
        } else {
            self.ones() as f64 / self.len() as f64
        }
    }
}

impl From<PerformanceVector> for String {
    fn from(v: PerformanceVector) -> String {
        v.0.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

impl TryFrom<String> for PerformanceVector {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(format!("invalid performance bit {other:?}")),
            })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(PerformanceVector)
    }
}

fn check_comparable(a: &PerformanceVector, b: &PerformanceVector) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument(
            "performance vectors must be nonempty".into(),
        ));
    }
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "performance vector length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Number of positions at which the two vectors differ.
pub fn hamming_distance(a: &PerformanceVector, b: &PerformanceVector) -> Result<usize> {
    check_comparable(a, b)?;
    Ok(a.0.iter().zip(&b.0).filter(|(x, y)| x != y).count())
}

/// `1 - hamming / len`; 1.0 exactly when the vectors are identical.
pub fn similarity(a: &PerformanceVector, b: &PerformanceVector) -> Result<f64> {
    let d = hamming_distance(a, b)?;
    Ok(1.0 - d as f64 / a.len() as f64)
}

/// Similarity backends for diversity decisions. Only the Hamming backend is
/// implemented; an embedding-based cosine backend would slot in here.
pub trait SimilarityMetric: Send + Sync {
    fn similarity(&self, a: &PromptCandidate, b: &PromptCandidate) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HammingSimilarity;

impl SimilarityMetric for HammingSimilarity {
    fn similarity(&self, a: &PromptCandidate, b: &PromptCandidate) -> Result<f64> {
        similarity(a.require_vector()?, b.require_vector()?)
    }
}

/// Where a candidate came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Origin {
    #[serde(rename = "seed")]
    Seed,
    #[serde(untagged)]
    Operator(OperatorKind),
}

impl Origin {
    /// Allowed parent counts as an inclusive range (`None` = unbounded).
    pub fn arity(self) -> (usize, Option<usize>) {
        match self {
            Origin::Seed => (0, Some(0)),
            Origin::Operator(op) => op.arity(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Origin::Seed => "seed",
            Origin::Operator(op) => op.name(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lineage {
    pub operator: Origin,
    pub parent_ids: Vec<CandidateId>,
    pub phase: PhaseId,
    pub iteration: usize,
}

impl Lineage {
    pub fn new(
        operator: Origin,
        parent_ids: Vec<CandidateId>,
        phase: PhaseId,
        iteration: usize,
    ) -> Result<Self> {
        let (min, max) = operator.arity();
        let n = parent_ids.len();
        if n < min || max.is_some_and(|m| n > m) {
            return Err(Error::InvalidArgument(format!(
                "{} takes {min}..{} parents, got {n}",
                operator.name(),
                max.map_or("n".to_string(), |m| m.to_string())
            )));
        }
        Ok(Lineage {
            operator,
            parent_ids,
            phase,
            iteration,
        })
    }

    pub fn seed(phase: PhaseId) -> Self {
        Lineage {
            operator: Origin::Seed,
            parent_ids: Vec::new(),
            phase,
            iteration: 0,
        }
    }
}

/// Whitespace-token proxy for prompt length; never below 1.
pub fn token_estimate(text: &str) -> usize {
    text.split_whitespace().count().max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptCandidate {
    pub id: CandidateId,
    pub text: String,
    pub dev_score: Option<f64>,
    pub perf_vector: Option<PerformanceVector>,
    pub lineage: Lineage,
    pub token_estimate: usize,
}

impl PromptCandidate {
    pub fn new(id: CandidateId, text: impl Into<String>, lineage: Lineage) -> Result<Self> {
        let text = text.into();
        if text.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "candidate {id} has empty text"
            )));
        }
        let token_estimate = token_estimate(&text);
        Ok(PromptCandidate {
            id,
            text,
            dev_score: None,
            perf_vector: None,
            lineage,
            token_estimate,
        })
    }

    /// Records the dev evaluation; the score is derived from the vector.
    pub fn set_performance(&mut self, vector: PerformanceVector) {
        self.dev_score = Some(vector.score());
        self.perf_vector = Some(vector);
    }

    pub fn with_performance(mut self, vector: PerformanceVector) -> Self {
        self.set_performance(vector);
        self
    }

    pub fn require_score(&self) -> Result<f64> {
        self.dev_score
            .ok_or_else(|| Error::InvalidState(format!("candidate {} is unscored", self.id)))
    }

    pub fn require_vector(&self) -> Result<&PerformanceVector> {
        self.perf_vector.as_ref().ok_or_else(|| {
            Error::InvalidState(format!("candidate {} has no performance vector", self.id))
        })
    }
}

/// Survivor order: higher score, then fewer tokens, then smaller id.
/// Unscored candidates sort last.
pub fn rank_order(a: &PromptCandidate, b: &PromptCandidate) -> Ordering {
    let sa = a.dev_score.unwrap_or(f64::NEG_INFINITY);
    let sb = b.dev_score.unwrap_or(f64::NEG_INFINITY);
    sb.total_cmp(&sa)
        .then(a.token_estimate.cmp(&b.token_estimate))
        .then_with(|| a.id.cmp(&b.id))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    members: Vec<PromptCandidate>,
    capacity: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreSummary {
    pub best: f64,
    pub avg: f64,
    pub worst: f64,
    pub mean_tokens: f64,
}

impl Population {
    pub fn new(members: Vec<PromptCandidate>, capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument(
                "population capacity must be positive".into(),
            ));
        }
        if members.len() > capacity {
            return Err(Error::InvalidArgument(format!(
                "{} members exceed capacity {capacity}",
                members.len()
            )));
        }
        let mut ids: Vec<&CandidateId> = members.iter().map(|m| &m.id).collect();
        ids.sort();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!(
                "duplicate candidate id {}",
                w[0]
            )));
        }
        Ok(Population { members, capacity })
    }

    pub fn members(&self) -> &[PromptCandidate] {
        &self.members
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn get(&self, id: &CandidateId) -> Option<&PromptCandidate> {
        self.members.iter().find(|m| &m.id == id)
    }

    /// Members in survivor order.
    pub fn ranked(&self) -> Vec<&PromptCandidate> {
        let mut v: Vec<&PromptCandidate> = self.members.iter().collect();
        v.sort_by(|a, b| rank_order(a, b));
        v
    }

    pub fn best(&self) -> Option<&PromptCandidate> {
        self.members.iter().min_by(|a, b| rank_order(a, b))
    }

    pub fn best_score(&self) -> Option<f64> {
        self.best().and_then(|b| b.dev_score)
    }

    pub fn summary(&self) -> Option<ScoreSummary> {
        if self.members.is_empty() {
            return None;
        }
        let scores: Vec<f64> = self
            .members
            .iter()
            .map(|m| m.dev_score.unwrap_or(0.0))
            .collect();
        let n = scores.len() as f64;
        Some(ScoreSummary {
            best: scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            avg: scores.iter().sum::<f64>() / n,
            worst: scores.iter().copied().fold(f64::INFINITY, f64::min),
            mean_tokens: self.members.iter().map(|m| m.token_estimate as f64).sum::<f64>() / n,
        })
    }

    pub fn ids(&self) -> Vec<CandidateId> {
        self.members.iter().map(|m| m.id.clone()).collect()
    }
}

/// Greedy survivor selection: the top `capacity` of parents and children.
pub fn select_next_generation(
    parents: &Population,
    children: Vec<PromptCandidate>,
    capacity: usize,
) -> Result<Population> {
    let mut pool: Vec<PromptCandidate> = parents.members.iter().cloned().chain(children).collect();
    if let Some(c) = pool.iter().find(|c| c.dev_score.is_none()) {
        return Err(Error::InvalidState(format!(
            "candidate {} is unscored",
            c.id
        )));
    }
    pool.sort_by(rank_order);
    pool.dedup_by(|a, b| a.id == b.id);
    pool.truncate(capacity);
    Population::new(pool, capacity)
}

/// The pool member (other than `anchor`) farthest from it in Hamming
/// distance. Ties go to the higher score, then the smaller id.
pub fn select_distinct_partner<'a>(
    anchor: &PromptCandidate,
    pool: &'a Population,
) -> Result<&'a PromptCandidate> {
    let anchor_vec = anchor.require_vector()?;
    let mut best: Option<(usize, &PromptCandidate)> = None;
    for m in pool.members.iter().filter(|m| m.id != anchor.id) {
        let d = hamming_distance(anchor_vec, m.require_vector()?)?;
        let better = match best {
            None => true,
            Some((bd, b)) => {
                d > bd
                    || (d == bd
                        && match m
                            .dev_score
                            .unwrap_or(0.0)
                            .total_cmp(&b.dev_score.unwrap_or(0.0))
                        {
                            Ordering::Greater => true,
                            Ordering::Equal => m.id < b.id,
                            Ordering::Less => false,
                        })
            }
        };
        if better {
            best = Some((d, m));
        }
    }
    best.map(|(_, m)| m).ok_or_else(|| {
        Error::InvalidState(format!(
            "no partner distinct from {} in the pool",
            anchor.id
        ))
    })
}
