//! A deterministic stand-in for a language model.
//!
//! [`SyntheticLandscape`] hides a target string. A prompt's fitness is one
//! minus its normalized edit distance to the target, and an example is
//! answered correctly when its (hashed) difficulty is below that fitness
//! plus a small per-(prompt, example) jitter. Operator calls are answered by
//! applying seeded single-character edits that move toward the target with
//! operator-specific odds. Every response is a pure function of the request.

use std::collections::HashMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::evaluation::{match_output, split_query, EvalResult, MatchMode, Split, TaskExample};
use crate::gateway::{CompletionRequest, MockBackend, Purpose, Responder};
use crate::operators::templates::{template, TemplateId};
use crate::operators::{parse_prompt_list, OperatorKind};
use crate::task::{split_dataset, SplitCounts, TaskFile};

/// Fitness landscape used by the operator lab.
pub trait Landscape: Send + Sync {
    /// Deterministic starting prompts for lab initialization `init`.
    fn initial_population(&self, init: usize, size: usize) -> Vec<String>;

    /// Scores a prompt without going through a gateway.
    fn evaluate(&self, text: &str) -> EvalResult;
}

/// FNV-1a followed by a splitmix finalizer.
pub fn stable_hash(parts: &[&str]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for (i, part) in parts.iter().enumerate() {
        if i > 0 {
            h ^= 0xff;
            h = h.wrapping_mul(0x100_0000_01b3);
        }
        for b in part.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x100_0000_01b3);
        }
    }
    splitmix(h)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn unit(h: u64) -> f64 {
    (h >> 11) as f64 / (1u64 << 53) as f64
}

pub fn levenshtein(a: &[char], b: &[char]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Edit {
    Substitute(usize, char),
    Delete(usize),
    Insert(usize, char),
}

fn apply(text: &mut Vec<char>, edit: Edit) {
    match edit {
        Edit::Substitute(i, c) => text[i] = c,
        Edit::Delete(i) => {
            text.remove(i);
        }
        Edit::Insert(i, c) => text.insert(i, c),
    }
}

/// Edits of one optimal script turning `from` into `to`. Applying any single
/// one of them lowers the distance by exactly one.
fn optimal_edits(from: &[char], to: &[char]) -> Vec<Edit> {
    let (n, m) = (from.len(), to.len());
    let mut d = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = d[i - 1][j - 1] + usize::from(from[i - 1] != to[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    let (mut i, mut j) = (n, m);
    let mut edits = Vec::new();
    while i > 0 || j > 0 {
        if i > 0 && j > 0 && d[i][j] == d[i - 1][j - 1] + usize::from(from[i - 1] != to[j - 1]) {
            if from[i - 1] != to[j - 1] {
                edits.push(Edit::Substitute(i - 1, to[j - 1]));
            }
            i -= 1;
            j -= 1;
        } else if i > 0 && d[i][j] == d[i - 1][j] + 1 {
            edits.push(Edit::Delete(i - 1));
            i -= 1;
        } else {
            edits.push(Edit::Insert(i, to[j - 1]));
            j -= 1;
        }
    }
    edits
}

/// Probability that one scripted edit moves toward the target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Odds {
    pub feedback: f64,
    pub semantic: f64,
    pub eda: f64,
    pub eda_index: f64,
    pub crossover: f64,
    pub crossover_distinct: f64,
}

impl Default for Odds {
    fn default() -> Self {
        Odds {
            feedback: 0.7,
            semantic: 0.5,
            eda: 0.6,
            eda_index: 0.65,
            crossover: 0.55,
            crossover_distinct: 0.6,
        }
    }
}

impl Odds {
    fn of(&self, op: OperatorKind) -> f64 {
        match op {
            OperatorKind::Feedback => self.feedback,
            OperatorKind::Semantic | OperatorKind::Lamarckian => self.semantic,
            OperatorKind::Eda => self.eda,
            OperatorKind::EdaIndex => self.eda_index,
            OperatorKind::Crossover => self.crossover,
            OperatorKind::CrossoverDistinct => self.crossover_distinct,
        }
    }
}

pub const WRONG_ANSWER: &str = "I am not sure.";

#[derive(Debug, Clone)]
pub struct SyntheticLandscape {
    target: Vec<char>,
    alphabet: Vec<char>,
    answers: HashMap<String, Vec<String>>,
    dev: Vec<TaskExample>,
    mode: MatchMode,
    pub odds: Odds,
    /// Half-width of the per-(prompt, example) difficulty jitter.
    pub jitter: f64,
    /// Fraction of the target corrupted by initialization, as a range.
    pub init_corruption: (f64, f64),
}

impl SyntheticLandscape {
    /// A landscape answering the examples of `task`.
    pub fn new(target: &str, task: &TaskFile) -> Self {
        let target: Vec<char> = target.chars().filter(|c| *c != '\n').collect();
        let mut alphabet: Vec<char> = ('a'..='z').chain([' ']).chain(target.iter().copied()).collect();
        alphabet.sort_unstable();
        alphabet.dedup();
        let answers = task
            .examples
            .iter()
            .map(|e| (e.input.clone(), e.expected.clone()))
            .collect();
        SyntheticLandscape {
            target,
            alphabet,
            answers,
            dev: task.split(Split::Dev),
            mode: task.match_mode,
            odds: Odds::default(),
            jitter: 0.05,
            init_corruption: (0.3, 0.6),
        }
    }

    pub fn with_odds(mut self, odds: Odds) -> Self {
        self.odds = odds;
        self
    }

    pub fn target(&self) -> String {
        self.target.iter().collect()
    }

    pub fn fitness(&self, text: &str) -> f64 {
        let t: Vec<char> = text.chars().collect();
        let longest = t.len().max(self.target.len());
        if longest == 0 {
            return 1.0;
        }
        1.0 - levenshtein(&t, &self.target) as f64 / longest as f64
    }

    fn difficulty(input: &str) -> f64 {
        unit(stable_hash(&["difficulty", input]))
    }

    /// Whether `prompt` answers `input` correctly.
    pub fn solves(&self, prompt: &str, input: &str) -> bool {
        self.solves_with(self.fitness(prompt), prompt, input)
    }

    fn solves_with(&self, fitness: f64, prompt: &str, input: &str) -> bool {
        let jitter = (unit(stable_hash(&["jitter", prompt, input])) * 2.0 - 1.0) * self.jitter;
        Self::difficulty(input) <= fitness + jitter
    }

    fn answer(&self, prompt: &str, input: &str) -> String {
        match self.answers.get(input) {
            Some(expected) if self.solves(prompt, input) => expected[0].clone(),
            _ => WRONG_ANSWER.to_string(),
        }
    }

    fn rng_for(req: &CompletionRequest) -> ChaCha8Rng {
        let hint = req.seed_hint.unwrap_or(0);
        ChaCha8Rng::seed_from_u64(hint ^ stable_hash(&[&req.prompt_text]))
    }

    fn random_edit(&self, text: &[char], rng: &mut ChaCha8Rng) -> Edit {
        let c = *self.alphabet.choose(rng).unwrap_or(&' ');
        match (rng.gen_range(0..3), text.is_empty()) {
            (_, true) | (0, _) => Edit::Insert(rng.gen_range(0..=text.len()), c),
            (1, _) => Edit::Substitute(rng.gen_range(0..text.len()), c),
            _ => Edit::Delete(rng.gen_range(0..text.len())),
        }
    }

    /// One edit: toward the target with probability `p`, random otherwise.
    fn step(&self, text: &mut Vec<char>, p: f64, rng: &mut ChaCha8Rng) {
        let toward = rng.gen_bool(p.clamp(0.0, 1.0));
        let edit = if toward {
            match optimal_edits(text, &self.target).choose(rng) {
                Some(&e) => e,
                None => return,
            }
        } else {
            self.random_edit(text, rng)
        };
        apply(text, edit);
    }

    /// The target with a random fraction of its characters edited.
    pub fn corrupt(&self, rng: &mut ChaCha8Rng) -> String {
        let (lo, hi) = self.init_corruption;
        let frac = lo + (hi - lo) * rng.gen::<f64>();
        let edits = ((self.target.len() as f64 * frac).round() as usize).max(1);
        let mut text = self.target.clone();
        for _ in 0..edits {
            let e = self.random_edit(&text, rng);
            apply(&mut text, e);
        }
        finish(text)
    }

    fn crossover(&self, a: &str, b: &str, rng: &mut ChaCha8Rng) -> Vec<char> {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        let cut: f64 = rng.gen();
        let ia = (a.len() as f64 * cut).round() as usize;
        let ib = (b.len() as f64 * cut).round() as usize;
        a[..ia.min(a.len())].iter().chain(&b[ib.min(b.len())..]).copied().collect()
    }

    fn mutate(&self, op: OperatorKind, req: &CompletionRequest) -> Option<String> {
        let mut rng = Self::rng_for(req);
        let slot = |id: TemplateId, name: &str| -> Option<String> {
            template(id)
                .extract(&req.prompt_text)?
                .into_iter()
                .find(|(k, _)| k == name)
                .map(|(_, v)| v)
        };
        let p = self.odds.of(op);
        let text = match op {
            OperatorKind::Lamarckian => return Some(self.corrupt(&mut rng)),
            OperatorKind::Feedback => {
                if template(TemplateId::FeedbackGeneration).extract(&req.prompt_text).is_some() {
                    return Some(format!("Be precise about the task. (note {})", rng.gen::<u32>()));
                }
                let mut t: Vec<char> = slot(TemplateId::FeedbackApplication, "existing prompt")?.chars().collect();
                self.step(&mut t, p, &mut rng);
                self.step(&mut t, p, &mut rng);
                t
            }
            OperatorKind::Semantic => {
                let mut t: Vec<char> = slot(TemplateId::Semantic, "existing prompt")?.chars().collect();
                self.step(&mut t, p, &mut rng);
                t
            }
            OperatorKind::Eda | OperatorKind::EdaIndex => {
                let id = if op == OperatorKind::Eda { TemplateId::Eda } else { TemplateId::EdaIndex };
                let parents = parse_prompt_list(&slot(id, "existing prompt")?);
                // the indexed list is worst first; favor later entries
                let weights: Vec<usize> = (1..=parents.len())
                    .map(|i| if op == OperatorKind::EdaIndex { i } else { 1 })
                    .collect();
                let pick = |rng: &mut ChaCha8Rng| -> usize {
                    let total: usize = weights.iter().sum();
                    let mut r = rng.gen_range(0..total);
                    for (i, w) in weights.iter().enumerate() {
                        if r < *w {
                            return i;
                        }
                        r -= w;
                    }
                    weights.len() - 1
                };
                let a = pick(&mut rng);
                let b = pick(&mut rng);
                let mut t = self.crossover(&parents[a], &parents[b], &mut rng);
                self.step(&mut t, p, &mut rng);
                t
            }
            OperatorKind::Crossover | OperatorKind::CrossoverDistinct => {
                let a = slot(TemplateId::Crossover, "prompt 1")?;
                let b = slot(TemplateId::Crossover, "prompt 2")?;
                let mut t = self.crossover(&a, &b, &mut rng);
                self.step(&mut t, p, &mut rng);
                t
            }
        };
        Some(finish(text))
    }

    /// Mock backend answering every purpose from this landscape.
    pub fn backend(self: &Arc<Self>) -> MockBackend {
        MockBackend::new()
            .named("synthetic")
            .with_shared_responder(self.clone() as Arc<dyn Responder>)
    }
}

/// Prompts never come back empty or with surrounding whitespace.
fn finish(text: Vec<char>) -> String {
    let s: String = text.into_iter().collect();
    match s.trim() {
        "" => "?".to_string(),
        t => t.to_string(),
    }
}

impl Responder for SyntheticLandscape {
    fn respond(&self, req: &CompletionRequest) -> Option<String> {
        match req.purpose {
            Purpose::Evaluation => {
                let (prompt, input) = split_query(&req.prompt_text)?;
                Some(self.answer(prompt, input))
            }
            Purpose::Operator(op) => self.mutate(op, req),
        }
    }
}

impl Landscape for SyntheticLandscape {
    fn initial_population(&self, init: usize, size: usize) -> Vec<String> {
        (0..size)
            .map(|j| {
                let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(&["init", &init.to_string(), &j.to_string()]));
                self.corrupt(&mut rng)
            })
            .collect()
    }

    fn evaluate(&self, text: &str) -> EvalResult {
        let fitness = self.fitness(text);
        let outputs: Vec<String> = self
            .dev
            .iter()
            .map(|e| {
                if self.solves_with(fitness, text, &e.input) {
                    e.expected[0].clone()
                } else {
                    WRONG_ANSWER.to_string()
                }
            })
            .collect();
        let bits: Vec<bool> = self
            .dev
            .iter()
            .zip(&outputs)
            .map(|(e, o)| match_output(o, &e.expected, self.mode))
            .collect();
        EvalResult::from_outcomes(&self.dev, &outputs, &bits)
    }
}

/// Subtraction problems (`"92 24"` -> `"68"`), split by `counts`.
pub fn synthetic_task(name: &str, seed: u64, counts: SplitCounts) -> Result<TaskFile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = std::collections::HashSet::new();
    let mut pool = Vec::with_capacity(counts.total());
    while pool.len() < counts.total() {
        let a: u32 = rng.gen_range(10..100);
        let b: u32 = rng.gen_range(10..=a);
        let input = format!("{a} {b}");
        if seen.insert(input.clone()) {
            pool.push(TaskExample::new(input, vec![(a - b).to_string()], Split::Train)?);
        }
    }
    let examples = split_dataset(&pool, seed, counts)?;
    let task = TaskFile {
        name: name.to_string(),
        match_mode: MatchMode::ExactAny,
        examples,
        seed_prompts: vec![
            "Compute the result.".to_string(),
            "Subtract the numbers.".to_string(),
        ],
    };
    task.validate()?;
    Ok(task)
}
