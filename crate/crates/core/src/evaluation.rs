//! Scoring a prompt over a dataset split.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::domain::PerformanceVector;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::gateway::{CompletionRequest, Gateway, GatewayError, Purpose};
use crate::operators::WrongCase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskExample {
    pub input: String,
    #[serde(rename = "output")]
    pub expected: Vec<String>,
    pub split: Split,
}

impl TaskExample {
    pub fn new(input: impl Into<String>, expected: Vec<String>, split: Split) -> Result<Self> {
        let ex = TaskExample {
            input: input.into(),
            expected,
            split,
        };
        ex.validate()?;
        Ok(ex)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input.is_empty() {
            return Err(Error::Validation("example input is empty".into()));
        }
        if self.expected.is_empty() {
            return Err(Error::Validation(format!(
                "example {:?} has no expected answers",
                self.input
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    ExactAny,
    ContainsAny,
    MultipleChoiceLetter,
}

impl MatchMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exact_any" | "exactany" => Some(MatchMode::ExactAny),
            "contains_any" | "containsany" => Some(MatchMode::ContainsAny),
            "multiple_choice_letter" | "multiplechoiceletter" => Some(MatchMode::MultipleChoiceLetter),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MatchMode::ExactAny => "exact_any",
            MatchMode::ContainsAny => "contains_any",
            MatchMode::MultipleChoiceLetter => "multiple_choice_letter",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub score: f64,
    pub perf_vector: PerformanceVector,
    pub wrong_cases: Vec<WrongCase>,
}

impl EvalResult {
    /// Assembles a result from per-example outcomes in dataset order.
    pub fn from_outcomes(examples: &[TaskExample], outputs: &[String], bits: &[bool]) -> Self {
        let perf_vector = PerformanceVector::new(bits.to_vec());
        let wrong_cases = examples
            .iter()
            .zip(outputs)
            .zip(bits)
            .filter(|(_, &ok)| !ok)
            .map(|((ex, out), _)| WrongCase {
                input: ex.input.clone(),
                expected: ex.expected.clone(),
                actual: out.clone(),
            })
            .collect();
        EvalResult {
            score: perf_vector.score(),
            perf_vector,
            wrong_cases,
        }
    }
}

const QUOTE_PAIRS: [(char, char); 8] = [
    ('\'', '\''),
    ('"', '"'),
    ('`', '`'),
    ('(', ')'),
    ('[', ']'),
    ('{', '}'),
    ('‘', '’'),
    ('“', '”'),
];

fn strip_trailing_periods(s: &str) -> &str {
    s.trim_end_matches('.').trim_end()
}

/// Canonical form for answer comparison.
pub fn normalize(text: &str) -> String {
    let lowered = text.trim().to_lowercase();
    let mut s = strip_trailing_periods(&lowered).trim();
    for (open, close) in QUOTE_PAIRS {
        if s.chars().count() >= 2 && s.starts_with(open) && s.ends_with(close) {
            s = &s[open.len_utf8()..s.len() - close.len_utf8()];
            break;
        }
    }
    let collapsed = s.split_whitespace().collect::<Vec<_>>().join(" ");
    strip_trailing_periods(&collapsed).to_string()
}

/// First `(X)` with X in A–Z, else the first standalone A–E token.
pub fn extract_choice_letter(text: &str) -> Option<char> {
    let chars: Vec<char> = text.chars().collect();
    for w in chars.windows(3) {
        if w[0] == '(' && w[1].is_ascii_uppercase() && w[2] == ')' {
            return Some(w[1]);
        }
    }
    text.split(|c: char| !c.is_alphanumeric())
        .find_map(|tok| {
            let mut it = tok.chars();
            match (it.next(), it.next()) {
                (Some(c), None) if ('A'..='E').contains(&c) => Some(c),
                _ => None,
            }
        })
}

fn expected_letter(expected: &str) -> Option<char> {
    let t: String = expected
        .chars()
        .filter(|c| !matches!(c, '(' | ')') && !c.is_whitespace())
        .collect();
    let mut it = t.chars();
    match (it.next(), it.next()) {
        (Some(c), None) if c.is_ascii_alphabetic() => Some(c.to_ascii_uppercase()),
        _ => None,
    }
}

pub fn match_output(model_out: &str, expected: &[String], mode: MatchMode) -> bool {
    match mode {
        MatchMode::ExactAny => {
            let out = normalize(model_out);
            expected.iter().any(|e| normalize(e) == out)
        }
        MatchMode::ContainsAny => {
            let out = normalize(model_out);
            expected.iter().any(|e| out.contains(&normalize(e)))
        }
        MatchMode::MultipleChoiceLetter => match extract_choice_letter(model_out) {
            Some(got) => expected.iter().any(|e| expected_letter(e) == Some(got)),
            None => false,
        },
    }
}

/// `[P; Q]`: prompt, blank line, example input, newline.
pub fn compose_query(prompt: &str, input: &str) -> String {
    format!("{prompt}\n\n{input}\n")
}

/// Inverse of [`compose_query`] for inputs without blank lines.
pub fn split_query(query: &str) -> Option<(&str, &str)> {
    let body = query.strip_suffix('\n')?;
    body.rsplit_once("\n\n")
}

/// Model outputs keyed by prompt then example input.
pub type EvalCacheSnapshot = BTreeMap<String, BTreeMap<String, String>>;

/// Scores prompts through a gateway, memoizing model outputs per
/// (prompt, example input) so surviving candidates are never re-queried.
pub struct Evaluator {
    pub temperature: f64,
    pub max_tokens: Option<u32>,
    pub execution: Execution,
    cache: Mutex<HashMap<(String, String), String>>,
}

impl Default for Evaluator {
    fn default() -> Self {
        Evaluator::new(0.0)
    }
}

impl Evaluator {
    pub fn new(temperature: f64) -> Self {
        Evaluator {
            temperature,
            max_tokens: None,
            execution: Execution::default(),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn with_max_tokens(mut self, max_tokens: Option<u32>) -> Self {
        self.max_tokens = max_tokens;
        self
    }

    pub fn cache_len(&self) -> usize {
        self.cache.lock().len()
    }

    pub fn snapshot_cache(&self) -> EvalCacheSnapshot {
        let mut out = EvalCacheSnapshot::new();
        for ((prompt, input), output) in self.cache.lock().iter() {
            out.entry(prompt.clone())
                .or_default()
                .insert(input.clone(), output.clone());
        }
        out
    }

    pub fn restore_cache(&self, snapshot: &EvalCacheSnapshot) {
        let mut cache = self.cache.lock();
        cache.clear();
        for (prompt, answers) in snapshot {
            for (input, output) in answers {
                cache.insert((prompt.clone(), input.clone()), output.clone());
            }
        }
    }

    fn answer(&self, prompt: &str, input: &str, gateway: &Gateway) -> Result<String, GatewayError> {
        let key = (prompt.to_string(), input.to_string());
        if let Some(hit) = self.cache.lock().get(&key) {
            return Ok(hit.clone());
        }
        let req = CompletionRequest::new(compose_query(prompt, input), self.temperature, Purpose::Evaluation)
            .with_max_tokens(self.max_tokens);
        let text = gateway.complete(&req)?.text;
        Ok(self.cache.lock().entry(key).or_insert(text).clone())
    }

    fn check_examples(examples: &[TaskExample]) -> Result<()> {
        let first = examples
            .first()
            .ok_or_else(|| Error::InvalidArgument("no examples to evaluate on".into()))?;
        if examples.iter().any(|e| e.split != first.split) {
            return Err(Error::InvalidArgument("examples span several splits".into()));
        }
        Ok(())
    }

    pub fn evaluate(
        &self,
        prompt: &str,
        examples: &[TaskExample],
        mode: MatchMode,
        gateway: &Gateway,
    ) -> Result<EvalResult> {
        Ok(self.evaluate_many(&[prompt], examples, mode, gateway)?.remove(0))
    }

    /// Evaluates several prompts, fanning every (prompt, example) query out
    /// through the configured execution mode.
    pub fn evaluate_many(
        &self,
        prompts: &[&str],
        examples: &[TaskExample],
        mode: MatchMode,
        gateway: &Gateway,
    ) -> Result<Vec<EvalResult>> {
        Self::check_examples(examples)?;
        if prompts.iter().any(|p| p.is_empty()) {
            return Err(Error::InvalidArgument("cannot evaluate an empty prompt".into()));
        }
        let jobs: Vec<(usize, usize)> = (0..prompts.len())
            .flat_map(|p| (0..examples.len()).map(move |e| (p, e)))
            .collect();
        let answers = self
            .execution
            .map(&jobs, |&(p, e)| self.answer(prompts[p], &examples[e].input, gateway));
        let total = answers.len();
        let completed = answers.iter().filter(|a| a.is_ok()).count();
        let mut outputs = Vec::with_capacity(total);
        for a in answers {
            match a {
                Ok(text) => outputs.push(text),
                Err(source) => {
                    return Err(Error::Evaluation {
                        completed,
                        total,
                        source,
                    })
                }
            }
        }
        Ok(outputs
            .chunks(examples.len())
            .map(|outs| {
                let bits: Vec<bool> = examples
                    .iter()
                    .zip(outs)
                    .map(|(ex, out)| match_output(out, &ex.expected, mode))
                    .collect();
                EvalResult::from_outcomes(examples, outs, &bits)
            })
            .collect())
    }
}
