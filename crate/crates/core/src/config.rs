//! Flat `key = value` configuration files.
//!
//! One file carries run, backend and lab settings. Blank lines and lines
//! starting with `#` are ignored; unknown or repeated keys are errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evaluation::MatchMode;
use crate::exec::Execution;
use crate::operators::OperatorKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    IoPairs,
    SeedPrompts,
}

impl InitMode {
    pub fn name(self) -> &'static str {
        match self {
            InitMode::IoPairs => "io_pairs",
            InitMode::SeedPrompts => "seed_prompts",
        }
    }
}

impl FromStr for InitMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "io_pairs" => Ok(InitMode::IoPairs),
            "seed_prompts" => Ok(InitMode::SeedPrompts),
            _ => Err(format!("expected io_pairs or seed_prompts, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Mock,
    Live,
    Replay,
}

impl BackendKind {
    pub fn name(self) -> &'static str {
        match self {
            BackendKind::Mock => "mock",
            BackendKind::Live => "live",
            BackendKind::Replay => "replay",
        }
    }
}

impl FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "mock" => Ok(BackendKind::Mock),
            "live" => Ok(BackendKind::Live),
            "replay" => Ok(BackendKind::Replay),
            _ => Err(format!("expected live, mock or replay, got {s:?}")),
        }
    }
}

/// Optimizer settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub init_mode: InitMode,
    pub init_population: usize,
    pub phase_population: usize,
    pub tolerance_feedback: usize,
    pub tolerance_eda: usize,
    pub tolerance_crossover: usize,
    pub tolerance_semantic: usize,
    pub min_iterations_feedback: usize,
    pub min_iterations_eda: usize,
    pub min_iterations_crossover: usize,
    pub min_iterations_semantic: usize,
    pub eda_threshold: f64,
    /// Upper bound on EDA parents; `None` means the population size.
    pub eda_max_k: Option<usize>,
    pub demo_pairs_m: usize,
    pub wrong_case_batch: usize,
    pub operator_temperature: f64,
    pub eval_temperature: f64,
    pub operator_max_tokens: Option<u32>,
    pub eval_max_tokens: Option<u32>,
    pub improvement_epsilon: f64,
    pub rng_seed: u64,
    /// Overrides the task file's match mode when set.
    pub match_mode: Option<MatchMode>,
    /// 2 = plain and variant child per global iteration; 1 = alternate.
    pub children_per_iteration: usize,
    pub execution: Execution,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            init_mode: InitMode::IoPairs,
            init_population: 15,
            phase_population: 5,
            tolerance_feedback: 1,
            tolerance_eda: 4,
            tolerance_crossover: 4,
            tolerance_semantic: 1,
            min_iterations_feedback: 0,
            min_iterations_eda: 0,
            min_iterations_crossover: 0,
            min_iterations_semantic: 0,
            eda_threshold: 0.7,
            eda_max_k: None,
            demo_pairs_m: 5,
            wrong_case_batch: 5,
            operator_temperature: 0.5,
            eval_temperature: 0.0,
            operator_max_tokens: None,
            eval_max_tokens: None,
            improvement_epsilon: 0.0,
            rng_seed: 0,
            match_mode: None,
            children_per_iteration: 2,
            execution: Execution::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("init_population", self.init_population),
            ("phase_population", self.phase_population),
            ("tolerance_feedback", self.tolerance_feedback),
            ("tolerance_eda", self.tolerance_eda),
            ("tolerance_crossover", self.tolerance_crossover),
            ("tolerance_semantic", self.tolerance_semantic),
            ("demo_pairs_m", self.demo_pairs_m),
            ("wrong_case_batch", self.wrong_case_batch),
        ];
        for (key, v) in counts {
            if v == 0 {
                return Err(Error::Validation(format!("{key} must be positive")));
            }
        }
        if self.init_population < self.phase_population {
            return Err(Error::Validation(format!(
                "init_population {} is smaller than phase_population {}",
                self.init_population, self.phase_population
            )));
        }
        if self.eda_max_k == Some(0) {
            return Err(Error::Validation("eda_max_k must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.eda_threshold) {
            return Err(Error::Validation(format!("eda_threshold {} outside [0, 1]", self.eda_threshold)));
        }
        for (key, t) in [
            ("operator_temperature", self.operator_temperature),
            ("eval_temperature", self.eval_temperature),
        ] {
            if !(0.0..=2.0).contains(&t) {
                return Err(Error::Validation(format!("{key} {t} outside [0, 2]")));
            }
        }
        if !(self.improvement_epsilon >= 0.0 && self.improvement_epsilon.is_finite()) {
            return Err(Error::Validation("improvement_epsilon must be a finite nonnegative number".into()));
        }
        if !matches!(self.children_per_iteration, 1 | 2) {
            return Err(Error::Validation("children_per_iteration must be 1 or 2".into()));
        }
        if self.operator_max_tokens == Some(0) || self.eval_max_tokens == Some(0) {
            return Err(Error::Validation("max tokens must be positive".into()));
        }
        Ok(())
    }

    pub fn eda_max_k(&self) -> usize {
        self.eda_max_k.unwrap_or(self.phase_population)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub backend: BackendKind,
    pub endpoint: String,
    pub model: String,
    /// JSONL response cache; read by `replay`, appended to by other backends.
    pub replay_cache: Option<PathBuf>,
    pub max_in_flight: usize,
    pub retry_attempts: u32,
    pub retry_base_ms: u64,
    /// Hidden target of the synthetic landscape used by the mock backend.
    pub mock_target: String,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            backend: BackendKind::Mock,
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-3.5-turbo".into(),
            replay_cache: None,
            max_in_flight: 8,
            retry_attempts: 3,
            retry_base_ms: 1000,
            mock_target: "Subtract the second number from the first and answer with the difference".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabConfig {
    pub operators: Vec<OperatorKind>,
    pub inits: usize,
    pub rounds: usize,
    pub steps: usize,
    pub population: usize,
    pub eda_threshold: f64,
}

impl Default for LabConfig {
    fn default() -> Self {
        LabConfig {
            operators: OperatorKind::ALL
                .into_iter()
                .filter(|k| *k != OperatorKind::Lamarckian)
                .collect(),
            inits: 4,
            rounds: 5,
            steps: 5,
            population: 5,
            eda_threshold: 0.7,
        }
    }
}

impl LabConfig {
    pub fn validate(&self) -> Result<()> {
        if self.inits == 0 || self.rounds == 0 || self.steps == 0 {
            return Err(Error::InvalidArgument("lab inits, rounds and steps must be positive".into()));
        }
        if self.population < 2 {
            return Err(Error::InvalidArgument("lab population needs at least 2 members".into()));
        }
        if self.operators.is_empty() {
            return Err(Error::InvalidArgument("lab needs at least one operator".into()));
        }
        if !(0.0..=1.0).contains(&self.eda_threshold) {
            return Err(Error::InvalidArgument(format!("lab_eda_threshold {} outside [0, 1]", self.eda_threshold)));
        }
        if self.operators.contains(&OperatorKind::Lamarckian) {
            return Err(Error::InvalidArgument("Lamarckian only creates initial prompts".into()));
        }
        Ok(())
    }

    pub fn applications_per_operator(&self) -> usize {
        self.inits * self.rounds * self.steps
    }
}

/// Everything one config file can hold.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Settings {
    pub run: RunConfig,
    pub backend: BackendConfig,
    pub lab: LabConfig,
}

fn value<T: FromStr>(key: &str, raw: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    raw.parse::<T>().map_err(|e| format!("{key}: cannot parse {raw:?}: {e}"))
}

fn optional<T: FromStr>(key: &str, raw: &str) -> std::result::Result<Option<T>, String>
where
    T::Err: std::fmt::Display,
{
    if raw.is_empty() || raw == "none" {
        Ok(None)
    } else {
        value(key, raw).map(Some)
    }
}

fn operator_list(raw: &str) -> std::result::Result<Vec<OperatorKind>, String> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| OperatorKind::from_name(s).ok_or_else(|| format!("unknown operator {s:?}")))
        .collect()
}

fn show<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "none".to_string(), |v| v.to_string())
}

impl Settings {
    fn set(&mut self, key: &str, raw: &str) -> std::result::Result<(), String> {
        let r = &mut self.run;
        let b = &mut self.backend;
        let l = &mut self.lab;
        match key {
            "init_mode" => r.init_mode = value(key, raw)?,
            "init_population" => r.init_population = value(key, raw)?,
            "phase_population" => r.phase_population = value(key, raw)?,
            "tolerance_feedback" => r.tolerance_feedback = value(key, raw)?,
            "tolerance_eda" => r.tolerance_eda = value(key, raw)?,
            "tolerance_crossover" => r.tolerance_crossover = value(key, raw)?,
            "tolerance_semantic" => r.tolerance_semantic = value(key, raw)?,
            "min_iterations_feedback" => r.min_iterations_feedback = value(key, raw)?,
            "min_iterations_eda" => r.min_iterations_eda = value(key, raw)?,
            "min_iterations_crossover" => r.min_iterations_crossover = value(key, raw)?,
            "min_iterations_semantic" => r.min_iterations_semantic = value(key, raw)?,
            "eda_threshold" => r.eda_threshold = value(key, raw)?,
            "eda_max_k" => r.eda_max_k = optional(key, raw)?,
            "demo_pairs_m" => r.demo_pairs_m = value(key, raw)?,
            "wrong_case_batch" => r.wrong_case_batch = value(key, raw)?,
            "operator_temperature" => r.operator_temperature = value(key, raw)?,
            "eval_temperature" => r.eval_temperature = value(key, raw)?,
            "operator_max_tokens" => r.operator_max_tokens = optional(key, raw)?,
            "eval_max_tokens" => r.eval_max_tokens = optional(key, raw)?,
            "improvement_epsilon" => r.improvement_epsilon = value(key, raw)?,
            "rng_seed" => r.rng_seed = value(key, raw)?,
            "match_mode" => {
                r.match_mode = match raw {
                    "" | "none" => None,
                    _ => Some(MatchMode::parse(raw).ok_or_else(|| format!("unknown match_mode {raw:?}"))?),
                }
            }
            "children_per_iteration" => r.children_per_iteration = value(key, raw)?,
            "execution" => {
                r.execution = match raw {
                    "sequential" => Execution::Sequential,
                    "parallel" => Execution::Parallel,
                    _ => return Err(format!("execution must be sequential or parallel, got {raw:?}")),
                }
            }
            "backend" => b.backend = value(key, raw)?,
            "endpoint" => b.endpoint = raw.to_string(),
            "model" => b.model = raw.to_string(),
            "replay_cache" => b.replay_cache = (!raw.is_empty() && raw != "none").then(|| PathBuf::from(raw)),
            "max_in_flight" => b.max_in_flight = value(key, raw)?,
            "retry_attempts" => b.retry_attempts = value(key, raw)?,
            "retry_base_ms" => b.retry_base_ms = value(key, raw)?,
            "mock_target" => b.mock_target = raw.to_string(),
            "lab_operators" => l.operators = operator_list(raw)?,
            "lab_inits" => l.inits = value(key, raw)?,
            "lab_rounds" => l.rounds = value(key, raw)?,
            "lab_steps" => l.steps = value(key, raw)?,
            "lab_population" => l.population = value(key, raw)?,
            "lab_eda_threshold" => l.eda_threshold = value(key, raw)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut settings = Settings::default();
        let mut seen: Vec<String> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let loc = || format!("{origin}:{}", i + 1);
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, raw) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(loc(), "expected key = value"))?;
            let key = key.trim();
            if seen.iter().any(|k| k == key) {
                return Err(Error::parse(loc(), format!("duplicate key {key:?}")));
            }
            settings.set(key, raw.trim()).map_err(|m| Error::parse(loc(), m))?;
            seen.push(key.to_string());
        }
        settings.run.validate()?;
        if settings.backend.max_in_flight == 0 {
            return Err(Error::Validation("max_in_flight must be positive".into()));
        }
        Ok(settings)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Settings::parse(&text, &path.display().to_string())
    }

    /// Renders every key; [`Settings::parse`] reads the output back unchanged.
    pub fn to_text(&self) -> String {
        let r = &self.run;
        let b = &self.backend;
        let l = &self.lab;
        let execution = match r.execution {
            Execution::Sequential => "sequential",
            Execution::Parallel => "parallel",
        };
        let pairs: Vec<(&str, String)> = vec![
            ("init_mode", r.init_mode.name().into()),
            ("init_population", r.init_population.to_string()),
            ("phase_population", r.phase_population.to_string()),
            ("tolerance_feedback", r.tolerance_feedback.to_string()),
            ("tolerance_eda", r.tolerance_eda.to_string()),
            ("tolerance_crossover", r.tolerance_crossover.to_string()),
            ("tolerance_semantic", r.tolerance_semantic.to_string()),
            ("min_iterations_feedback", r.min_iterations_feedback.to_string()),
            ("min_iterations_eda", r.min_iterations_eda.to_string()),
            ("min_iterations_crossover", r.min_iterations_crossover.to_string()),
            ("min_iterations_semantic", r.min_iterations_semantic.to_string()),
            ("eda_threshold", r.eda_threshold.to_string()),
            ("eda_max_k", show(r.eda_max_k)),
            ("demo_pairs_m", r.demo_pairs_m.to_string()),
            ("wrong_case_batch", r.wrong_case_batch.to_string()),
            ("operator_temperature", r.operator_temperature.to_string()),
            ("eval_temperature", r.eval_temperature.to_string()),
            ("operator_max_tokens", show(r.operator_max_tokens)),
            ("eval_max_tokens", show(r.eval_max_tokens)),
            ("improvement_epsilon", r.improvement_epsilon.to_string()),
            ("rng_seed", r.rng_seed.to_string()),
            ("match_mode", show(r.match_mode.map(MatchMode::name))),
            ("children_per_iteration", r.children_per_iteration.to_string()),
            ("execution", execution.into()),
            ("backend", b.backend.name().into()),
            ("endpoint", b.endpoint.clone()),
            ("model", b.model.clone()),
            ("replay_cache", show(b.replay_cache.as_ref().map(|p| p.display()))),
            ("max_in_flight", b.max_in_flight.to_string()),
            ("retry_attempts", b.retry_attempts.to_string()),
            ("retry_base_ms", b.retry_base_ms.to_string()),
            ("mock_target", b.mock_target.clone()),
            (
                "lab_operators",
                l.operators.iter().map(|k| k.name()).collect::<Vec<_>>().join(","),
            ),
            ("lab_inits", l.inits.to_string()),
            ("lab_rounds", l.rounds.to_string()),
            ("lab_steps", l.steps.to_string()),
            ("lab_population", l.population.to_string()),
            ("lab_eda_threshold", l.eda_threshold.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in pairs {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// SHA-256 over the canonical JSON form, hex encoded.
    pub fn hash(&self) -> Result<String> {
        let json = serde_json::to_vec(self)?;
        Ok(hex::encode(Sha256::digest(&json)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let s = Settings::parse("", "c").unwrap();
        assert_eq!(s.run.init_population, 15);
        assert_eq!(s.run.phase_population, 5);
        assert_eq!(
            (s.run.tolerance_feedback, s.run.tolerance_eda, s.run.tolerance_crossover, s.run.tolerance_semantic),
            (1, 4, 4, 1)
        );
        assert_eq!(s.run.eda_threshold, 0.7);
        assert_eq!(s.run.eda_max_k(), 5);
        assert_eq!((s.run.operator_temperature, s.run.eval_temperature), (0.5, 0.0));
        assert_eq!(s.lab.applications_per_operator(), 100);
        assert_eq!(s.lab.operators.len(), 6);
    }

    #[test]
    fn parses_values_and_comments() {
        let s = Settings::parse(
            "# comment\n\nrng_seed = 42\nmatch_mode = contains_any\nlab_operators = Feedback, EDA_Index\nreplay_cache = cache.jsonl\n",
            "c",
        )
        .unwrap();
        assert_eq!(s.run.rng_seed, 42);
        assert_eq!(s.run.match_mode, Some(MatchMode::ContainsAny));
        assert_eq!(s.lab.operators, vec![OperatorKind::Feedback, OperatorKind::EdaIndex]);
        assert_eq!(s.backend.replay_cache, Some(PathBuf::from("cache.jsonl")));
    }

    #[test]
    fn unknown_key_is_an_error_with_line() {
        match Settings::parse("rng_seed = 1\ntolerance_edaa = 3\n", "c") {
            Err(Error::Parse { location, message }) => {
                assert_eq!(location, "c:2");
                assert!(message.contains("tolerance_edaa"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_lines_rejected() {
        assert!(Settings::parse("rng_seed 1", "c").is_err());
        assert!(Settings::parse("rng_seed = x", "c").is_err());
        assert!(Settings::parse("rng_seed = 1\nrng_seed = 2", "c").is_err());
        assert!(Settings::parse("init_mode = pairs", "c").is_err());
    }

    #[test]
    fn invariants_enforced() {
        assert!(matches!(
            Settings::parse("init_population = 3", "c"),
            Err(Error::Validation(_))
        ));
        assert!(Settings::parse("tolerance_eda = 0", "c").is_err());
        assert!(Settings::parse("eda_threshold = 1.5", "c").is_err());
        assert!(Settings::parse("children_per_iteration = 3", "c").is_err());
        assert!(Settings::parse("operator_temperature = 2.5", "c").is_err());
    }

    #[test]
    fn text_round_trip() {
        let mut s = Settings::default();
        s.run.rng_seed = 9;
        s.run.eda_max_k = Some(3);
        s.run.match_mode = Some(MatchMode::MultipleChoiceLetter);
        s.backend.replay_cache = Some(PathBuf::from("/tmp/x.jsonl"));
        s.lab.operators = vec![OperatorKind::Semantic];
        let back = Settings::parse(&s.to_text(), "c").unwrap();
        assert_eq!(back, s);
        assert_eq!(back.hash().unwrap(), s.hash().unwrap());
    }

    #[test]
    fn hash_tracks_content() {
        let a = Settings::default();
        let mut b = a.clone();
        b.run.rng_seed = 1;
        assert_ne!(a.hash().unwrap(), b.hash().unwrap());
        assert_eq!(a.hash().unwrap().len(), 64);
    }

    #[test]
    fn lab_validation() {
        let mut l = LabConfig::default();
        assert!(l.validate().is_ok());
        l.steps = 0;
        assert!(matches!(l.validate(), Err(Error::InvalidArgument(_))));
    }
}
