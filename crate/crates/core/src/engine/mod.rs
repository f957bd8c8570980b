//! The phased optimization loop and the random-evolution baseline.
//!
//! [`Engine`] advances one iteration per [`Engine::step`]. A step works on
//! copies of the state and RNG and commits them only when it succeeds, so the
//! state seen between steps is always a valid resume point.

mod record;
mod state;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{InitMode, RunConfig};
use crate::domain::{
    select_distinct_partner, select_next_generation, CandidateId, Lineage, Origin, PhaseId, Population,
    PromptCandidate,
};
use crate::error::{Error, Result};
use crate::evaluation::{EvalCacheSnapshot, Evaluator, MatchMode, Split, TaskExample};
use crate::gateway::{Gateway, Usage};
use crate::operators::{
    crossover_mutate, eda_mutate, feedback_apply, feedback_gradient, lamarckian_mutate, select_eda_parents,
    semantic_mutate, DemonstrationPair, Offspring, OperatorContext, OperatorKind,
};
use crate::task::TaskFile;

pub use record::{ChildSummary, PhaseSummary, RunRecord, Snapshot};
pub use state::{should_advance, EvolutionBlock, PhaseState};

/// Operators the baseline draws from, uniformly.
pub const BASELINE_OPERATORS: [OperatorKind; 6] = [
    OperatorKind::Feedback,
    OperatorKind::Eda,
    OperatorKind::EdaIndex,
    OperatorKind::Crossover,
    OperatorKind::CrossoverDistinct,
    OperatorKind::Semantic,
];

pub fn draw_baseline_operator<R: Rng + ?Sized>(rng: &mut R) -> OperatorKind {
    BASELINE_OPERATORS[rng.gen_range(0..BASELINE_OPERATORS.len())]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RunMode {
    Phased,
    Baseline { iterations: usize },
}

/// Everything needed to continue a run besides config, task and RNG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineState {
    pub mode: RunMode,
    pub phase: PhaseState,
    pub population: Option<Population>,
    pub record: RunRecord,
    pub next_id: u64,
    pub baseline_done: usize,
}

impl EngineState {
    fn new(mode: RunMode) -> Self {
        EngineState {
            mode,
            phase: PhaseState::new(PhaseId::Init, None, 1, 0, 0.0),
            population: None,
            record: RunRecord::default(),
            next_id: 1,
            baseline_done: 0,
        }
    }

    pub fn is_done(&self) -> bool {
        self.phase.phase == PhaseId::Done
    }
}

/// Serializable ChaCha position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: String,
    pub stream: u64,
    pub word_pos: String,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        RngState {
            seed: hex::encode(rng.get_seed()),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    pub fn restore(&self) -> Result<ChaCha8Rng> {
        let bad = |m: String| Error::Incompatible(format!("rng state: {m}"));
        let bytes = hex::decode(&self.seed).map_err(|e| bad(e.to_string()))?;
        let seed: [u8; 32] = bytes.try_into().map_err(|_| bad("seed must be 32 bytes".into()))?;
        let pos: u128 = self.word_pos.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?;
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(pos);
        Ok(rng)
    }
}

/// What a checkpoint sink wants after a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Finished { best: PromptCandidate, record: Box<RunRecord> },
    Stopped,
}

pub struct Engine<'a> {
    config: &'a RunConfig,
    task: &'a TaskFile,
    gateway: &'a Gateway,
    evaluator: Evaluator,
    state: EngineState,
    rng: ChaCha8Rng,
}

struct Ctx<'e> {
    config: &'e RunConfig,
    task: &'e TaskFile,
    gateway: &'e Gateway,
    evaluator: &'e Evaluator,
    mode: MatchMode,
    train: Vec<TaskExample>,
    dev: Vec<TaskExample>,
}

impl<'a> Engine<'a> {
    pub fn new(config: &'a RunConfig, task: &'a TaskFile, gateway: &'a Gateway, mode: RunMode) -> Result<Self> {
        config.validate()?;
        task.validate()?;
        match config.init_mode {
            InitMode::IoPairs if task.counts().train == 0 => {
                return Err(Error::Validation("io_pairs initialization needs train examples".into()))
            }
            InitMode::SeedPrompts if task.seed_prompts.is_empty() => {
                return Err(Error::InvalidArgument("seed_prompts initialization needs at least one seed".into()))
            }
            InitMode::SeedPrompts if task.seed_prompts.len() > config.init_population => {
                return Err(Error::InvalidArgument(format!(
                    "{} seed prompts exceed init_population {}",
                    task.seed_prompts.len(),
                    config.init_population
                )))
            }
            _ => {}
        }
        if task.seed_prompts.iter().any(|s| s.trim().is_empty()) && config.init_mode == InitMode::SeedPrompts {
            return Err(Error::InvalidArgument("seed prompts must not be empty".into()));
        }
        Ok(Engine {
            config,
            task,
            gateway,
            evaluator: evaluator_for(config),
            state: EngineState::new(mode),
            rng: ChaCha8Rng::seed_from_u64(config.rng_seed),
        })
    }

    /// Continues from a saved state.
    pub fn resume(
        config: &'a RunConfig,
        task: &'a TaskFile,
        gateway: &'a Gateway,
        state: EngineState,
        rng: &RngState,
        eval_cache: &EvalCacheSnapshot,
    ) -> Result<Self> {
        let mut engine = Engine::new(config, task, gateway, state.mode)?;
        engine.rng = rng.restore()?;
        engine.evaluator.restore_cache(eval_cache);
        gateway.set_phase(state.phase.phase);
        engine.state = state;
        Ok(engine)
    }

    pub fn state(&self) -> &EngineState {
        &self.state
    }

    pub fn rng_state(&self) -> RngState {
        RngState::capture(&self.rng)
    }

    pub fn evaluator(&self) -> &Evaluator {
        &self.evaluator
    }

    pub fn record(&self) -> &RunRecord {
        &self.state.record
    }

    pub fn is_done(&self) -> bool {
        self.state.is_done()
    }

    fn ctx(&self) -> Ctx<'_> {
        Ctx {
            config: self.config,
            task: self.task,
            gateway: self.gateway,
            evaluator: &self.evaluator,
            mode: self.config.match_mode.unwrap_or(self.task.match_mode),
            train: self.task.split(Split::Train),
            dev: self.task.split(Split::Dev),
        }
    }

    /// Runs one iteration (initialization counts as one). Returns false once
    /// the run is done. On error nothing is committed.
    pub fn step(&mut self) -> Result<bool> {
        if self.is_done() {
            return Ok(false);
        }
        let mut state = self.state.clone();
        let mut rng = self.rng.clone();
        step_once(&self.ctx(), &mut state, &mut rng)?;
        self.state = state;
        self.rng = rng;
        Ok(true)
    }

    /// Steps until done, handing the engine to `sink` after every step.
    pub fn run_with<F>(&mut self, mut sink: F) -> Result<Outcome>
    where
        F: FnMut(&Engine<'_>) -> Result<Control>,
    {
        while self.step()? {
            if sink(self)? == Control::Stop && !self.is_done() {
                return Ok(Outcome::Stopped);
            }
        }
        self.outcome()
    }

    pub fn run_to_end(&mut self) -> Result<(PromptCandidate, RunRecord)> {
        match self.run_with(|_| Ok(Control::Continue))? {
            Outcome::Finished { best, record } => Ok((best, *record)),
            Outcome::Stopped => unreachable!("sink never stops"),
        }
    }

    pub fn outcome(&self) -> Result<Outcome> {
        if !self.is_done() {
            return Ok(Outcome::Stopped);
        }
        let best = self
            .state
            .record
            .best
            .clone()
            .ok_or_else(|| Error::InvalidState("finished run has no best candidate".into()))?;
        Ok(Outcome::Finished {
            best,
            record: Box::new(self.state.record.clone()),
        })
    }
}

pub fn evaluator_for(config: &RunConfig) -> Evaluator {
    Evaluator::new(config.eval_temperature)
        .with_execution(config.execution)
        .with_max_tokens(config.eval_max_tokens)
}

/// Runs all four phases and returns the best member of the final population.
pub fn run(config: &RunConfig, task: &TaskFile, gateway: &Gateway) -> Result<(PromptCandidate, RunRecord)> {
    Engine::new(config, task, gateway, RunMode::Phased)?.run_to_end()
}

/// Same initialization, then `total_iterations` iterations of a uniformly
/// drawn operator.
pub fn run_random_evolution_baseline(
    config: &RunConfig,
    task: &TaskFile,
    gateway: &Gateway,
    total_iterations: usize,
) -> Result<(PromptCandidate, RunRecord)> {
    Engine::new(
        config,
        task,
        gateway,
        RunMode::Baseline {
            iterations: total_iterations,
        },
    )?
    .run_to_end()
}

fn step_once(cx: &Ctx<'_>, st: &mut EngineState, rng: &mut ChaCha8Rng) -> Result<()> {
    let before = cx.gateway.ledger_snapshot().totals();
    loop {
        let iterated = match (st.mode, st.phase.phase) {
            (_, PhaseId::Done) => return Ok(()),
            (_, PhaseId::Init) => {
                initialize(cx, st, rng, before)?;
                true
            }
            (RunMode::Baseline { iterations }, _) => {
                baseline_iteration(cx, st, rng, before, iterations)?;
                true
            }
            (RunMode::Phased, _) => phased_iteration(cx, st, rng, before)?,
        };
        if iterated {
            return Ok(());
        }
    }
}

fn population(st: &EngineState) -> Result<&Population> {
    st.population
        .as_ref()
        .ok_or_else(|| Error::InvalidState("population not initialized".into()))
}

fn operator_ctx<'g>(cx: &Ctx<'g>) -> OperatorContext<'g> {
    OperatorContext {
        gateway: cx.gateway,
        temperature: cx.config.operator_temperature,
        max_tokens: cx.config.operator_max_tokens,
    }
}

/// Turns offspring into candidates with fresh ids. Empty outputs are dropped.
fn admit(st: &mut EngineState, offspring: Vec<Offspring>, phase: PhaseId, iteration: usize) -> Result<Vec<PromptCandidate>> {
    let mut out = Vec::with_capacity(offspring.len());
    for off in offspring {
        let text = off.text.trim();
        if text.is_empty() {
            st.record.note(format!("dropped empty {} output", off.operator));
            continue;
        }
        let id = CandidateId::from_sequence(st.next_id);
        st.next_id += 1;
        let lineage = Lineage::new(Origin::Operator(off.operator), off.parent_ids, phase, iteration)?;
        out.push(PromptCandidate::new(id, text, lineage)?);
    }
    Ok(out)
}

fn score(cx: &Ctx<'_>, candidates: &mut [PromptCandidate]) -> Result<()> {
    if candidates.is_empty() {
        return Ok(());
    }
    let texts: Vec<&str> = candidates.iter().map(|c| c.text.as_str()).collect();
    let results = cx.evaluator.evaluate_many(&texts, &cx.dev, cx.mode, cx.gateway)?;
    for (c, r) in candidates.iter_mut().zip(results) {
        c.set_performance(r.perf_vector);
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn snapshot(
    cx: &Ctx<'_>,
    st: &mut EngineState,
    pop: &Population,
    operator: Option<OperatorKind>,
    applications: usize,
    improved: bool,
    children: &[PromptCandidate],
    before: Usage,
) -> Result<()> {
    let summary = pop
        .summary()
        .ok_or_else(|| Error::InvalidState("population is empty".into()))?;
    let after = cx.gateway.ledger_snapshot().totals();
    let snap = Snapshot {
        index: st.record.snapshots.len(),
        phase: st.phase.phase,
        block: st.phase.block,
        operator,
        phase_iteration: st.phase.iteration,
        best: summary.best,
        avg: summary.avg,
        worst: summary.worst,
        mean_tokens: summary.mean_tokens,
        calls: after.calls - before.calls,
        tokens: after.tokens() - before.tokens(),
        total_calls: after.calls,
        mutation_applications: applications,
        improved,
        children: children.iter().map(ChildSummary::of).collect(),
        survivors: pop.ids(),
    };
    log::info!(
        "step={} phase={} block={} operator={} iteration={} best={:.4} avg={:.4} worst={:.4} calls={} total_calls={}",
        snap.index,
        snap.phase,
        snap.block.map_or("-", EvolutionBlock::name),
        snap.operator.map_or("-", OperatorKind::name),
        snap.phase_iteration,
        snap.best,
        snap.avg,
        snap.worst,
        snap.calls,
        snap.total_calls
    );
    st.record.snapshots.push(snap);
    Ok(())
}

/// Moves to `phase`/`block`, opening a new phase summary when the phase changes.
fn enter(cx: &Ctx<'_>, st: &mut EngineState, phase: PhaseId, block: Option<EvolutionBlock>) -> Result<()> {
    let best = population(st)?.best_score().unwrap_or(0.0);
    if st.phase.phase != phase && phase != PhaseId::Done {
        st.record.phases.push(PhaseSummary {
            phase,
            iterations: 0,
            notes: Vec::new(),
        });
    }
    st.phase = PhaseState::enter(phase, block, cx.config, best);
    cx.gateway.set_phase(phase);
    if phase == PhaseId::Done {
        st.record.best = population(st)?.best().cloned();
        st.record.total_iterations = st.record.snapshots.len().saturating_sub(1);
        log::info!(
            "done iterations={} best={:.4}",
            st.record.total_iterations,
            best
        );
    }
    Ok(())
}

fn advance_stage(cx: &Ctx<'_>, st: &mut EngineState) -> Result<()> {
    let (phase, block) = match (st.phase.phase, st.phase.block) {
        (PhaseId::Feedback, _) => (PhaseId::Evolution, Some(EvolutionBlock::Eda)),
        (PhaseId::Evolution, Some(EvolutionBlock::Eda)) => (PhaseId::Evolution, Some(EvolutionBlock::Crossover)),
        (PhaseId::Evolution, _) => (PhaseId::Semantic, None),
        _ => (PhaseId::Done, None),
    };
    enter(cx, st, phase, block)
}

fn initialize(cx: &Ctx<'_>, st: &mut EngineState, rng: &mut ChaCha8Rng, before: Usage) -> Result<()> {
    cx.gateway.set_phase(PhaseId::Init);
    st.record.phases.push(PhaseSummary {
        phase: PhaseId::Init,
        iterations: 1,
        notes: Vec::new(),
    });
    let ctx = operator_ctx(cx);
    let n = cx.config.init_population;
    let mut offspring = Vec::new();
    let mut seeds = Vec::new();
    match cx.config.init_mode {
        InitMode::IoPairs => {
            let m = cx.config.demo_pairs_m.min(cx.train.len());
            for _ in 0..n {
                let mut picks = index::sample(rng, cx.train.len(), m).into_vec();
                picks.sort_unstable();
                let pairs = picks
                    .into_iter()
                    .map(|i| DemonstrationPair::new(cx.train[i].input.clone(), cx.train[i].expected.clone()))
                    .collect::<Result<Vec<_>>>()?;
                offspring.push(lamarckian_mutate(&ctx, &pairs, rng)?);
            }
        }
        InitMode::SeedPrompts => {
            for text in &cx.task.seed_prompts {
                let id = CandidateId::from_sequence(st.next_id);
                st.next_id += 1;
                seeds.push(PromptCandidate::new(id, text.trim(), Lineage::seed(PhaseId::Init))?);
            }
            for j in 0..n - seeds.len() {
                offspring.push(semantic_mutate(&ctx, &seeds[j % seeds.len()], rng)?);
            }
        }
    }
    let applications = offspring.len();
    let mut candidates = seeds;
    candidates.extend(admit(st, offspring, PhaseId::Init, 0)?);
    if candidates.is_empty() {
        return Err(Error::InvalidState("initialization produced no usable prompts".into()));
    }
    score(cx, &mut candidates)?;
    let empty = Population::new(Vec::new(), cx.config.phase_population)?;
    let pop = select_next_generation(&empty, candidates.clone(), cx.config.phase_population)?;
    snapshot(cx, st, &pop, None, applications, false, &candidates, before)?;
    st.population = Some(pop);
    match st.mode {
        RunMode::Phased => enter(cx, st, PhaseId::Feedback, None),
        RunMode::Baseline { iterations } => {
            enter(cx, st, PhaseId::Evolution, None)?;
            if iterations == 0 {
                enter(cx, st, PhaseId::Done, None)?;
            }
            Ok(())
        }
    }
}

/// Plain/variant flags for a global iteration: both, or alternating.
fn variants(cx: &Ctx<'_>, iteration: usize) -> Vec<bool> {
    if cx.config.children_per_iteration >= 2 {
        vec![false, true]
    } else {
        vec![iteration % 2 == 1]
    }
}

/// One Feedback child per member that has wrong train cases. `None` when
/// there is nothing to fix (or no train data).
fn feedback_children(
    cx: &Ctx<'_>,
    st: &mut EngineState,
    pop: &Population,
    rng: &mut ChaCha8Rng,
) -> Result<Option<Vec<Offspring>>> {
    if cx.train.is_empty() {
        return Ok(None);
    }
    let ranked = pop.ranked();
    let texts: Vec<&str> = ranked.iter().map(|m| m.text.as_str()).collect();
    let results = cx.evaluator.evaluate_many(&texts, &cx.train, cx.mode, cx.gateway)?;
    let ctx = operator_ctx(cx);
    let mut offspring = Vec::new();
    let mut exempt = Vec::new();
    for (member, result) in ranked.iter().zip(results) {
        if result.wrong_cases.is_empty() {
            exempt.push(member.id.as_str().to_string());
            continue;
        }
        let k = cx.config.wrong_case_batch.min(result.wrong_cases.len());
        let mut picks = index::sample(rng, result.wrong_cases.len(), k).into_vec();
        picks.sort_unstable();
        let batch: Vec<_> = picks.into_iter().map(|i| result.wrong_cases[i].clone()).collect();
        let feedback = feedback_gradient(&ctx, &member.text, &batch, rng)?;
        offspring.push(feedback_apply(&ctx, member, &feedback, rng)?);
    }
    if offspring.is_empty() {
        return Ok(None);
    }
    if !exempt.is_empty() {
        st.record.note(format!("perfect on train, exempt from feedback: {}", exempt.join(",")));
    }
    Ok(Some(offspring))
}

fn eda_children(cx: &Ctx<'_>, pop: &Population, flags: &[bool], rng: &mut ChaCha8Rng) -> Result<Vec<Offspring>> {
    if pop.len() < 2 {
        return Ok(Vec::new());
    }
    let mut parents = select_eda_parents(pop, cx.config.eda_threshold, cx.config.eda_max_k())?;
    for m in pop.ranked() {
        if parents.len() >= 2 {
            break;
        }
        if !parents.iter().any(|p| p.id == m.id) {
            parents.push(m);
        }
    }
    let ctx = operator_ctx(cx);
    flags
        .iter()
        .map(|&indexed| eda_mutate(&ctx, &parents, indexed, rng))
        .collect()
}

fn crossover_children(cx: &Ctx<'_>, pop: &Population, flags: &[bool], rng: &mut ChaCha8Rng) -> Result<Vec<Offspring>> {
    if pop.len() < 2 {
        return Ok(Vec::new());
    }
    let ranked = pop.ranked();
    let ctx = operator_ctx(cx);
    let mut out = Vec::new();
    for &distinct in flags {
        let partner = if distinct {
            select_distinct_partner(ranked[0], pop)?
        } else {
            ranked[1]
        };
        out.push(crossover_mutate(&ctx, ranked[0], partner, distinct, rng)?);
    }
    Ok(out)
}

fn semantic_children(cx: &Ctx<'_>, pop: &Population, rng: &mut ChaCha8Rng) -> Result<Vec<Offspring>> {
    let ctx = operator_ctx(cx);
    pop.ranked()
        .into_iter()
        .map(|m| semantic_mutate(&ctx, m, rng))
        .collect()
}

/// Scores children, selects survivors and returns (new population, children).
fn evolve(
    cx: &Ctx<'_>,
    st: &mut EngineState,
    pop: &Population,
    offspring: Vec<Offspring>,
    phase: PhaseId,
    iteration: usize,
) -> Result<(Population, Vec<PromptCandidate>)> {
    let mut children = admit(st, offspring, phase, iteration)?;
    score(cx, &mut children)?;
    let next = select_next_generation(pop, children.clone(), cx.config.phase_population)?;
    Ok((next, children))
}

/// Returns false when the current phase had nothing to do and was skipped.
fn phased_iteration(cx: &Ctx<'_>, st: &mut EngineState, rng: &mut ChaCha8Rng, before: Usage) -> Result<bool> {
    let pop = population(st)?.clone();
    let phase = st.phase.phase;
    let iteration = st.phase.iteration;
    let offspring = match (phase, st.phase.block) {
        (PhaseId::Feedback, _) => match feedback_children(cx, st, &pop, rng)? {
            Some(o) => o,
            None => {
                let why = if cx.train.is_empty() {
                    "no train examples"
                } else {
                    "every member is perfect on train"
                };
                st.record.note(format!("feedback phase ended: {why}"));
                advance_stage(cx, st)?;
                return Ok(false);
            }
        },
        (PhaseId::Evolution, Some(EvolutionBlock::Crossover)) => {
            if pop.len() < 2 {
                st.record.note("crossover block skipped: population has a single member");
                advance_stage(cx, st)?;
                return Ok(false);
            }
            crossover_children(cx, &pop, &variants(cx, iteration), rng)?
        }
        (PhaseId::Evolution, _) => {
            if pop.len() < 2 && iteration == 0 {
                st.record.note("EDA needs two members; block runs without children");
            }
            eda_children(cx, &pop, &variants(cx, iteration), rng)?
        }
        (PhaseId::Semantic, _) => semantic_children(cx, &pop, rng)?,
        (PhaseId::Init | PhaseId::Done, _) => {
            return Err(Error::InvalidState(format!("no iteration in phase {phase}")))
        }
    };
    let applications = offspring.len();
    let (next, children) = evolve(cx, st, &pop, offspring, phase, iteration + 1)?;
    let best = next.best_score().unwrap_or(0.0);
    let improved = st.phase.record_iteration(best, cx.config.improvement_epsilon);
    if let Some(p) = st.record.phases.last_mut() {
        p.iterations += 1;
    }
    snapshot(cx, st, &next, None, applications, improved, &children, before)?;
    st.population = Some(next);
    if st.phase.should_advance() {
        advance_stage(cx, st)?;
    }
    Ok(true)
}

fn baseline_iteration(
    cx: &Ctx<'_>,
    st: &mut EngineState,
    rng: &mut ChaCha8Rng,
    before: Usage,
    total: usize,
) -> Result<()> {
    let pop = population(st)?.clone();
    let op = draw_baseline_operator(rng);
    let offspring = match op {
        OperatorKind::Feedback => feedback_children(cx, st, &pop, rng)?.unwrap_or_default(),
        OperatorKind::Eda => eda_children(cx, &pop, &[false], rng)?,
        OperatorKind::EdaIndex => eda_children(cx, &pop, &[true], rng)?,
        OperatorKind::Crossover => crossover_children(cx, &pop, &[false], rng)?,
        OperatorKind::CrossoverDistinct => crossover_children(cx, &pop, &[true], rng)?,
        OperatorKind::Semantic | OperatorKind::Lamarckian => semantic_children(cx, &pop, rng)?,
    };
    let applications = offspring.len();
    let (next, children) = evolve(cx, st, &pop, offspring, PhaseId::Evolution, st.baseline_done + 1)?;
    let improved = next.best_score() > pop.best_score();
    st.phase.iteration += 1;
    st.baseline_done += 1;
    if let Some(p) = st.record.phases.last_mut() {
        p.iterations += 1;
    }
    snapshot(cx, st, &next, Some(op), applications, improved, &children, before)?;
    st.population = Some(next);
    if st.baseline_done >= total {
        enter(cx, st, PhaseId::Done, None)?;
    }
    Ok(())
}
