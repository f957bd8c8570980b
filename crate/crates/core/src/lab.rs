//! Operator lab: how often, and by how much, each operator improves a prompt.
//!
//! For every operator, every `init` × `round` cell starts from the
//! landscape's initial population for that init and applies the operator
//! `steps` times in a row. EDA and crossover variants act on a population
//! (kept at its size by survivor selection) and are judged on its average
//! score. Feedback and semantic act on a single chain that starts at a
//! random member and always continues from the latest child; a step
//! improves when the child beats its parent.

use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::LabConfig;
use crate::domain::{
    select_distinct_partner, select_next_generation, CandidateId, Lineage, Origin, PhaseId, Population,
    PromptCandidate,
};
use crate::error::{Error, Result};
use crate::evaluation::EvalResult;
use crate::exec::Execution;
use crate::gateway::Gateway;
use crate::landscape::{stable_hash, Landscape};
use crate::operators::{
    crossover_mutate, eda_mutate, feedback_apply, feedback_gradient, select_eda_parents, semantic_mutate,
    Offspring, OperatorContext, OperatorKind,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub step: usize,
    pub applications: usize,
    pub improvement_count: usize,
    /// Mean relative gain over all applications at this step; non-improving
    /// applications count as zero.
    pub mean_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorStats {
    pub operator: OperatorKind,
    pub applications: usize,
    pub improvements: usize,
    pub steps: Vec<StepStats>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LabStats {
    pub operators: Vec<OperatorStats>,
}

impl LabStats {
    pub fn get(&self, op: OperatorKind) -> Option<&OperatorStats> {
        self.operators.iter().find(|s| s.operator == op)
    }
}

/// Relative gain, floored at zero. From a zero baseline the absolute gain.
pub fn improvement_ratio(before: f64, after: f64) -> f64 {
    let gain = (after - before).max(0.0);
    if before > 0.0 {
        gain / before
    } else {
        gain
    }
}

/// Neumaier-compensated sum.
fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let t = sum + v;
        if f64::abs(sum) >= f64::abs(v) {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Outcome of one application.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Applied {
    improved: bool,
    ratio: f64,
}

struct Cell<'a> {
    ctx: OperatorContext<'a>,
    landscape: &'a dyn Landscape,
    rng: ChaCha8Rng,
    next_id: u64,
    capacity: usize,
    eda_threshold: f64,
}

impl Cell<'_> {
    fn candidate(&mut self, text: &str, origin: Origin, parents: Vec<CandidateId>) -> Result<(PromptCandidate, EvalResult)> {
        let id = CandidateId::from_sequence(self.next_id);
        self.next_id += 1;
        let lineage = match origin {
            Origin::Seed => Lineage::seed(PhaseId::Init),
            Origin::Operator(_) => Lineage::new(origin, parents, PhaseId::Evolution, 0)?,
        };
        let eval = self.landscape.evaluate(text);
        let c = PromptCandidate::new(id, text, lineage)?.with_performance(eval.perf_vector.clone());
        Ok((c, eval))
    }

    fn child(&mut self, off: Offspring) -> Result<PromptCandidate> {
        let text = match off.text.trim() {
            "" => "?".to_string(),
            t => t.to_string(),
        };
        Ok(self.candidate(&text, Origin::Operator(off.operator), off.parent_ids)?.0)
    }

    fn population_step(&mut self, op: OperatorKind, pop: &mut Population) -> Result<Applied> {
        let before = pop.summary().map_or(0.0, |s| s.avg);
        let off = match op {
            OperatorKind::Eda | OperatorKind::EdaIndex => {
                let mut parents = select_eda_parents(pop, self.eda_threshold, pop.len())?;
                for m in pop.ranked() {
                    if parents.len() >= 2 {
                        break;
                    }
                    if !parents.iter().any(|p| p.id == m.id) {
                        parents.push(m);
                    }
                }
                eda_mutate(&self.ctx, &parents, op == OperatorKind::EdaIndex, &mut self.rng)?
            }
            OperatorKind::Crossover => {
                let ranked = pop.ranked();
                crossover_mutate(&self.ctx, ranked[0], ranked[1], false, &mut self.rng)?
            }
            OperatorKind::CrossoverDistinct => {
                let best = pop.ranked()[0];
                let partner = select_distinct_partner(best, pop)?;
                crossover_mutate(&self.ctx, best, partner, true, &mut self.rng)?
            }
            _ => return Err(Error::InvalidArgument(format!("{op} is not a population operator"))),
        };
        let child = self.child(off)?;
        *pop = select_next_generation(pop, vec![child], self.capacity)?;
        let after = pop.summary().map_or(0.0, |s| s.avg);
        Ok(Applied {
            improved: after > before,
            ratio: improvement_ratio(before, after),
        })
    }

    fn chain_step(&mut self, op: OperatorKind, current: &mut (PromptCandidate, EvalResult), batch: usize) -> Result<Applied> {
        let (parent, eval) = &*current;
        let before = eval.score;
        let off = match op {
            OperatorKind::Feedback => {
                if eval.wrong_cases.is_empty() {
                    return Ok(Applied {
                        improved: false,
                        ratio: 0.0,
                    });
                }
                let k = batch.min(eval.wrong_cases.len());
                let mut picks = index::sample(&mut self.rng, eval.wrong_cases.len(), k).into_vec();
                picks.sort_unstable();
                let cases: Vec<_> = picks.into_iter().map(|i| eval.wrong_cases[i].clone()).collect();
                let fb = feedback_gradient(&self.ctx, &parent.text, &cases, &mut self.rng)?;
                feedback_apply(&self.ctx, parent, &fb, &mut self.rng)?
            }
            OperatorKind::Semantic => semantic_mutate(&self.ctx, parent, &mut self.rng)?,
            _ => return Err(Error::InvalidArgument(format!("{op} is not a chain operator"))),
        };
        let text = match off.text.trim() {
            "" => "?".to_string(),
            t => t.to_string(),
        };
        let next = self.candidate(&text, Origin::Operator(off.operator), off.parent_ids)?;
        let after = next.1.score;
        *current = next;
        Ok(Applied {
            improved: after > before,
            ratio: improvement_ratio(before, after),
        })
    }
}

const WRONG_CASE_BATCH: usize = 5;

fn is_chain(op: OperatorKind) -> bool {
    matches!(op, OperatorKind::Feedback | OperatorKind::Semantic)
}

fn run_cell(
    config: &LabConfig,
    ctx: OperatorContext<'_>,
    landscape: &dyn Landscape,
    seed: u64,
    op: OperatorKind,
    init: usize,
    round: usize,
) -> Result<Vec<Applied>> {
    let cell_seed = stable_hash(&[&seed.to_string(), op.name(), &init.to_string(), &round.to_string()]);
    let mut cell = Cell {
        ctx,
        landscape,
        rng: ChaCha8Rng::seed_from_u64(cell_seed),
        next_id: 1,
        capacity: config.population,
        eda_threshold: config.eda_threshold,
    };
    let texts = landscape.initial_population(init, config.population);
    let mut members = Vec::with_capacity(texts.len());
    for t in &texts {
        members.push(cell.candidate(t, Origin::Seed, Vec::new())?);
    }
    let mut out = Vec::with_capacity(config.steps);
    if is_chain(op) {
        let start = cell.rng.gen_range(0..members.len());
        let mut current = members.swap_remove(start);
        for _ in 0..config.steps {
            out.push(cell.chain_step(op, &mut current, WRONG_CASE_BATCH)?);
        }
    } else {
        let mut pop = Population::new(members.into_iter().map(|(c, _)| c).collect(), config.population)?;
        for _ in 0..config.steps {
            out.push(cell.population_step(op, &mut pop)?);
        }
    }
    Ok(out)
}

/// Runs the lab. Cells are independent and fan out through `execution`.
pub fn run_lab(
    config: &LabConfig,
    seed: u64,
    temperature: f64,
    execution: Execution,
    gateway: &Gateway,
    landscape: &dyn Landscape,
) -> Result<LabStats> {
    config.validate()?;
    gateway.set_phase(PhaseId::Evolution);
    let ctx = OperatorContext::new(gateway, temperature);
    let cells: Vec<(OperatorKind, usize, usize)> = config
        .operators
        .iter()
        .flat_map(|&op| (0..config.inits).flat_map(move |i| (0..config.rounds).map(move |r| (op, i, r))))
        .collect();
    let results = execution.try_map(&cells, |&(op, i, r)| run_cell(config, ctx, landscape, seed, op, i, r))?;

    let mut stats = LabStats::default();
    for &op in &config.operators {
        let runs: Vec<&Vec<Applied>> = cells
            .iter()
            .zip(&results)
            .filter(|((o, _, _), _)| *o == op)
            .map(|(_, r)| r)
            .collect();
        let steps: Vec<StepStats> = (0..config.steps)
            .map(|s| {
                let at: Vec<Applied> = runs.iter().map(|r| r[s]).collect();
                StepStats {
                    step: s + 1,
                    applications: at.len(),
                    improvement_count: at.iter().filter(|a| a.improved).count(),
                    mean_ratio: compensated_sum(at.iter().map(|a| a.ratio)) / at.len() as f64,
                }
            })
            .collect();
        stats.operators.push(OperatorStats {
            operator: op,
            applications: steps.iter().map(|s| s.applications).sum(),
            improvements: steps.iter().map(|s| s.improvement_count).sum(),
            steps,
        });
    }
    for s in &stats.operators {
        log::info!(
            "lab operator={} applications={} improvements={}",
            s.operator,
            s.applications,
            s.improvements
        );
    }
    Ok(stats)
}

/// `lab.csv` (one row per operator and step) and `lab_summary.csv`.
pub fn write_lab_csv(stats: &LabStats, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut steps = csv::Writer::from_writer(Vec::new());
    steps.write_record(["operator", "step", "applications", "improvement_count", "mean_ratio"])?;
    let mut summary = csv::Writer::from_writer(Vec::new());
    summary.write_record(["operator", "applications", "improvements", "improvement_rate"])?;
    for op in &stats.operators {
        for s in &op.steps {
            steps.write_record([
                op.operator.name().to_string(),
                s.step.to_string(),
                s.applications.to_string(),
                s.improvement_count.to_string(),
                format!("{:.6}", s.mean_ratio),
            ])?;
        }
        let rate = if op.applications == 0 {
            0.0
        } else {
            op.improvements as f64 / op.applications as f64
        };
        summary.write_record([
            op.operator.name().to_string(),
            op.applications.to_string(),
            op.improvements.to_string(),
            format!("{rate:.6}"),
        ])?;
    }
    for (name, w) in [("lab.csv", steps), ("lab_summary.csv", summary)] {
        let bytes = w.into_inner().map_err(|e| Error::InvalidState(e.to_string()))?;
        crate::checkpoint::write_atomic(&out_dir.join(name), &bytes)?;
    }
    Ok(())
}
