//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any failed.

mod common;

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{scripted_gateway, scripted_task, Caps, Policy, INIT_K, N};
use phasevo::checkpoint::Checkpoint;
use phasevo::config::{LabConfig, RunConfig, Settings};
use phasevo::domain::{hamming_distance, similarity, CandidateId, Lineage, PerformanceVector, PhaseId, Population, PromptCandidate};
use phasevo::engine::{Control, Engine, EvolutionBlock, Outcome, RunMode};
use phasevo::evaluation::{EvalResult, Evaluator, MatchMode, Split, TaskExample};
use phasevo::exec::Execution;
use phasevo::gateway::{CompletionRequest, Gateway, MockBackend, ResponseCache};
use phasevo::lab::run_lab;
use phasevo::landscape::{synthetic_task, Landscape, SyntheticLandscape};
use phasevo::operators::{
    render_crossover, render_eda, render_feedback_application, render_feedback_generation, render_lamarckian,
    render_semantic, select_eda_parents, DemonstrationPair, FeedbackText, WrongCase,
};
use phasevo::report::emit_report;
use phasevo::task::SplitCounts;
use phasevo::{run, run_random_evolution_baseline, OperatorKind, Purpose};

type Check = std::result::Result<String, String>;
type Criterion = (&'static str, u64, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($fmt)+));
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: std::result::Result<T, E>) -> std::result::Result<T, String> {
    r.map_err(|e| e.to_string())
}

// ---------------------------------------------------------------- 1

fn golden_templates() -> Check {
    let pairs = vec![
        DemonstrationPair::new("12 5", vec!["7".into()]).unwrap(),
        DemonstrationPair::new("40 19", vec!["21".into(), "twenty-one".into()]).unwrap(),
    ];
    let cases = vec![
        WrongCase {
            input: "12 5".into(),
            expected: vec!["7".into()],
            actual: "17".into(),
        },
        WrongCase {
            input: "30 8".into(),
            expected: vec!["22".into()],
            actual: "38".into(),
        },
    ];
    let feedback = FeedbackText::new("Say which number is taken away from which.").unwrap();
    let parents = ["Compute a minus b.", "Subtract the numbers.", "Take the second number away from the first."];
    let renders = [
        ("lamarckian", ok(render_lamarckian(&pairs))?, include_str!("golden/lamarckian.txt")),
        (
            "feedback_generation",
            ok(render_feedback_generation("Subtract the numbers.", &cases))?,
            include_str!("golden/feedback_generation.txt"),
        ),
        (
            "feedback_application",
            ok(render_feedback_application("Subtract the numbers.", &feedback))?,
            include_str!("golden/feedback_application.txt"),
        ),
        ("eda", ok(render_eda(&parents, false))?, include_str!("golden/eda.txt")),
        ("eda_index", ok(render_eda(&parents, true))?, include_str!("golden/eda_index.txt")),
        (
            "crossover",
            ok(render_crossover("Compute a minus b.", "Subtract the numbers."))?,
            include_str!("golden/crossover.txt"),
        ),
        ("semantic", ok(render_semantic("Subtract the numbers."))?, include_str!("golden/semantic.txt")),
    ];
    for (name, got, want) in &renders {
        ensure!(got == want, "{name} render differs from golden\n--- got\n{got}\n--- want\n{want}");
    }
    Ok(format!("{} renders byte-identical", renders.len()))
}

// ---------------------------------------------------------------- 2

fn random_bits(rng: &mut ChaCha8Rng, len: usize) -> PerformanceVector {
    PerformanceVector::new((0..len).map(|_| rng.gen_bool(0.5)).collect())
}

fn similarity_axioms() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for trial in 0..10_000 {
        let len = rng.gen_range(1..=200);
        let a = random_bits(&mut rng, len);
        let b = random_bits(&mut rng, len);
        let c = random_bits(&mut rng, len);
        let ab = ok(hamming_distance(&a, &b))?;
        let ba = ok(hamming_distance(&b, &a))?;
        let ac = ok(hamming_distance(&a, &c))?;
        let cb = ok(hamming_distance(&c, &b))?;
        let naive = a.bits().iter().zip(b.bits()).filter(|(x, y)| x != y).count();
        ensure!(ab == naive, "trial {trial}: distance {ab}, counted {naive}");
        ensure!(ok(hamming_distance(&a, &a))? == 0, "trial {trial}: d(a,a) != 0");
        ensure!(ab == ba, "trial {trial}: asymmetric");
        ensure!(ab <= ac + cb, "trial {trial}: triangle inequality");
        ensure!((ab == 0) == (a == b), "trial {trial}: identity of indiscernibles");
        ensure!(ab <= len, "trial {trial}: distance above length");
        let s = ok(similarity(&a, &b))?;
        ensure!(s == ok(similarity(&b, &a))?, "trial {trial}: similarity asymmetric");
        ensure!((0.0..=1.0).contains(&s), "trial {trial}: similarity {s} out of range");
        ensure!(s + ab as f64 / len as f64 == 1.0, "trial {trial}: sim + d/len = {}", s + ab as f64 / len as f64);
        ensure!(ok(similarity(&a, &a))? == 1.0, "trial {trial}: self-similarity");
    }
    let short = PerformanceVector::new(vec![true]);
    let long = PerformanceVector::new(vec![true, false]);
    ensure!(hamming_distance(&short, &long).is_err(), "length mismatch accepted");
    Ok("10000 random triples".into())
}

// ---------------------------------------------------------------- 3

struct Member {
    id: String,
    score: f64,
    tokens: usize,
    bits: Vec<bool>,
}

/// Plain-loop greedy: order by (score desc, tokens asc, id asc), then accept
/// each member whose agreement with every accepted one is at most `thr`.
fn greedy_oracle(members: &[Member], thr: f64, max_k: usize) -> Vec<String> {
    let mut order: Vec<usize> = (0..members.len()).collect();
    for i in 1..order.len() {
        let mut j = i;
        while j > 0 {
            let (p, q) = (&members[order[j - 1]], &members[order[j]]);
            let q_first = q.score > p.score
                || (q.score == p.score && (q.tokens < p.tokens || (q.tokens == p.tokens && q.id < p.id)));
            if !q_first {
                break;
            }
            order.swap(j - 1, j);
            j -= 1;
        }
    }
    let mut accepted: Vec<usize> = Vec::new();
    for &i in &order {
        if accepted.len() == max_k {
            break;
        }
        let n = members[i].bits.len();
        let fits = accepted.iter().all(|&a| {
            let mut differ = 0;
            for k in 0..n {
                if members[i].bits[k] != members[a].bits[k] {
                    differ += 1;
                }
            }
            1.0 - differ as f64 / n as f64 <= thr
        });
        if fits {
            accepted.push(i);
        }
    }
    accepted.into_iter().map(|i| members[i].id.clone()).collect()
}

fn eda_selection_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let words = ["solve", "the", "task", "carefully", "now"];
    for trial in 0..1_000 {
        let size = rng.gen_range(1..=10);
        let len = rng.gen_range(1..=20);
        let mut members = Vec::new();
        let mut candidates = Vec::new();
        for i in 0..size {
            let bits: Vec<bool> = (0..len).map(|_| rng.gen_bool(0.6)).collect();
            let nwords = rng.gen_range(1..=4);
            let text: Vec<&str> = (0..nwords).map(|_| words[rng.gen_range(0..words.len())]).collect();
            let id = format!("m{:02}", (i * 7) % 10 + 10 * (i / 10));
            let c = PromptCandidate::new(CandidateId::new(id.clone()), text.join(" "), Lineage::seed(PhaseId::Init))
                .unwrap()
                .with_performance(PerformanceVector::new(bits.clone()));
            members.push(Member {
                id,
                score: c.dev_score.unwrap(),
                tokens: c.token_estimate,
                bits,
            });
            candidates.push(c);
        }
        let thr = if rng.gen_bool(0.5) {
            rng.gen_range(0..=len) as f64 / len as f64
        } else {
            rng.gen::<f64>()
        };
        let max_k = rng.gen_range(1..=size + 1);
        let pop = ok(Population::new(candidates, size))?;
        let got: Vec<String> = ok(select_eda_parents(&pop, thr, max_k))?
            .into_iter()
            .map(|c| c.id.as_str().to_string())
            .collect();
        let want = greedy_oracle(&members, thr, max_k);
        ensure!(got == want, "trial {trial}: got {got:?}, oracle {want:?} (thr {thr}, max_k {max_k})");
    }
    Ok("1000 random populations".into())
}

// ---------------------------------------------------------------- 4

/// Expected iterations per phase, simulated from the scripted caps: each
/// iteration lifts the best k by one until the family cap, then `tol` flat
/// iterations close the phase.
fn counter_oracle(policy: Policy, config: &RunConfig) -> [(usize, usize); 4] {
    let caps = match policy {
        Policy::Flat => [0; 4],
        Policy::Climb(c) => [c.feedback, c.eda, c.crossover, c.semantic],
    };
    let tols = [
        (config.tolerance_feedback, config.min_iterations_feedback),
        (config.tolerance_eda, config.min_iterations_eda),
        (config.tolerance_crossover, config.min_iterations_crossover),
        (config.tolerance_semantic, config.min_iterations_semantic),
    ];
    let mut best = INIT_K;
    let mut out = [(0, 0); 4];
    for i in 0..4 {
        let (mut iteration, mut flat, mut improving) = (0, 0, 0);
        loop {
            iteration += 1;
            if caps[i] > best {
                best += 1;
                flat = 0;
                improving += 1;
            } else {
                flat += 1;
            }
            if flat >= tols[i].0 && iteration >= tols[i].1 {
                break;
            }
        }
        out[i] = (iteration, improving);
    }
    out
}

fn stop_criteria_trace() -> Check {
    let climb = |feedback, eda, crossover, semantic| {
        Policy::Climb(Caps {
            feedback,
            eda,
            crossover,
            semantic,
        })
    };
    let with_min = RunConfig {
        min_iterations_feedback: 3,
        min_iterations_crossover: 6,
        ..RunConfig::default()
    };
    let table: Vec<(Policy, RunConfig, [usize; 4])> = vec![
        (Policy::Flat, RunConfig::default(), [1, 4, 4, 1]),
        (climb(6, 8, 9, 10), RunConfig::default(), [4, 6, 5, 2]),
        (climb(3, 3, 3, 3), RunConfig::default(), [1, 4, 4, 1]),
        (climb(4, 4, 7, 7), RunConfig::default(), [2, 4, 7, 1]),
        (climb(9, 5, 9, 10), RunConfig::default(), [7, 4, 4, 2]),
        (Policy::Flat, with_min.clone(), [3, 4, 6, 1]),
        (climb(5, 5, 6, 6), with_min, [3, 4, 6, 1]),
    ];
    let task = scripted_task();
    for (row, (policy, config, want)) in table.iter().enumerate() {
        let oracle = counter_oracle(*policy, config);
        ensure!(
            oracle.map(|o| o.0) == *want,
            "row {row}: table {want:?} disagrees with the counter oracle {oracle:?}"
        );
        let gateway = scripted_gateway(*policy);
        let (_, record) = ok(run(config, &task, &gateway))?;
        let got = [
            record.iterations_in(PhaseId::Feedback, None),
            record.iterations_in(PhaseId::Evolution, Some(EvolutionBlock::Eda)),
            record.iterations_in(PhaseId::Evolution, Some(EvolutionBlock::Crossover)),
            record.iterations_in(PhaseId::Semantic, None),
        ];
        ensure!(got == *want, "row {row} ({policy:?}): iterations {got:?}, expected {want:?}");
        let groups = [
            (PhaseId::Feedback, None),
            (PhaseId::Evolution, Some(EvolutionBlock::Eda)),
            (PhaseId::Evolution, Some(EvolutionBlock::Crossover)),
            (PhaseId::Semantic, None),
        ];
        for (g, &(phase, block)) in groups.iter().enumerate() {
            let flags: Vec<bool> = record
                .snapshots
                .iter()
                .filter(|s| s.phase == phase && (block.is_none() || s.block == block))
                .map(|s| s.improved)
                .collect();
            let (total, improving) = oracle[g];
            let expected: Vec<bool> = (0..total).map(|i| i < improving).collect();
            ensure!(flags == expected, "row {row} phase {phase} {block:?}: improvement flags {flags:?}, expected {expected:?}");
        }
        let order: Vec<PhaseId> = record.phases.iter().map(|p| p.phase).collect();
        ensure!(
            order == [PhaseId::Init, PhaseId::Feedback, PhaseId::Evolution, PhaseId::Semantic],
            "row {row}: phase order {order:?}"
        );
    }
    Ok(format!("{} table rows", table.len()))
}

// ---------------------------------------------------------------- 6

fn cost_accounting() -> Check {
    let config = RunConfig::default();
    let task = scripted_task();
    let gateway = scripted_gateway(Policy::Flat);
    let (_, record) = ok(run(&config, &task, &gateway))?;
    let ledger = gateway.ledger_snapshot();

    // One application per initial candidate, per imperfect member per flat
    // P1/P3 iteration, and per child in each of the EDA and crossover blocks.
    let p0 = config.init_population;
    let p1 = config.phase_population * config.tolerance_feedback;
    let p2 = config.children_per_iteration * (config.tolerance_eda + config.tolerance_crossover);
    let p3 = config.phase_population * config.tolerance_semantic;
    ensure!(p0 + p1 + p2 + p3 == 15 + 5 + 16 + 5, "closed form is not 41");
    for (phase, want) in [
        (PhaseId::Init, p0),
        (PhaseId::Feedback, p1),
        (PhaseId::Evolution, p2),
        (PhaseId::Semantic, p3),
    ] {
        let got = record.applications_in(phase);
        ensure!(got == want, "{phase}: {got} applications, expected {want}");
    }
    ensure!(record.mutation_applications() == 41, "total applications {}", record.mutation_applications());

    let calls = |op| ledger.calls_for(Purpose::Operator(op));
    ensure!(calls(OperatorKind::Lamarckian) == 15, "Lamarckian calls {}", calls(OperatorKind::Lamarckian));
    ensure!(calls(OperatorKind::Feedback) == 2 * p1 as u64, "Feedback calls {}", calls(OperatorKind::Feedback));
    let eda = calls(OperatorKind::Eda) + calls(OperatorKind::EdaIndex);
    let cr = calls(OperatorKind::Crossover) + calls(OperatorKind::CrossoverDistinct);
    ensure!(eda == 8 && cr == 8, "EDA calls {eda}, crossover calls {cr}");
    ensure!(calls(OperatorKind::Semantic) == 5, "Semantic calls {}", calls(OperatorKind::Semantic));
    ensure!(ledger.mutation_calls() == 46, "mutation gateway calls {}", ledger.mutation_calls());
    // Every candidate is scored once on dev; P1 scores each member on train.
    let evals = ledger.calls_for(Purpose::Evaluation);
    ensure!(evals == (41 * N + 5 * N) as u64, "evaluation calls {evals}");
    ensure!(ledger.cache_hits() == 0, "unexpected cache hits");

    // Cache hits must never reach the backend or the call ledger.
    let dir = ok(tempfile::tempdir())?;
    let cache_path = dir.path().join("cache.jsonl");
    let cached = |counter: &Arc<AtomicUsize>| -> std::result::Result<Gateway, String> {
        let backend = common::counting_backend(Policy::Flat, Arc::clone(counter));
        Ok(Gateway::new(Arc::new(backend)).with_cache(ok(ResponseCache::open(&cache_path))?))
    };
    let cold_hits = Arc::new(AtomicUsize::new(0));
    let cold = cached(&cold_hits)?;
    ok(run(&config, &task, &cold))?;
    let cold = cold.ledger_snapshot();
    let reached = cold_hits.load(Ordering::SeqCst) as u64;
    ensure!(cold.totals().calls == reached, "ledger {} calls, backend saw {reached}", cold.totals().calls);
    let requests = cold.totals().calls + cold.cache_hits();

    let warm_hits = Arc::new(AtomicUsize::new(0));
    let warm = cached(&warm_hits)?;
    let (again, _) = ok(run(&config, &task, &warm))?;
    let warm_ledger = warm.ledger_snapshot();
    ensure!(warm_hits.load(Ordering::SeqCst) == 0, "warm run reached the backend");
    ensure!(warm_ledger.totals().calls == 0, "warm cache still recorded {} calls", warm_ledger.totals().calls);
    ensure!(
        warm_ledger.cache_hits() == requests,
        "warm run served {} hits for {requests} requests",
        warm_ledger.cache_hits()
    );
    let replayed = ok(run(&config, &task, &cached(&Arc::new(AtomicUsize::new(0)))?))?.0;
    ensure!(again.text == replayed.text, "warm runs disagree");
    Ok(format!("41 applications, 46 mutation calls, {evals} evaluation calls, warm cache 0 calls"))
}

// ---------------------------------------------------------------- 5

const TARGET: &str = "Subtract the second number from the first and answer with the difference";

fn synthetic_sweep() -> Check {
    let seeds: Vec<u64> = (1..=30).collect();
    let results = ok(Execution::Parallel.try_map(&seeds, |&seed| -> phasevo::Result<(f64, f64, f64, usize)> {
        let task = synthetic_task("sweep", seed, SplitCounts::new(20, 50, 0))?;
        let landscape = Arc::new(SyntheticLandscape::new(TARGET, &task));
        let config = RunConfig {
            rng_seed: seed,
            execution: Execution::Sequential,
            ..RunConfig::default()
        };
        let gateway = Gateway::new(Arc::new(landscape.backend()));
        let (best, record) = run(&config, &task, &gateway)?;
        let initial = record.initial_best().unwrap_or(0.0);
        let budget = record.total_iterations;
        let gateway = Gateway::new(Arc::new(landscape.backend()));
        let (base, _) = run_random_evolution_baseline(&config, &task, &gateway, budget)?;
        Ok((initial, best.dev_score.unwrap_or(0.0), base.dev_score.unwrap_or(0.0), budget))
    }))?;
    for (seed, &(initial, fin, _, _)) in seeds.iter().zip(&results) {
        ensure!(fin >= initial, "seed {seed}: final {fin} below initial {initial}");
    }
    let n = results.len() as f64;
    let phased = results.iter().map(|r| r.1).sum::<f64>() / n;
    let baseline = results.iter().map(|r| r.2).sum::<f64>() / n;
    let iters = results.iter().map(|r| r.3).sum::<usize>() as f64 / n;
    let summary = format!("phased mean {phased:.4}, baseline mean {baseline:.4}, mean budget {iters:.1} iterations");
    ensure!(phased - baseline >= -0.01, "{summary}: gap {:.4} below -0.01", phased - baseline);
    Ok(summary)
}

// ---------------------------------------------------------------- 7

fn evaluation_consistency() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut trials = Vec::new();
    for t in 0..1_000 {
        let len = rng.gen_range(1..=60);
        let density: f64 = rng.gen();
        let bits: Vec<bool> = (0..len).map(|_| rng.gen_bool(density)).collect();
        trials.push((format!("trial {t}"), bits));
    }
    trials.push(("worked example".into(), vec![true, true, true, false, false]));
    let table: Arc<HashMap<String, Vec<bool>>> = Arc::new(trials.iter().cloned().collect());
    let lookup = Arc::clone(&table);
    let backend = MockBackend::new().with_responder(move |req: &CompletionRequest| {
        let (prompt, input) = phasevo::evaluation::split_query(&req.prompt_text)?;
        let i: usize = input.strip_prefix('q')?.parse().ok()?;
        let correct = *lookup.get(prompt)?.get(i)?;
        Some(if correct { format!("a{i}") } else { format!("wrong {i}") })
    });
    let gateway = Gateway::new(Arc::new(backend));
    let evaluator = Evaluator::new(0.0);
    for (prompt, bits) in &trials {
        let examples: Vec<TaskExample> = (0..bits.len())
            .map(|i| TaskExample::new(format!("q{i}"), vec![format!("a{i}")], Split::Dev).unwrap())
            .collect();
        let r: EvalResult = ok(evaluator.evaluate(prompt, &examples, MatchMode::ExactAny, &gateway))?;
        let ones = bits.iter().filter(|&&b| b).count();
        ensure!(r.score == ones as f64 / bits.len() as f64, "{prompt}: score {}", r.score);
        ensure!(r.perf_vector.bits() == bits.as_slice(), "{prompt}: vector mismatch");
        ensure!(r.wrong_cases.len() == bits.len() - ones, "{prompt}: {} wrong cases", r.wrong_cases.len());
        let wrong_inputs: Vec<String> = r.wrong_cases.iter().map(|w| w.input.clone()).collect();
        let expected: Vec<String> = (0..bits.len()).filter(|&i| !bits[i]).map(|i| format!("q{i}")).collect();
        ensure!(wrong_inputs == expected, "{prompt}: wrong cases out of order");
    }
    let worked = &table["worked example"];
    let examples: Vec<TaskExample> = (0..5)
        .map(|i| TaskExample::new(format!("q{i}"), vec![format!("a{i}")], Split::Dev).unwrap())
        .collect();
    let r = ok(evaluator.evaluate("worked example", &examples, MatchMode::ExactAny, &gateway))?;
    ensure!(r.score == 0.6, "worked example score {}", r.score);
    ensure!(r.perf_vector == PerformanceVector::new(worked.clone()), "worked example vector");
    ensure!(
        r.perf_vector == ok(PerformanceVector::from_bits(&[1, 1, 1, 0, 0]))?,
        "worked example is not [1,1,1,0,0]"
    );
    Ok("1000 random outcomes plus the 3-of-5 example".into())
}

// ---------------------------------------------------------------- 8

fn report_bytes(record: &phasevo::RunRecord, best: &PromptCandidate, gateway: &Gateway) -> std::result::Result<Vec<Vec<u8>>, String> {
    let dir = ok(tempfile::tempdir())?;
    ok(emit_report(record, Some(best), &gateway.ledger_snapshot(), dir.path()))?;
    ["best_prompt.txt", "scores.csv", "cost.csv"]
        .iter()
        .map(|f| ok(std::fs::read(dir.path().join(f))))
        .collect()
}

fn checkpoint_determinism() -> Check {
    let task = ok(synthetic_task("resume", 11, SplitCounts::new(20, 30, 0)))?;
    let settings = Settings {
        run: RunConfig {
            rng_seed: 11,
            ..RunConfig::default()
        },
        ..Settings::default()
    };
    let landscape = Arc::new(SyntheticLandscape::new(TARGET, &task));
    let gateway = Gateway::new(Arc::new(landscape.backend()));
    let mut engine = ok(Engine::new(&settings.run, &task, &gateway, RunMode::Phased))?;
    let mut checkpoints = Vec::new();
    let outcome = ok(engine.run_with(|e| {
        checkpoints.push(Checkpoint::capture(&settings, &task, e, &gateway)?.to_json()?);
        Ok(Control::Continue)
    }))?;
    let Outcome::Finished { best, record } = outcome else {
        return Err("uninterrupted run did not finish".into());
    };
    let reference = report_bytes(&record, &best, &gateway)?;

    for (i, json) in checkpoints.iter().enumerate() {
        let cp = ok(Checkpoint::from_json(json, &format!("checkpoint {i}")))?;
        let gateway = Gateway::new(Arc::new(landscape.backend()));
        let mut engine = ok(cp.resume(&gateway))?;
        let (best, record) = ok(engine.run_to_end())?;
        let got = report_bytes(&record, &best, &gateway)?;
        ensure!(got[0] == reference[0], "resume after step {i}: best_prompt.txt differs");
        ensure!(got == reference, "resume after step {i}: scores or cost trace differs");
    }
    Ok(format!("{} resume points byte-identical", checkpoints.len()))
}

// ---------------------------------------------------------------- 9

/// Prompts `s=S`: the first S of 16 probe cases pass.
struct ScriptedLab;

const PROBES: usize = 16;

fn s_of(text: &str) -> usize {
    text.match_indices("s=")
        .filter_map(|(at, _)| {
            let digits: String = text[at + 2..].chars().take_while(char::is_ascii_digit).collect();
            digits.parse().ok()
        })
        .max()
        .unwrap_or(0)
}

impl Landscape for ScriptedLab {
    fn initial_population(&self, _init: usize, size: usize) -> Vec<String> {
        vec!["s=10".to_string(); size]
    }

    fn evaluate(&self, text: &str) -> EvalResult {
        let s = s_of(text).min(PROBES);
        let bits: Vec<bool> = (0..PROBES).map(|i| i < s).collect();
        let examples: Vec<TaskExample> = (0..PROBES)
            .map(|i| TaskExample::new(format!("x{i}"), vec![format!("y{i}")], Split::Train).unwrap())
            .collect();
        let outputs: Vec<String> = (0..PROBES).map(|i| if i < s { format!("y{i}") } else { "-".into() }).collect();
        EvalResult::from_outcomes(&examples, &outputs, &bits)
    }
}

/// Feedback lifts s=10 to 11 once and then stalls; every other operator
/// answers one more than its best parent.
fn scripted_lab_reply(req: &CompletionRequest) -> Option<String> {
    let Purpose::Operator(op) = req.purpose else { return None };
    let parent = s_of(&req.prompt_text);
    match op {
        OperatorKind::Feedback if req.prompt_text.contains("## Cases where it gets wrong:##") => Some("add one".into()),
        OperatorKind::Feedback => Some(format!("s={}", if parent == 10 { 11 } else { parent })),
        _ => Some(format!("s={}", parent + 1)),
    }
}

fn lab_protocol() -> Check {
    let config = LabConfig::default();
    ensure!(config.applications_per_operator() == 100, "default lab budget {}", config.applications_per_operator());

    let task = ok(synthetic_task("lab", 9, SplitCounts::new(20, 50, 0)))?;
    let landscape = Arc::new(SyntheticLandscape::new(TARGET, &task));
    let gateway = Gateway::new(Arc::new(landscape.backend()));
    let stats = ok(run_lab(&config, 9, 0.5, Execution::Parallel, &gateway, landscape.as_ref()))?;
    ensure!(stats.operators.len() == 6, "{} operators measured", stats.operators.len());
    for s in &stats.operators {
        ensure!(s.applications == 100, "{}: {} applications", s.operator, s.applications);
        ensure!(s.steps.len() == 5 && s.steps.iter().all(|st| st.applications == 20), "{}: uneven steps", s.operator);
    }

    let gateway = Gateway::new(Arc::new(MockBackend::new().with_responder(scripted_lab_reply)));
    let stats = ok(run_lab(&config, 9, 0.5, Execution::Sequential, &gateway, &ScriptedLab))?;
    let cells = (config.inits * config.rounds) as f64;
    for s in &stats.operators {
        let expected: Vec<(usize, f64)> = match s.operator {
            // 10/16 -> 11/16 is a gain of exactly one tenth, then nothing.
            OperatorKind::Feedback => vec![(20, 0.1), (0, 0.0), (0, 0.0), (0, 0.0), (0, 0.0)],
            // The chain climbs 10 -> 15, one probe per step.
            OperatorKind::Semantic => (10..15).map(|b| (20, 1.0 / b as f64)).collect(),
            // Five members at 10; each child (best + 1) replaces the worst.
            _ => {
                let mut members = vec![10u32; 5];
                let mut steps = Vec::new();
                for _ in 0..5 {
                    let before: u32 = members.iter().sum();
                    let child = members.iter().max().unwrap() + 1;
                    members.push(child);
                    members.sort_unstable_by(|a, b| b.cmp(a));
                    members.truncate(5);
                    let after: u32 = members.iter().sum();
                    steps.push((20, (after - before) as f64 / before as f64));
                }
                steps
            }
        };
        for (st, &(count, ratio)) in s.steps.iter().zip(&expected) {
            ensure!(
                st.improvement_count == count,
                "{} step {}: {} improvements, expected {count}",
                s.operator,
                st.step,
                st.improvement_count
            );
            ensure!(
                (st.mean_ratio - ratio).abs() <= 1e-12,
                "{} step {}: mean ratio {}, expected {ratio}",
                s.operator,
                st.step,
                st.mean_ratio
            );
            ensure!(st.applications as f64 == cells, "{} step {}: {} applications", s.operator, st.step, st.applications);
        }
    }
    let fb = stats.get(OperatorKind::Feedback).ok_or("no Feedback stats")?;
    ensure!(fb.steps[0].mean_ratio == 0.1, "Feedback step 1 ratio {} is not exactly 0.1", fb.steps[0].mean_ratio);
    Ok("100 applications per operator; scripted per-step stats match".into())
}

// ----------------------------------------------------------------

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 template golden files", 1, golden_templates),
        ("2 hamming/similarity axioms", 5, similarity_axioms),
        ("3 EDA parent selection oracle", 10, eda_selection_oracle),
        ("4 stop-criteria trace", 5, stop_criteria_trace),
        ("5 synthetic landscape sweep", 120, synthetic_sweep),
        ("6 cost accounting", 10, cost_accounting),
        ("7 evaluation consistency", 5, evaluation_consistency),
        ("8 checkpoint determinism", 60, checkpoint_determinism),
        ("9 lab protocol", 30, lab_protocol),
    ];
    let mut failed = 0;
    for (name, limit, check) in criteria {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let result = result.and_then(|detail| {
            if elapsed > Duration::from_secs(limit) {
                Err(format!("{detail}; took {elapsed:.2?}, limit {limit}s"))
            } else {
                Ok(detail)
            }
        });
        match result {
            Ok(detail) => println!("PASS criterion {name} ({elapsed:.2?}): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name} ({elapsed:.2?}): {why}");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
