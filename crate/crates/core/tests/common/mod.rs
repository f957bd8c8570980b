//! Scripted backends for engine-level tests.
//!
//! Prompts look like `solve k=K #hint`. Such a prompt answers example `I`
//! correctly iff `I < K`, so with `N` examples per split its dev score is
//! exactly `K / N`. Operator replies are computed from the `k=` values found
//! in the rendered operator prompt, which makes every trace exact.

#![allow(dead_code)]

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use phasevo::evaluation::{split_query, MatchMode, Split, TaskExample};
use phasevo::gateway::{CompletionRequest, Gateway, MockBackend};
use phasevo::task::TaskFile;
use phasevo::{OperatorKind, Purpose};

pub const N: usize = 10;
pub const INIT_K: usize = 3;

/// Index of a scripted example input such as `d7` or `t3`.
fn example_index(input: &str) -> Option<usize> {
    input.get(1..)?.parse().ok()
}

pub fn scripted_task() -> TaskFile {
    let mut examples = Vec::new();
    for (prefix, split) in [("t", Split::Train), ("d", Split::Dev)] {
        for i in 0..N {
            examples.push(TaskExample::new(format!("{prefix}{i}"), vec![format!("y{i}")], split).unwrap());
        }
    }
    TaskFile {
        name: "scripted".into(),
        match_mode: MatchMode::ExactAny,
        examples,
        seed_prompts: vec!["solve k=1 #seed".into()],
    }
}

/// Every `k=<digits>` value in `text`, in order.
pub fn ks(text: &str) -> Vec<usize> {
    text.match_indices("k=")
        .filter_map(|(at, _)| {
            let digits: String = text[at + 2..].chars().take_while(char::is_ascii_digit).collect();
            digits.parse().ok()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Caps {
    pub feedback: usize,
    pub eda: usize,
    pub crossover: usize,
    pub semantic: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    /// Lamarckian gives the initial k; every other child solves nothing.
    Flat,
    /// Each child is one better than its best parent, up to a per-family cap.
    Climb(Caps),
}

fn reply(policy: Policy, init_k: usize, req: &CompletionRequest) -> Option<String> {
    match req.purpose {
        Purpose::Evaluation => {
            let (prompt, input) = split_query(&req.prompt_text)?;
            let k = ks(prompt).first().copied().unwrap_or(0);
            let i = example_index(input)?;
            Some(if i < k { format!("y{i}") } else { "n".into() })
        }
        Purpose::Operator(op) => {
            if op == OperatorKind::Feedback && req.prompt_text.contains("## Cases where it gets wrong:##") {
                return Some("be more careful".into());
            }
            let parent = ks(&req.prompt_text).into_iter().max().unwrap_or(0);
            let k = match (policy, op) {
                (_, OperatorKind::Lamarckian) => init_k,
                (Policy::Flat, _) => 0,
                (Policy::Climb(c), op) => {
                    let cap = match op {
                        OperatorKind::Feedback => c.feedback,
                        OperatorKind::Eda | OperatorKind::EdaIndex => c.eda,
                        OperatorKind::Crossover | OperatorKind::CrossoverDistinct => c.crossover,
                        _ => c.semantic,
                    };
                    (parent + 1).min(cap)
                }
            };
            Some(format!("solve k={k} #{:016x}", req.seed_hint.unwrap_or(0)))
        }
    }
}

pub fn scripted_backend(policy: Policy) -> MockBackend {
    scripted_backend_from(policy, INIT_K)
}

/// Scripted backend whose Lamarckian children start at `init_k`.
pub fn scripted_backend_from(policy: Policy, init_k: usize) -> MockBackend {
    MockBackend::new()
        .named(format!("scripted-{policy:?}"))
        .with_responder(move |req: &CompletionRequest| reply(policy, init_k, req))
}

/// Like [`scripted_backend`], counting every request that reaches it.
pub fn counting_backend(policy: Policy, hits: Arc<AtomicUsize>) -> MockBackend {
    MockBackend::new()
        .named(format!("scripted-{policy:?}"))
        .with_responder(move |req: &CompletionRequest| {
            hits.fetch_add(1, Ordering::SeqCst);
            reply(policy, INIT_K, req)
        })
}

pub fn scripted_gateway(policy: Policy) -> Gateway {
    Gateway::new(Arc::new(scripted_backend(policy)))
}
