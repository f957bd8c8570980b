//! The seven LLM-backed mutation operators.
//!
//! Each operator renders its template, sends it through the gateway at the
//! operator temperature and returns the raw model output as an
//! [`Offspring`]. Operators never touch their input candidates; the engine
//! turns offspring into scored candidates.

pub mod templates;

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{rank_order, similarity, CandidateId, Population, PromptCandidate};
use crate::error::{Error, Result};
use crate::gateway::{CompletionRequest, Gateway, Purpose};
use templates::{template, TemplateId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OperatorKind {
    Lamarckian,
    Feedback,
    #[serde(rename = "EDA")]
    Eda,
    #[serde(rename = "EDA_Index")]
    EdaIndex,
    Crossover,
    #[serde(rename = "Crossover_Distinct")]
    CrossoverDistinct,
    Semantic,
}

impl OperatorKind {
    pub const ALL: [OperatorKind; 7] = [
        OperatorKind::Lamarckian,
        OperatorKind::Feedback,
        OperatorKind::Eda,
        OperatorKind::EdaIndex,
        OperatorKind::Crossover,
        OperatorKind::CrossoverDistinct,
        OperatorKind::Semantic,
    ];

    /// Stable serialized name.
    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::Lamarckian => "Lamarckian",
            OperatorKind::Feedback => "Feedback",
            OperatorKind::Eda => "EDA",
            OperatorKind::EdaIndex => "EDA_Index",
            OperatorKind::Crossover => "Crossover",
            OperatorKind::CrossoverDistinct => "Crossover_Distinct",
            OperatorKind::Semantic => "Semantic",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name().eq_ignore_ascii_case(name))
    }

    /// Parent count bounds (inclusive; `None` = unbounded).
    pub fn arity(self) -> (usize, Option<usize>) {
        match self {
            OperatorKind::Lamarckian => (0, Some(0)),
            OperatorKind::Feedback | OperatorKind::Semantic => (1, Some(1)),
            OperatorKind::Crossover | OperatorKind::CrossoverDistinct => (2, Some(2)),
            OperatorKind::Eda | OperatorKind::EdaIndex => (2, None),
        }
    }

    /// Templates this operator renders, in call order.
    pub fn templates(self) -> &'static [TemplateId] {
        match self {
            OperatorKind::Lamarckian => &[TemplateId::Lamarckian],
            OperatorKind::Feedback => &[TemplateId::FeedbackGeneration, TemplateId::FeedbackApplication],
            OperatorKind::Eda => &[TemplateId::Eda],
            OperatorKind::EdaIndex => &[TemplateId::EdaIndex],
            OperatorKind::Crossover | OperatorKind::CrossoverDistinct => &[TemplateId::Crossover],
            OperatorKind::Semantic => &[TemplateId::Semantic],
        }
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemonstrationPair {
    pub input: String,
    pub outputs: Vec<String>,
}

impl DemonstrationPair {
    pub fn new(input: impl Into<String>, outputs: Vec<String>) -> Result<Self> {
        let input = input.into();
        if input.is_empty() || outputs.is_empty() {
            return Err(Error::InvalidArgument(
                "demonstration pair needs an input and at least one output".into(),
            ));
        }
        Ok(DemonstrationPair { input, outputs })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackText(String);

impl FeedbackText {
    pub fn new(text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::InvalidArgument("feedback text is empty".into()));
        }
        Ok(FeedbackText(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WrongCase {
    pub input: String,
    pub expected: Vec<String>,
    pub actual: String,
}

/// Raw operator output plus the provenance the engine needs for lineage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Offspring {
    pub text: String,
    pub operator: OperatorKind,
    pub parent_ids: Vec<CandidateId>,
}

/// Gateway handle plus sampling settings shared by operator calls.
#[derive(Clone, Copy)]
pub struct OperatorContext<'g> {
    pub gateway: &'g Gateway,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
}

impl<'g> OperatorContext<'g> {
    pub fn new(gateway: &'g Gateway, temperature: f64) -> Self {
        OperatorContext {
            gateway,
            temperature,
            max_tokens: None,
        }
    }

    fn call<R: Rng + ?Sized>(&self, prompt: String, op: OperatorKind, rng: &mut R) -> Result<String> {
        let req = CompletionRequest::new(prompt, self.temperature, Purpose::Operator(op))
            .with_max_tokens(self.max_tokens)
            .with_seed_hint(rng.gen());
        Ok(self.gateway.complete(&req)?.text)
    }
}

/// Python-style list literal: `['68']`.
pub fn python_list(items: &[String]) -> String {
    let quoted: Vec<String> = items
        .iter()
        .map(|s| {
            if s.contains('\'') && !s.contains('"') {
                format!("\"{}\"", s.replace('\\', "\\\\"))
            } else {
                format!("'{}'", s.replace('\\', "\\\\").replace('\'', "\\'"))
            }
        })
        .collect();
    format!("[{}]", quoted.join(", "))
}

pub fn format_pairs(pairs: &[DemonstrationPair]) -> String {
    pairs
        .iter()
        .map(|p| format!("## Input ## : {}\n## Output ##: {}", p.input, python_list(&p.outputs)))
        .collect::<Vec<_>>()
        .join("\n\n")
}

pub fn format_wrong_cases(cases: &[WrongCase]) -> String {
    cases
        .iter()
        .map(|c| format!("Input: {}\nExpected: {}\nGot: {}", c.input, python_list(&c.expected), c.actual))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Numbered prompt list for the EDA templates.
pub fn format_prompt_list(prompts: &[&str]) -> String {
    prompts
        .iter()
        .enumerate()
        .map(|(i, p)| format!("{}. {p}", i + 1))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Inverse of [`format_prompt_list`] for single-paragraph prompts.
pub fn parse_prompt_list(list: &str) -> Vec<String> {
    list.split("\n\n")
        .enumerate()
        .map(|(i, block)| {
            let prefix = format!("{}. ", i + 1);
            block.strip_prefix(&prefix).unwrap_or(block).to_string()
        })
        .collect()
}

pub fn render_lamarckian(pairs: &[DemonstrationPair]) -> Result<String> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("Lamarckian needs at least one pair".into()));
    }
    template(TemplateId::Lamarckian).render(&[("input output pairs", &format_pairs(pairs))])
}

pub fn lamarckian_mutate<R: Rng + ?Sized>(
    ctx: &OperatorContext<'_>,
    pairs: &[DemonstrationPair],
    rng: &mut R,
) -> Result<Offspring> {
    let prompt = render_lamarckian(pairs)?;
    let text = ctx.call(prompt, OperatorKind::Lamarckian, rng)?;
    Ok(Offspring {
        text,
        operator: OperatorKind::Lamarckian,
        parent_ids: Vec::new(),
    })
}

pub fn render_feedback_generation(prompt: &str, wrong_cases: &[WrongCase]) -> Result<String> {
    if wrong_cases.is_empty() {
        return Err(Error::InvalidArgument(
            "feedback needs at least one wrong case".into(),
        ));
    }
    template(TemplateId::FeedbackGeneration).render(&[
        ("existing prompt", prompt),
        ("wrong cases", &format_wrong_cases(wrong_cases)),
    ])
}

/// First half of Feedback mutation: ask for improvement advice.
pub fn feedback_gradient<R: Rng + ?Sized>(
    ctx: &OperatorContext<'_>,
    prompt: &str,
    wrong_cases: &[WrongCase],
    rng: &mut R,
) -> Result<FeedbackText> {
    let rendered = render_feedback_generation(prompt, wrong_cases)?;
    FeedbackText::new(ctx.call(rendered, OperatorKind::Feedback, rng)?)
}

pub fn render_feedback_application(prompt: &str, feedback: &FeedbackText) -> Result<String> {
    if prompt.is_empty() {
        return Err(Error::InvalidArgument("prompt is empty".into()));
    }
    template(TemplateId::FeedbackApplication)
        .render(&[("existing prompt", prompt), ("feedback", feedback.as_str())])
}

/// Second half of Feedback mutation: apply the advice to the prompt.
pub fn feedback_apply<R: Rng + ?Sized>(
    ctx: &OperatorContext<'_>,
    parent: &PromptCandidate,
    feedback: &FeedbackText,
    rng: &mut R,
) -> Result<Offspring> {
    let rendered = render_feedback_application(&parent.text, feedback)?;
    let text = ctx.call(rendered, OperatorKind::Feedback, rng)?;
    Ok(Offspring {
        text,
        operator: OperatorKind::Feedback,
        parent_ids: vec![parent.id.clone()],
    })
}

/// Greedy diverse subset: scan by rank, accept a member iff its similarity
/// to every accepted member is at most `threshold`, stop at `max_k`.
pub fn select_eda_parents(
    pop: &Population,
    threshold: f64,
    max_k: usize,
) -> Result<Vec<&PromptCandidate>> {
    if pop.is_empty() {
        return Err(Error::InvalidState("EDA on an empty population".into()));
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidArgument(format!(
            "similarity threshold {threshold} outside [0, 1]"
        )));
    }
    for m in pop.members() {
        m.require_score()?;
        m.require_vector()?;
    }
    let mut accepted: Vec<&PromptCandidate> = Vec::new();
    for cand in pop.ranked() {
        if accepted.len() >= max_k {
            break;
        }
        let v = cand.require_vector()?;
        let mut diverse = true;
        for a in &accepted {
            if similarity(v, a.require_vector()?)? > threshold {
                diverse = false;
                break;
            }
        }
        if diverse {
            accepted.push(cand);
        }
    }
    Ok(accepted)
}

pub fn render_eda(parent_texts: &[&str], indexed: bool) -> Result<String> {
    let id = if indexed { TemplateId::EdaIndex } else { TemplateId::Eda };
    template(id).render(&[("existing prompt", &format_prompt_list(parent_texts))])
}

/// EDA / EDA+Index mutation. Unindexed parents are shuffled with `rng`;
/// indexed parents are listed worst-first (ascending score) under a header
/// that calls the list best-to-worst.
pub fn eda_mutate<R: Rng + ?Sized>(
    ctx: &OperatorContext<'_>,
    parents: &[&PromptCandidate],
    indexed: bool,
    rng: &mut R,
) -> Result<Offspring> {
    if parents.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "EDA needs at least 2 parents, got {}",
            parents.len()
        )));
    }
    let mut ordered: Vec<&PromptCandidate> = parents.to_vec();
    if indexed {
        ordered.sort_by(|a, b| rank_order(b, a));
    } else {
        ordered.shuffle(rng);
    }
    let texts: Vec<&str> = ordered.iter().map(|p| p.text.as_str()).collect();
    let op = if indexed { OperatorKind::EdaIndex } else { OperatorKind::Eda };
    let text = ctx.call(render_eda(&texts, indexed)?, op, rng)?;
    Ok(Offspring {
        text,
        operator: op,
        parent_ids: ordered.iter().map(|p| p.id.clone()).collect(),
    })
}

pub fn render_crossover(first: &str, second: &str) -> Result<String> {
    template(TemplateId::Crossover).render(&[("prompt 1", first), ("prompt 2", second)])
}

/// Crossover of two distinct parents. `distinct` tags the child as CR+D
/// (the second parent was chosen by [`crate::domain::select_distinct_partner`]).
pub fn crossover_mutate<R: Rng + ?Sized>(
    ctx: &OperatorContext<'_>,
    first: &PromptCandidate,
    second: &PromptCandidate,
    distinct: bool,
    rng: &mut R,
) -> Result<Offspring> {
    if first.id == second.id {
        return Err(Error::InvalidArgument(format!(
            "crossover parents must differ, both are {}",
            first.id
        )));
    }
    let op = if distinct {
        OperatorKind::CrossoverDistinct
    } else {
        OperatorKind::Crossover
    };
    let text = ctx.call(render_crossover(&first.text, &second.text)?, op, rng)?;
    Ok(Offspring {
        text,
        operator: op,
        parent_ids: vec![first.id.clone(), second.id.clone()],
    })
}

pub fn render_semantic(prompt: &str) -> Result<String> {
    if prompt.is_empty() {
        return Err(Error::InvalidArgument("prompt is empty".into()));
    }
    template(TemplateId::Semantic).render(&[("existing prompt", prompt)])
}

pub fn semantic_mutate<R: Rng + ?Sized>(
    ctx: &OperatorContext<'_>,
    parent: &PromptCandidate,
    rng: &mut R,
) -> Result<Offspring> {
    let text = ctx.call(render_semantic(&parent.text)?, OperatorKind::Semantic, rng)?;
    Ok(Offspring {
        text,
        operator: OperatorKind::Semantic,
        parent_ids: vec![parent.id.clone()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::testing::scored;
    use crate::domain::PhaseId;
    use crate::gateway::{CompletionRequest, MockBackend};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn echo_gateway() -> Gateway {
        Gateway::new(Arc::new(
            MockBackend::new().with_responder(|r: &CompletionRequest| Some(r.prompt_text.clone())),
        ))
    }

    fn pair(i: &str, o: &str) -> DemonstrationPair {
        DemonstrationPair::new(i, vec![o.to_string()]).unwrap()
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn lamarckian_rendering() {
        let out = render_lamarckian(&[pair("92 24", "68")]).unwrap();
        assert!(out.starts_with("I gave a friend an instruction"));
        assert!(out.contains("## Input ## : 92 24"));
        assert!(out.contains("## Output ##: ['68']"));
        assert!(out.ends_with("The instruction was:"));

        let two = render_lamarckian(&[pair("first in", "a"), pair("second in", "b")]).unwrap();
        assert!(two.find("first in").unwrap() < two.find("second in").unwrap());
        assert!(matches!(render_lamarckian(&[]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn lamarckian_passes_backend_text_through() {
        let g = Gateway::new(Arc::new(MockBackend::new().with_queue(
            Purpose::Operator(OperatorKind::Lamarckian),
            ["Subtract the second number from the first"],
        )));
        let ctx = OperatorContext::new(&g, 0.5);
        let off = lamarckian_mutate(&ctx, &[pair("92 24", "68")], &mut rng()).unwrap();
        assert_eq!(off.text, "Subtract the second number from the first");
        assert!(off.parent_ids.is_empty());
        assert_eq!(
            g.ledger_snapshot().calls(PhaseId::Init, Purpose::Operator(OperatorKind::Lamarckian)),
            1
        );
        assert!(lamarckian_mutate(&ctx, &[], &mut rng()).is_err());
        assert_eq!(g.ledger_snapshot().totals().calls, 1);
    }

    #[test]
    fn feedback_rendering() {
        let case = WrongCase {
            input: "7 20".into(),
            expected: vec!["13".into()],
            actual: "-13".into(),
        };
        let gen = render_feedback_generation("Subtract.", &[case]).unwrap();
        assert!(gen.contains("## Existing Prompt ##\nSubtract.\n"));
        assert!(gen.contains("Input: 7 20\nExpected: ['13']\nGot: -13"));
        assert!(gen.ends_with(
            "ways to improve the existing prompt based on observations of the mistakes in the cases above are:"
        ));
        assert!(matches!(
            render_feedback_generation("Subtract.", &[]),
            Err(Error::InvalidArgument(_))
        ));

        let app = render_feedback_application("Subtract.", &FeedbackText::new("be exact").unwrap()).unwrap();
        assert!(app.ends_with("## Improved Prompt##"));
        assert!(app.contains("## Feedback##\nbe exact\n"));
        assert!(FeedbackText::new("  ").is_err());
    }

    #[test]
    fn feedback_apply_returns_scripted_text() {
        let g = Gateway::new(Arc::new(MockBackend::new().with_queue(
            Purpose::Operator(OperatorKind::Feedback),
            ["Improved prompt."],
        )));
        let ctx = OperatorContext::new(&g, 0.5);
        let parent = scored("p", &[1, 0]);
        let off = feedback_apply(&ctx, &parent, &FeedbackText::new("tip").unwrap(), &mut rng()).unwrap();
        assert_eq!(off.text, "Improved prompt.");
        assert_eq!(off.parent_ids, vec![parent.id.clone()]);
    }

    fn pop(members: Vec<PromptCandidate>) -> Population {
        let n = members.len();
        Population::new(members, n).unwrap()
    }

    #[test]
    fn eda_parents_all_diverse() {
        // pairwise similarity 0
        let mut a = scored("a", &[1, 1, 0, 0, 0, 0]);
        let mut b = scored("b", &[0, 0, 1, 1, 0, 0]);
        let mut c = scored("c", &[0, 0, 0, 0, 1, 1]);
        a.dev_score = Some(0.9);
        b.dev_score = Some(0.8);
        c.dev_score = Some(0.7);
        let p = pop(vec![c, a, b]);
        let got: Vec<&str> = select_eda_parents(&p, 0.7, 5).unwrap().iter().map(|m| m.id.as_str()).collect();
        assert_eq!(got, vec!["a", "b", "c"]);
        let top: Vec<&str> = select_eda_parents(&p, 0.7, 1).unwrap().iter().map(|m| m.id.as_str()).collect();
        assert_eq!(top, vec!["a"]);
    }

    #[test]
    fn eda_parents_skip_near_duplicates() {
        let mut a = scored("a", &[1, 1, 1, 1, 1]);
        let mut b = scored("b", &[1, 1, 1, 1, 1]);
        let mut c = scored("c", &[1, 0, 0, 0, 0]); // similarity to a = 0.2
        a.dev_score = Some(0.9);
        b.dev_score = Some(0.8);
        c.dev_score = Some(0.7);
        let p = pop(vec![a, b, c]);
        let got: Vec<&str> = select_eda_parents(&p, 0.7, 5).unwrap().iter().map(|m| m.id.as_str()).collect();
        assert_eq!(got, vec!["a", "c"]);
    }

    #[test]
    fn eda_threshold_is_inclusive() {
        let mut a = scored("a", &[1, 1, 1, 1, 1, 1, 1, 1, 1, 1]);
        let mut b = scored("b", &[1, 1, 1, 1, 1, 1, 1, 0, 0, 0]); // similarity 0.7
        a.dev_score = Some(0.9);
        b.dev_score = Some(0.8);
        let p = pop(vec![a, b]);
        assert_eq!(select_eda_parents(&p, 0.7, 5).unwrap().len(), 2);
        assert_eq!(select_eda_parents(&p, 0.69, 5).unwrap().len(), 1);
    }

    #[test]
    fn eda_parents_errors() {
        let empty = Population::new(vec![], 5).unwrap();
        assert!(matches!(select_eda_parents(&empty, 0.7, 5), Err(Error::InvalidState(_))));
        let mut unscored = scored("a", &[1]);
        unscored.dev_score = None;
        unscored.perf_vector = None;
        assert!(select_eda_parents(&pop(vec![unscored]), 0.7, 5).is_err());
    }

    #[test]
    fn eda_index_lists_worst_first() {
        let g = echo_gateway();
        let ctx = OperatorContext::new(&g, 0.5);
        let mut hi = scored("hi", &[1, 1]);
        hi.text = "HIGH prompt".into();
        let mut lo = scored("lo", &[1, 0]);
        lo.text = "LOW prompt".into();
        let off = eda_mutate(&ctx, &[&hi, &lo], true, &mut rng()).unwrap();
        assert!(off.text.contains("ranked by their quality from best to worst"));
        assert!(off.text.find("LOW prompt").unwrap() < off.text.find("HIGH prompt").unwrap());
        assert_eq!(off.operator, OperatorKind::EdaIndex);
        assert_eq!(off.parent_ids.len(), 2);
    }

    #[test]
    fn eda_shuffle_is_seeded() {
        let g = echo_gateway();
        let ctx = OperatorContext::new(&g, 0.5);
        let parents: Vec<PromptCandidate> =
            (0..6).map(|i| scored(&format!("p{i}"), &[1, 0, (i % 2) as u8])).collect();
        let refs: Vec<&PromptCandidate> = parents.iter().collect();
        let a = eda_mutate(&ctx, &refs, false, &mut rng()).unwrap();
        let b = eda_mutate(&ctx, &refs, false, &mut rng()).unwrap();
        assert_eq!(a, b);
        assert!(!a.text.contains("best to worst"));
        assert!(eda_mutate(&ctx, &refs[..1], false, &mut rng()).is_err());
    }

    #[test]
    fn crossover_rendering_and_precondition() {
        let g = echo_gateway();
        let ctx = OperatorContext::new(&g, 0.5);
        let p1 = scored("a", &[1]);
        let p2 = scored("b", &[0]);
        let off = crossover_mutate(&ctx, &p1, &p2, false, &mut rng()).unwrap();
        assert!(off.text.contains(&format!("Parent prompt 1: {}", p1.text)));
        assert!(off.text.contains("Offspring prompt:"));
        assert_eq!(off.operator, OperatorKind::Crossover);
        let d = crossover_mutate(&ctx, &p1, &p2, true, &mut rng()).unwrap();
        assert_eq!(d.operator, OperatorKind::CrossoverDistinct);
        assert!(matches!(
            crossover_mutate(&ctx, &p1, &p1, false, &mut rng()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn semantic_rendering() {
        let out = render_semantic("Classify sentiment.").unwrap();
        assert!(out.contains("your task is to generate another prompt"));
        assert!(out.ends_with("current prompt: Classify sentiment.\nmutated prompt::"));
        let g = Gateway::new(Arc::new(MockBackend::new().with_queue(
            Purpose::Operator(OperatorKind::Semantic),
            ["Label the sentiment."],
        )));
        let off = semantic_mutate(&OperatorContext::new(&g, 0.5), &scored("x", &[1]), &mut rng()).unwrap();
        assert_eq!(off.text, "Label the sentiment.");
    }

    #[test]
    fn operator_names_round_trip() {
        for k in OperatorKind::ALL {
            assert_eq!(OperatorKind::from_name(k.name()), Some(k));
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.name()));
        }
    }

    #[test]
    fn python_list_quoting() {
        assert_eq!(python_list(&["68".into()]), "['68']");
        assert_eq!(python_list(&["it's".into(), "b".into()]), "[\"it's\", 'b']");
    }

    #[test]
    fn prompt_list_round_trip() {
        let list = format_prompt_list(&["alpha", "beta gamma"]);
        assert_eq!(list, "1. alpha\n\n2. beta gamma");
        assert_eq!(parse_prompt_list(&list), vec!["alpha", "beta gamma"]);
    }
}
