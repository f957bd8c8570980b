//! Operator prompt templates, embedded at build time and checksum-verified
//! on first use. Slots are written `{slot name}`.

use std::sync::LazyLock;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TemplateId {
    Lamarckian,
    FeedbackGeneration,
    FeedbackApplication,
    Eda,
    EdaIndex,
    Crossover,
    Semantic,
}

impl TemplateId {
    pub const ALL: [TemplateId; 7] = [
        TemplateId::Lamarckian,
        TemplateId::FeedbackGeneration,
        TemplateId::FeedbackApplication,
        TemplateId::Eda,
        TemplateId::EdaIndex,
        TemplateId::Crossover,
        TemplateId::Semantic,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            TemplateId::Lamarckian => "lamarckian.txt",
            TemplateId::FeedbackGeneration => "feedback_generation.txt",
            TemplateId::FeedbackApplication => "feedback_application.txt",
            TemplateId::Eda => "eda.txt",
            TemplateId::EdaIndex => "eda_index.txt",
            TemplateId::Crossover => "crossover.txt",
            TemplateId::Semantic => "semantic.txt",
        }
    }

    pub fn source(self) -> &'static str {
        match self {
            TemplateId::Lamarckian => include_str!("../../templates/lamarckian.txt"),
            TemplateId::FeedbackGeneration => include_str!("../../templates/feedback_generation.txt"),
            TemplateId::FeedbackApplication => include_str!("../../templates/feedback_application.txt"),
            TemplateId::Eda => include_str!("../../templates/eda.txt"),
            TemplateId::EdaIndex => include_str!("../../templates/eda_index.txt"),
            TemplateId::Crossover => include_str!("../../templates/crossover.txt"),
            TemplateId::Semantic => include_str!("../../templates/semantic.txt"),
        }
    }

    /// SHA-256 of the shipped template bytes.
    pub fn checksum(self) -> &'static str {
        match self {
            TemplateId::Lamarckian => "a49ae275c80db28ec6c3489620cb9a3577cfa30016e0eecb2d31bacab44e90a5",
            TemplateId::FeedbackGeneration => "a6c0ae8156311e8f6c025f5b63c5035a5cbbc4efcdd1c28448c36c295a0aeb85",
            TemplateId::FeedbackApplication => "25aa9c86482d80d20d536ceccad21f7b32c74de879dcee6c1e0c8106f700932d",
            TemplateId::Eda => "1f7a0fa294cd907709562291fa28e9faf8f5bfbd5ad65aaad347a66b3c0ea34c",
            TemplateId::EdaIndex => "9b0d2e28e3e45b51b4b940899e183b36e0bfbfdb86f7a280d1d08920869e9a35",
            TemplateId::Crossover => "4fc358ed25ec8d553edc8670e14ce993ccf1afe8f5fd15067a6b4dcc1077e6f9",
            TemplateId::Semantic => "a3df5ce6e19446627c3dacf949871c1af08ade12bd4fe1c307877b09fa66f635",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Literal(String),
    Slot(String),
}

#[derive(Debug, Clone)]
pub struct Template {
    id: TemplateId,
    segments: Vec<Segment>,
}

fn is_slot_name(s: &str) -> bool {
    !s.is_empty()
        && s.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == ' ')
}

impl Template {
    /// Parses and checksum-verifies an embedded template.
    pub fn load(id: TemplateId) -> Result<Self> {
        Self::parse(id, id.source(), Some(id.checksum()))
    }

    fn parse(id: TemplateId, source: &str, checksum: Option<&str>) -> Result<Self> {
        if let Some(expected) = checksum {
            let actual = hex::encode(Sha256::digest(source.as_bytes()));
            if actual != expected {
                return Err(Error::Validation(format!(
                    "template {} checksum mismatch: expected {expected}, got {actual}",
                    id.file_name()
                )));
            }
        }
        let mut segments = Vec::new();
        let mut literal = String::new();
        let mut rest = source;
        while let Some(open) = rest.find('{') {
            let after = &rest[open + 1..];
            match after.find('}') {
                Some(close) if is_slot_name(&after[..close]) => {
                    literal.push_str(&rest[..open]);
                    if !literal.is_empty() {
                        segments.push(Segment::Literal(std::mem::take(&mut literal)));
                    }
                    segments.push(Segment::Slot(after[..close].to_string()));
                    rest = &after[close + 1..];
                }
                _ => {
                    literal.push_str(&rest[..=open]);
                    rest = after;
                }
            }
        }
        literal.push_str(rest);
        if !literal.is_empty() {
            segments.push(Segment::Literal(literal));
        }
        Ok(Template { id, segments })
    }

    pub fn id(&self) -> TemplateId {
        self.id
    }

    pub fn slots(&self) -> Vec<&str> {
        self.segments
            .iter()
            .filter_map(|s| match s {
                Segment::Slot(name) => Some(name.as_str()),
                Segment::Literal(_) => None,
            })
            .collect()
    }

    /// Single-pass substitution; substituted text is never re-scanned.
    pub fn render(&self, values: &[(&str, &str)]) -> Result<String> {
        let mut out = String::new();
        for seg in &self.segments {
            match seg {
                Segment::Literal(text) => out.push_str(text),
                Segment::Slot(name) => {
                    let value = values
                        .iter()
                        .find(|(k, _)| k == name)
                        .map(|(_, v)| *v)
                        .ok_or_else(|| {
                            Error::InvalidArgument(format!(
                                "template {} needs slot {{{name}}}",
                                self.id.file_name()
                            ))
                        })?;
                    out.push_str(value);
                }
            }
        }
        for (k, _) in values {
            if !self.slots().contains(k) {
                return Err(Error::InvalidArgument(format!(
                    "template {} has no slot {{{k}}}",
                    self.id.file_name()
                )));
            }
        }
        Ok(out)
    }

    /// Inverse of [`Template::render`]: recovers slot values from a rendered
    /// prompt, or `None` if the text was not produced by this template. Slot
    /// values are matched against the earliest occurrence of the following
    /// literal, except the last slot which extends to the trailing literal.
    pub fn extract(&self, rendered: &str) -> Option<Vec<(String, String)>> {
        let mut out = Vec::new();
        let mut rest = rendered;
        let mut pending: Option<&str> = None;
        let n = self.segments.len();
        for (i, seg) in self.segments.iter().enumerate() {
            match seg {
                Segment::Literal(lit) => match pending.take() {
                    None => rest = rest.strip_prefix(lit.as_str())?,
                    Some(slot) => {
                        let at = if i == n - 1 {
                            rest.strip_suffix(lit.as_str())?;
                            rest.len() - lit.len()
                        } else {
                            rest.find(lit.as_str())?
                        };
                        out.push((slot.to_string(), rest[..at].to_string()));
                        rest = &rest[at + lit.len()..];
                    }
                },
                Segment::Slot(name) => pending = Some(name),
            }
        }
        match pending {
            Some(slot) => {
                out.push((slot.to_string(), rest.to_string()));
                Some(out)
            }
            None if rest.is_empty() => Some(out),
            None => None,
        }
    }
}

static TEMPLATES: LazyLock<Vec<Template>> = LazyLock::new(|| {
    TemplateId::ALL
        .iter()
        .map(|&id| Template::load(id).unwrap_or_else(|e| panic!("{e}")))
        .collect()
});

/// Verifies every embedded template; call at startup to fail fast.
pub fn verify_templates() -> Result<()> {
    for id in TemplateId::ALL {
        Template::load(id)?;
    }
    Ok(())
}

pub fn template(id: TemplateId) -> &'static Template {
    let idx = TemplateId::ALL.iter().position(|&t| t == id).expect("known template");
    &TEMPLATES[idx]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedded_templates_verify() {
        verify_templates().unwrap();
    }

    #[test]
    fn tampered_template_fails_checksum() {
        let id = TemplateId::Semantic;
        let tampered = format!("{} ", id.source());
        assert!(Template::parse(id, &tampered, Some(id.checksum())).is_err());
    }

    #[test]
    fn slot_inventory() {
        assert_eq!(template(TemplateId::Lamarckian).slots(), vec!["input output pairs"]);
        assert_eq!(
            template(TemplateId::FeedbackGeneration).slots(),
            vec!["existing prompt", "wrong cases"]
        );
        assert_eq!(
            template(TemplateId::FeedbackApplication).slots(),
            vec!["existing prompt", "feedback"]
        );
        assert_eq!(template(TemplateId::Eda).slots(), vec!["existing prompt"]);
        assert_eq!(template(TemplateId::EdaIndex).slots(), vec!["existing prompt"]);
        assert_eq!(template(TemplateId::Crossover).slots(), vec!["prompt 1", "prompt 2"]);
        assert_eq!(template(TemplateId::Semantic).slots(), vec!["existing prompt"]);
    }

    #[test]
    fn render_with_own_slot_names_reproduces_source() {
        for id in TemplateId::ALL {
            let t = template(id);
            let names: Vec<String> = t.slots().iter().map(|s| format!("{{{s}}}")).collect();
            let values: Vec<(&str, &str)> =
                t.slots().into_iter().zip(names.iter().map(String::as_str)).collect();
            assert_eq!(t.render(&values).unwrap(), id.source(), "{id:?}");
        }
    }

    #[test]
    fn substituted_values_are_not_rescanned() {
        let t = template(TemplateId::Crossover);
        let out = t.render(&[("prompt 1", "{prompt 2}"), ("prompt 2", "B")]).unwrap();
        assert!(out.contains("Parent prompt 1: {prompt 2}\nParent prompt 2: B\n"));
    }

    #[test]
    fn render_rejects_missing_or_unknown_slots() {
        let t = template(TemplateId::Semantic);
        assert!(t.render(&[]).is_err());
        assert!(t.render(&[("existing prompt", "x"), ("bogus", "y")]).is_err());
    }

    #[test]
    fn extract_inverts_render() {
        let t = template(TemplateId::Crossover);
        let out = t.render(&[("prompt 1", "alpha beta"), ("prompt 2", "gamma\ndelta")]).unwrap();
        assert_eq!(
            t.extract(&out).unwrap(),
            vec![
                ("prompt 1".to_string(), "alpha beta".to_string()),
                ("prompt 2".to_string(), "gamma\ndelta".to_string())
            ]
        );
        assert!(template(TemplateId::Semantic).extract(&out).is_none());
    }
}
