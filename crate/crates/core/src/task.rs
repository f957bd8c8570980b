//! JSONL task files.
//!
//! The first line is a header `{"name":…, "match_mode":…, "seed_prompts":[…]}`;
//! every following line is one example
//! `{"input":"92 24","output":["68"],"split":"train"}`.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::evaluation::{MatchMode, Split, TaskExample};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    name: String,
    match_mode: MatchMode,
    #[serde(default)]
    seed_prompts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskFile {
    pub name: String,
    pub match_mode: MatchMode,
    pub examples: Vec<TaskExample>,
    pub seed_prompts: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
}

impl SplitCounts {
    pub fn new(train: usize, dev: usize, test: usize) -> Self {
        SplitCounts { train, dev, test }
    }

    pub fn total(&self) -> usize {
        self.train + self.dev + self.test
    }
}

impl TaskFile {
    /// Examples of one split, in stored order.
    pub fn split(&self, split: Split) -> Vec<TaskExample> {
        self.examples.iter().filter(|e| e.split == split).cloned().collect()
    }

    pub fn counts(&self) -> SplitCounts {
        let n = |s| self.examples.iter().filter(|e| e.split == s).count();
        SplitCounts::new(n(Split::Train), n(Split::Dev), n(Split::Test))
    }

    pub fn validate(&self) -> Result<()> {
        for e in &self.examples {
            e.validate()?;
        }
        if self.counts().dev == 0 {
            return Err(Error::Validation(format!("task {:?} has no dev examples", self.name)));
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let header = Header {
            name: self.name.clone(),
            match_mode: self.match_mode,
            seed_prompts: self.seed_prompts.clone(),
        };
        let mut out = serde_json::to_string(&header)?;
        out.push('\n');
        for e in &self.examples {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn parse_jsonl(text: &str, origin: &str) -> Result<Self> {
        let mut header: Option<Header> = None;
        let mut examples = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let loc = || format!("{origin}:{}", i + 1);
            if line.trim().is_empty() {
                continue;
            }
            let value: Value = serde_json::from_str(line).map_err(|e| Error::parse(loc(), e.to_string()))?;
            let is_header = value.get("name").is_some();
            if is_header {
                if header.is_some() || !examples.is_empty() {
                    return Err(Error::parse(loc(), "header must be the first line"));
                }
                header = Some(serde_json::from_value(value).map_err(|e| Error::parse(loc(), e.to_string()))?);
                continue;
            }
            let ex: TaskExample = serde_json::from_value(value).map_err(|e| Error::parse(loc(), e.to_string()))?;
            ex.validate().map_err(|e| Error::parse(loc(), e.to_string()))?;
            examples.push(ex);
        }
        let header = header.ok_or_else(|| Error::parse(format!("{origin}:1"), "missing task header line"))?;
        let task = TaskFile {
            name: header.name,
            match_mode: header.match_mode,
            examples,
            seed_prompts: header.seed_prompts,
        };
        task.validate()?;
        Ok(task)
    }
}

pub fn load_task(path: impl AsRef<Path>) -> Result<TaskFile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    TaskFile::parse_jsonl(&text, &path.display().to_string())
}

pub fn save_task(path: impl AsRef<Path>, task: &TaskFile) -> Result<()> {
    crate::checkpoint::write_atomic(path.as_ref(), task.to_jsonl()?.as_bytes())
}

/// Seeded shuffle, then the first `train`, next `dev`, next `test`
/// examples become those splits. Leftovers are dropped.
pub fn split_dataset(examples: &[TaskExample], seed: u64, counts: SplitCounts) -> Result<Vec<TaskExample>> {
    if counts.total() > examples.len() {
        return Err(Error::Validation(format!(
            "requested {} examples but only {} available",
            counts.total(),
            examples.len()
        )));
    }
    let mut shuffled = examples.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let plan = std::iter::repeat_n(Split::Train, counts.train)
        .chain(std::iter::repeat_n(Split::Dev, counts.dev))
        .chain(std::iter::repeat_n(Split::Test, counts.test));
    Ok(shuffled
        .into_iter()
        .zip(plan)
        .map(|(mut e, split)| {
            e.split = split;
            e
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const HEADER: &str = r#"{"name":"subtract","match_mode":"exact_any"}"#;

    fn lines(train: usize, dev: usize, test: usize) -> String {
        let mut s = format!("{HEADER}\n");
        for (split, n) in [("train", train), ("dev", dev), ("test", test)] {
            for i in 0..n {
                s.push_str(&format!("{{\"input\":\"{split} {i}\",\"output\":[\"{i}\"],\"split\":\"{split}\"}}\n"));
            }
        }
        s
    }

    #[test]
    fn parses_a_train_line() {
        let text = format!(
            "{HEADER}\n{}\n{}\n",
            r#"{"input":"92 24","output":["68"],"split":"train"}"#,
            r#"{"input":"1 1","output":["0"],"split":"dev"}"#
        );
        let t = TaskFile::parse_jsonl(&text, "t").unwrap();
        assert_eq!(t.examples[0], TaskExample::new("92 24", vec!["68".into()], Split::Train).unwrap());
        assert_eq!(t.match_mode, MatchMode::ExactAny);
    }

    #[test]
    fn counts_match_file() {
        let t = TaskFile::parse_jsonl(&lines(50, 50, 125), "t").unwrap();
        assert_eq!(t.counts(), SplitCounts::new(50, 50, 125));
    }

    #[test]
    fn missing_output_is_a_parse_error_with_line() {
        let text = format!("{HEADER}\n{}\n", r#"{"input":"92 24","split":"train"}"#);
        match TaskFile::parse_jsonl(&text, "t") {
            Err(Error::Parse { location, .. }) => assert_eq!(location, "t:2"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_dev_is_a_validation_error() {
        assert!(matches!(
            TaskFile::parse_jsonl(&lines(3, 0, 1), "t"),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn empty_output_list_rejected() {
        let text = format!("{HEADER}\n{}\n", r#"{"input":"x","output":[],"split":"dev"}"#);
        assert!(TaskFile::parse_jsonl(&text, "t").is_err());
    }

    #[test]
    fn header_is_required_and_first() {
        assert!(TaskFile::parse_jsonl(r#"{"input":"x","output":["y"],"split":"dev"}"#, "t").is_err());
        let text = format!("{}\n{HEADER}\n", r#"{"input":"x","output":["y"],"split":"dev"}"#);
        assert!(TaskFile::parse_jsonl(&text, "t").is_err());
    }

    #[test]
    fn split_partition_is_exact_and_disjoint() {
        let pool: Vec<TaskExample> = (0..250)
            .map(|i| TaskExample::new(format!("x{i}"), vec!["y".into()], Split::Train).unwrap())
            .collect();
        let out = split_dataset(&pool, 3, SplitCounts::new(50, 50, 150)).unwrap();
        let task = TaskFile {
            name: "t".into(),
            match_mode: MatchMode::ExactAny,
            examples: out.clone(),
            seed_prompts: vec![],
        };
        assert_eq!(task.counts(), SplitCounts::new(50, 50, 150));
        let mut inputs: Vec<&str> = out.iter().map(|e| e.input.as_str()).collect();
        inputs.sort();
        inputs.dedup();
        assert_eq!(inputs.len(), 250);
        assert_eq!(split_dataset(&pool, 3, SplitCounts::new(50, 50, 150)).unwrap(), out);
        assert_ne!(split_dataset(&pool, 4, SplitCounts::new(50, 50, 150)).unwrap(), out);
        assert!(matches!(
            split_dataset(&pool, 3, SplitCounts::new(100, 100, 51)),
            Err(Error::Validation(_))
        ));
    }

    proptest! {
        #[test]
        fn jsonl_round_trip(
            inputs in proptest::collection::vec("[a-z \"\\\\]{1,12}", 1..8),
            seeds in proptest::collection::vec("[a-z ]{1,10}", 0..3),
        ) {
            let examples = inputs.iter().enumerate().map(|(i, s)| {
                let split = if i == 0 { Split::Dev } else if i % 2 == 0 { Split::Train } else { Split::Test };
                TaskExample::new(s.clone(), vec![format!("o{i}"), "alt".into()], split).unwrap()
            }).collect();
            let task = TaskFile { name: "rt".into(), match_mode: MatchMode::ContainsAny, examples, seed_prompts: seeds };
            let back = TaskFile::parse_jsonl(&task.to_jsonl().unwrap(), "rt").unwrap();
            prop_assert_eq!(back, task);
        }
    }
}
