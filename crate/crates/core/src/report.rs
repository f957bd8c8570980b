//! CSV traces and a plain-text summary of a run.

use std::fmt::Write as _;
use std::path::Path;

use crate::checkpoint::write_atomic;
use crate::domain::PromptCandidate;
use crate::engine::RunRecord;
use crate::error::{Error, Result};
use crate::gateway::CostLedger;

fn csv_bytes(header: &[&str], rows: Vec<Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| Error::InvalidState(e.to_string()))
}

pub fn scores_csv(record: &RunRecord) -> Result<Vec<u8>> {
    let rows = record
        .snapshots
        .iter()
        .map(|s| {
            vec![
                s.index.to_string(),
                s.phase.name().to_string(),
                s.best.to_string(),
                s.avg.to_string(),
                s.worst.to_string(),
            ]
        })
        .collect();
    csv_bytes(&["iteration", "phase", "best", "avg", "worst"], rows)
}

pub fn tokens_csv(record: &RunRecord) -> Result<Vec<u8>> {
    let rows = record
        .snapshots
        .iter()
        .map(|s| vec![s.index.to_string(), s.mean_tokens.to_string()])
        .collect();
    csv_bytes(&["iteration", "mean_token_estimate"], rows)
}

pub fn cost_csv(ledger: &CostLedger) -> Result<Vec<u8>> {
    let rows = ledger
        .entries()
        .iter()
        .map(|e| {
            vec![
                e.phase.name().to_string(),
                e.purpose.name().to_string(),
                e.usage.calls.to_string(),
                e.usage.tokens().to_string(),
            ]
        })
        .collect();
    csv_bytes(&["phase", "purpose_tag", "calls", "tokens"], rows)
}

pub fn summary_text(record: &RunRecord, best: Option<&PromptCandidate>, ledger: &CostLedger) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "iterations: {}", record.total_iterations.max(record.snapshots.len().saturating_sub(1)));
    if let (Some(a), Some(b)) = (record.initial_best(), record.final_best()) {
        let _ = writeln!(s, "best dev score: {a} -> {b}");
    }
    let _ = writeln!(s, "mutation applications: {}", record.mutation_applications());
    let totals = ledger.totals();
    let _ = writeln!(
        s,
        "gateway calls: {} ({} mutation), tokens: {}, cache hits: {}",
        totals.calls,
        ledger.mutation_calls(),
        totals.tokens(),
        ledger.cache_hits()
    );
    let _ = writeln!(s, "phases:");
    for p in &record.phases {
        let _ = writeln!(s, "  {}: {} iterations", p.phase, p.iterations);
        for n in &p.notes {
            let _ = writeln!(s, "    - {n}");
        }
    }
    if let Some(b) = best {
        let _ = writeln!(
            s,
            "best candidate: {} via {} (score {}, ~{} tokens)",
            b.id,
            b.lineage.operator.name(),
            b.dev_score.unwrap_or(0.0),
            b.token_estimate
        );
    }
    s
}

/// Writes scores.csv, tokens.csv, cost.csv, best_prompt.txt and summary.txt.
pub fn emit_report(record: &RunRecord, best: Option<&PromptCandidate>, ledger: &CostLedger, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_atomic(&out_dir.join("scores.csv"), &scores_csv(record)?)?;
    write_atomic(&out_dir.join("tokens.csv"), &tokens_csv(record)?)?;
    write_atomic(&out_dir.join("cost.csv"), &cost_csv(ledger)?)?;
    if let Some(b) = best {
        write_atomic(&out_dir.join("best_prompt.txt"), format!("{}\n", b.text).as_bytes())?;
    }
    write_atomic(&out_dir.join("summary.txt"), summary_text(record, best, ledger).as_bytes())
}
