//! Ranking metrics: Accuracy@k, mean reciprocal rank, UNK-subset reports,
//! and aggregation of repeated runs into mean ± standard deviation.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taxonomy::KnowledgeBase;
use crate::types::EntityId;

/// The k values reported by default, matching the standard results tables.
pub const DEFAULT_K_GRID: [usize; 5] = [1, 4, 8, 16, 32];

/// Metrics for one evaluation run. All values are percentages in [0, 100].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Which records were scored: "all" or "unk-only".
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub subset: Option<String>,
    /// Number of records scored.
    pub n: usize,
    /// Accuracy@k per k, empty when `n == 0`.
    #[serde(rename = "acc", skip_serializing_if = "BTreeMap::is_empty", default)]
    pub accuracy_at: BTreeMap<usize, f64>,
    /// Mean reciprocal rank, absent when `n == 0`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mrr: Option<f64>,
}

impl EvalReport {
    /// Score rankings against golds over a k grid.
    ///
    /// `predictions[i]` is the ranked candidate list for record `i` and must
    /// be at least `max(k_grid)` long; `gold[i]` is its reference entity.
    pub fn compute(
        predictions: &[Vec<EntityId>],
        gold: &[EntityId],
        k_grid: &[usize],
        subset: Option<&str>,
    ) -> Result<EvalReport> {
        let mut accuracy_at = BTreeMap::new();
        for &k in k_grid {
            accuracy_at.insert(k, accuracy_at_k(predictions, gold, k)?);
        }
        Ok(EvalReport {
            subset: subset.map(str::to_string),
            n: gold.len(),
            accuracy_at,
            mrr: Some(mrr(predictions, gold)),
        })
    }

    /// Report with no records and no metrics.
    fn empty(subset: Option<&str>) -> EvalReport {
        EvalReport {
            subset: subset.map(str::to_string),
            n: 0,
            accuracy_at: BTreeMap::new(),
            mrr: None,
        }
    }

    /// Aligned plain-text rendering, percentages with two decimals.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let subset = self.subset.as_deref().unwrap_or("all");
        let _ = writeln!(out, "subset: {subset}  (n = {})", self.n);
        if self.accuracy_at.is_empty() && self.mrr.is_none() {
            let _ = writeln!(out, "no records; metrics unavailable");
            return out;
        }
        let mut header = String::new();
        let mut row = String::new();
        for (k, value) in &self.accuracy_at {
            let _ = write!(header, "{:>8}", format!("Acc@{k}"));
            let _ = write!(row, "{value:>8.2}");
        }
        if let Some(m) = self.mrr {
            let _ = write!(header, "{:>8}", "MRR");
            let _ = write!(row, "{m:>8.2}");
        }
        let _ = writeln!(out, "{header}");
        let _ = writeln!(out, "{row}");
        out
    }
}

/// Percentage of records whose gold entity appears in the top `k` of its
/// ranking. Rankings shorter than `k` are rejected, naming the record.
pub fn accuracy_at_k(
    predictions: &[Vec<EntityId>],
    gold: &[EntityId],
    k: usize,
) -> Result<f64> {
    assert_eq!(
        predictions.len(),
        gold.len(),
        "predictions and gold must align record-by-record"
    );
    if gold.is_empty() {
        return Err(Error::invalid("cannot compute accuracy over zero records"));
    }
    let mut hits = 0usize;
    for (record, (ranking, g)) in predictions.iter().zip(gold).enumerate() {
        if ranking.len() < k {
            return Err(Error::RankingTooShort {
                record,
                len: ranking.len(),
                k,
            });
        }
        if ranking[..k].contains(g) {
            hits += 1;
        }
    }
    Ok(100.0 * hits as f64 / gold.len() as f64)
}

/// Mean reciprocal rank as a percentage, 1-indexed. A gold entity absent
/// from its ranking contributes 0. Empty input yields 0.
pub fn mrr(predictions: &[Vec<EntityId>], gold: &[EntityId]) -> f64 {
    assert_eq!(
        predictions.len(),
        gold.len(),
        "predictions and gold must align record-by-record"
    );
    if gold.is_empty() {
        return 0.0;
    }
    let total: f64 = predictions
        .iter()
        .zip(gold)
        .map(|(ranking, g)| match ranking.iter().position(|id| id == g) {
            Some(pos) => 1.0 / (pos + 1) as f64,
            None => 0.0,
        })
        .sum();
    100.0 * total / gold.len() as f64
}

/// Evaluate only the records whose gold is the `UNK` sentinel, over the
/// default k grid. An empty subset yields an `n = 0` report with no metrics.
pub fn unk_subset_eval(
    predictions: &[Vec<EntityId>],
    gold: &[EntityId],
    kb: &KnowledgeBase,
) -> Result<EvalReport> {
    assert_eq!(
        predictions.len(),
        gold.len(),
        "predictions and gold must align record-by-record"
    );
    let unk = kb.unk_id();
    let mut subset_predictions = Vec::new();
    let mut subset_gold = Vec::new();
    for (ranking, &g) in predictions.iter().zip(gold) {
        if g == unk {
            subset_predictions.push(ranking.clone());
            subset_gold.push(g);
        }
    }
    if subset_gold.is_empty() {
        return Ok(EvalReport::empty(Some("unk-only")));
    }
    EvalReport::compute(
        &subset_predictions,
        &subset_gold,
        &DEFAULT_K_GRID,
        Some("unk-only"),
    )
}

/// Mean and population standard deviation per metric across repeated runs
/// (e.g. five seeds). Metric keys are `acc@k` and `mrr`. All reports must
/// share the same k grid, subset label, and metric availability.
pub fn aggregate_runs(reports: &[EvalReport]) -> Result<BTreeMap<String, (f64, f64)>> {
    let first = reports
        .first()
        .ok_or_else(|| Error::invalid("cannot aggregate zero reports"))?;
    let grid: Vec<usize> = first.accuracy_at.keys().copied().collect();
    for (i, report) in reports.iter().enumerate() {
        let this_grid: Vec<usize> = report.accuracy_at.keys().copied().collect();
        if this_grid != grid || report.mrr.is_some() != first.mrr.is_some() {
            return Err(Error::invalid(format!(
                "report {i} does not share the metric grid of report 0"
            )));
        }
        if report.subset != first.subset {
            return Err(Error::invalid(format!(
                "report {i} does not share the subset label of report 0"
            )));
        }
    }
    let mut out = BTreeMap::new();
    for &k in &grid {
        let values: Vec<f64> = reports.iter().map(|r| r.accuracy_at[&k]).collect();
        out.insert(format!("acc@{k}"), mean_and_std(&values));
    }
    if first.mrr.is_some() {
        let values: Vec<f64> = reports
            .iter()
            .map(|r| r.mrr.expect("checked above"))
            .collect();
        out.insert("mrr".to_string(), mean_and_std(&values));
    }
    Ok(out)
}

/// Mean and population standard deviation (divide by n, not n − 1).
pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    assert!(!values.is_empty(), "mean of zero values is undefined");
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, variance.sqrt())
}
