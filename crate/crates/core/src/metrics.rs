//! Detection metrics: accuracy, precision, recall, F1 and ROC AUC.

use serde::{Deserialize, Serialize};

use crate::cube_io::LabelMask;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Tallies one `(prediction, truth)` pair; pairs involving the ignore
    /// code are skipped.
    #[inline]
    pub fn record(&mut self, pred: u8, truth: u8) {
        match (pred, truth) {
            (1, 1) => self.tp += 1,
            (1, 0) => self.fp += 1,
            (0, 0) => self.tn += 1,
            (0, 1) => self.fn_ += 1,
            _ => {}
        }
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = ConfusionCounts;
    fn add(self, o: Self) -> Self {
        ConfusionCounts {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            tn: self.tn + o.tn,
            fn_: self.fn_ + o.fn_,
        }
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(ConfusionCounts::default(), |a, b| a + b)
    }
}

/// Confusion counts over pixels where neither mask carries the ignore code.
pub fn confusion(pred: &LabelMask, truth: &LabelMask) -> Result<ConfusionCounts> {
    if pred.height() != truth.height() || pred.width() != truth.width() {
        return Err(Error::Dimension(format!(
            "prediction {}x{} vs truth {}x{}",
            pred.height(),
            pred.width(),
            truth.height(),
            truth.width()
        )));
    }
    Ok(confusion_from_labels(pred.labels(), truth.labels()))
}

pub fn confusion_from_labels(pred: &[u8], truth: &[u8]) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for (&p, &t) in pred.iter().zip(truth) {
        c.record(p, t);
    }
    c
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Statistics of the plastic class alone.
    Binary,
    /// Per-class statistics averaged with true-class support as weights.
    #[default]
    Weighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
    pub counts: ConfusionCounts,
    pub averaging: Averaging,
    /// Names of metrics whose value is reported as 0 because it is undefined.
    pub undefined: Vec<String>,
}

impl MetricsReport {
    /// Attaches an AUC value, or flags it undefined.
    pub fn with_auc(mut self, auc: Option<f64>) -> Self {
        self.undefined.retain(|m| m != "auc");
        match auc {
            Some(a) => self.auc = a,
            None => {
                self.auc = 0.0;
                self.undefined.push("auc".into());
            }
        }
        self
    }

    pub fn is_defined(&self, metric: &str) -> bool {
        !self.undefined.iter().any(|m| m == metric)
    }
}

struct ClassStats {
    precision: Option<f64>,
    recall: Option<f64>,
    f1: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn class_stats(tp: u64, fp: u64, fn_: u64) -> ClassStats {
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    ClassStats {
        precision,
        recall,
        f1,
    }
}

/// Accuracy, precision, recall and F1 from confusion counts. The returned
/// report has `auc` flagged undefined until [`MetricsReport::with_auc`].
pub fn classification_metrics(
    counts: ConfusionCounts,
    averaging: Averaging,
) -> Result<MetricsReport> {
    let total = counts.total();
    if total == 0 {
        return Err(Error::InvalidInput("no evaluated pixels".into()));
    }
    let accuracy = (counts.tp + counts.tn) as f64 / total as f64;
    let mut undefined = Vec::new();
    let ConfusionCounts { tp, fp, tn, fn_ } = counts;

    let (precision, recall, f1) = match averaging {
        Averaging::Binary => {
            let s = class_stats(tp, fp, fn_);
            let mut take = |v: Option<f64>, name: &str| {
                v.unwrap_or_else(|| {
                    undefined.push(name.to_string());
                    0.0
                })
            };
            (
                take(s.precision, "precision"),
                take(s.recall, "recall"),
                take(s.f1, "f1"),
            )
        }
        Averaging::Weighted => {
            let classes = [
                (class_stats(tp, fp, fn_), tp + fn_),
                (class_stats(tn, fn_, fp), tn + fp),
            ];
            let mut sums = [0.0f64; 3];
            let mut flags = [false; 3];
            for (stats, support) in &classes {
                if *support == 0 {
                    continue;
                }
                let w = *support as f64 / total as f64;
                for (k, v) in [stats.precision, stats.recall, stats.f1]
                    .into_iter()
                    .enumerate()
                {
                    match v {
                        Some(v) => sums[k] += w * v,
                        None => flags[k] = true,
                    }
                }
            }
            for (flag, name) in flags.iter().zip(["precision", "recall", "f1"]) {
                if *flag {
                    undefined.push(name.to_string());
                }
            }
            (sums[0], sums[1], sums[2])
        }
    };
    undefined.push("auc".into());

    Ok(MetricsReport {
        accuracy,
        precision,
        recall,
        f1,
        auc: 0.0,
        counts,
        averaging,
        undefined,
    })
}

fn check_auc_inputs(scores: &[f64], labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("NaN score".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::InvalidInput(format!("label {bad} is not 0 or 1")));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    Ok((pos, neg))
}

/// Area under the ROC curve via the Mann–Whitney rank-sum statistic, ties
/// credited one half. `O(N log N)`.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (pos, neg) = check_auc_inputs(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Ranks are 1-based; a tie group spanning ranks i+1..=j gets the midrank.
    let mut positive_rank_sum = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + 1 + j) as f64 / 2.0;
        let group_pos = order[i..j].iter().filter(|&&k| labels[k] == 1).count();
        positive_rank_sum += midrank * group_pos as f64;
        i = j;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((positive_rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Reference AUC by explicit pairwise comparison. `O(N²)`; intended for
/// cross-checking [`roc_auc`].
pub fn roc_auc_pairwise(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (pos, neg) = check_auc_inputs(scores, labels)?;
    let mut credit = 0.0f64;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            if si > sj {
                credit += 1.0;
            } else if si == sj {
                credit += 0.5;
            }
        }
    }
    Ok(credit / (pos as f64 * neg as f64))
}

/// A metrics report tagged with what produced it, as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub model: String,
    pub modality: String,
    pub split: String,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
    pub counts: ConfusionCounts,
    pub averaging: Averaging,
    pub undefined: Vec<String>,
}

impl ReportDocument {
    pub fn new(model: &str, modality: &str, split: &str, r: &MetricsReport) -> Self {
        Self {
            model: model.into(),
            modality: modality.into(),
            split: split.into(),
            accuracy: r.accuracy,
            precision: r.precision,
            recall: r.recall,
            f1: r.f1,
            auc: r.auc,
            counts: r.counts,
            averaging: r.averaging,
            undefined: r.undefined.clone(),
        }
    }
}
