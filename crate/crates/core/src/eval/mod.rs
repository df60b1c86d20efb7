//! Ranking and threshold metrics, the traditional integer score, and the
//! report artifacts written by `dermgraph eval`.

mod report;
mod roc;

use serde::{Deserialize, Serialize};

use crate::checklist::{N_ATTRIBUTES, N_NODES, TRADITIONAL_WEIGHTS};
use crate::dataset::Case;
use crate::model::Prediction;
use crate::{Error, Result};

pub use report::{
    build_report, EvalReport, LabelMetrics, MetricAverages, MetricsReport, ReportThresholds, TraditionalSummary,
    WeightsComparison, REFERENCE_MEAN_AUC, REFERENCE_WEIGHTS,
};
pub use roc::{learned_roc, traditional_roc, RocCurve, RocPoint};

/// Melanoma probability at which the learned head, with traditional weights
/// and binary inputs, refers exactly the cases scoring 3 or more.
pub const TRADITIONAL_EQUIVALENT_THRESHOLD: f64 = 0.574_442_516_811_659;

/// Default cut for turning attribute probabilities into 0/1 findings.
pub const DEFAULT_BINARIZE_THRESHOLD: f64 = 0.5;

fn class_counts(scores: &[f64], labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "need both classes, got {pos} positive and {neg} negative"
        )));
    }
    Ok((pos, neg))
}

/// Area under the ROC curve as the Mann-Whitney statistic, with ties
/// counted as one half.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (pos, neg) = class_counts(scores, labels)?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::UndefinedMetric("scores contain NaN".into()));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Sum of midranks (1-based) over the positives.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        let tied_pos = idx[i..=j].iter().filter(|&&k| labels[k] == 1).count();
        rank_sum += midrank * tied_pos as f64;
        i = j + 1;
    }
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

/// Counts of a thresholded classifier, with prediction `score >= threshold`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn count(scores: &[f64], labels: &[u8], threshold: f64) -> Self {
        let mut c = Confusion::default();
        for (&s, &l) in scores.iter().zip(labels) {
            match (s >= threshold, l == 1) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    fn ratio(num: usize, den: usize) -> Option<f64> {
        (den > 0).then(|| num as f64 / den as f64)
    }

    /// `None` when nothing is predicted positive.
    pub fn precision(&self) -> Option<f64> {
        Self::ratio(self.tp, self.tp + self.fp)
    }

    pub fn sensitivity(&self) -> Option<f64> {
        Self::ratio(self.tp, self.tp + self.fn_)
    }

    pub fn specificity(&self) -> Option<f64> {
        Self::ratio(self.tn, self.tn + self.fp)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMetrics {
    pub precision: Option<f64>,
    pub sensitivity: f64,
    pub specificity: f64,
}

pub fn confusion_metrics(scores: &[f64], labels: &[u8], threshold: f64) -> Result<ConfusionMetrics> {
    class_counts(scores, labels)?;
    let c = Confusion::count(scores, labels, threshold);
    Ok(ConfusionMetrics {
        precision: c.precision(),
        sensitivity: c.sensitivity().expect("positives present"),
        specificity: c.specificity().expect("negatives present"),
    })
}

/// Two points per major finding, one per minor finding.
pub fn traditional_score(attrs: &[u8; N_ATTRIBUTES]) -> u32 {
    attrs
        .iter()
        .zip(TRADITIONAL_WEIGHTS)
        .map(|(&a, w)| u32::from(a) * w as u32)
        .sum()
}

pub fn binarize(probs: &[f64; N_ATTRIBUTES], threshold: f64) -> [u8; N_ATTRIBUTES] {
    probs.map(|p| u8::from(p >= threshold))
}

/// Youden-optimal cut: the observed score maximizing
/// `sensitivity + specificity - 1`, smallest on ties. `None` without both
/// classes.
pub fn youden_threshold(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let (pos, neg) = class_counts(scores, labels).ok()?;
    let mut idx: Vec<usize> = (0..scores.len()).filter(|&i| scores[i].is_finite()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Sweeping upward, every case below the cut is predicted negative.
    let (mut fn_, mut tn) = (0usize, 0usize);
    let mut best: Option<(f64, f64)> = None;
    let mut i = 0;
    while i < idx.len() {
        let t = scores[idx[i]];
        let j_stat = (pos - fn_) as f64 / pos as f64 + tn as f64 / neg as f64 - 1.0;
        if best.is_none_or(|(_, b)| j_stat > b) {
            best = Some((t, j_stat));
        }
        while i < idx.len() && scores[idx[i]] == t {
            if labels[idx[i]] == 1 {
                fn_ += 1;
            } else {
                tn += 1;
            }
            i += 1;
        }
    }
    best.map(|(t, _)| t)
}

/// Per-label AUCs over the eight outputs in node order (seven attributes,
/// then melanoma).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AucSummary {
    pub per_label: [Option<f64>; N_NODES],
    pub melanoma: Option<f64>,
    /// Mean over the labels where the AUC is defined; NaN if none is.
    pub mean: f64,
}

pub fn label_scores(preds: &[Prediction], cases: &[Case], label: usize) -> (Vec<f64>, Vec<u8>) {
    if label < N_ATTRIBUTES {
        (
            preds.iter().map(|p| p.attributes[label]).collect(),
            cases.iter().map(|c| c.attr_labels[label]).collect(),
        )
    } else {
        (
            preds.iter().map(|p| p.melanoma).collect(),
            cases.iter().map(|c| c.mel_label).collect(),
        )
    }
}

pub fn auc_summary(preds: &[Prediction], cases: &[Case]) -> AucSummary {
    let per_label: [Option<f64>; N_NODES] = std::array::from_fn(|k| {
        let (s, l) = label_scores(preds, cases, k);
        auc(&s, &l).ok()
    });
    let defined: Vec<f64> = per_label.iter().flatten().copied().collect();
    let mean = if defined.is_empty() {
        f64::NAN
    } else {
        defined.iter().sum::<f64>() / defined.len() as f64
    };
    AucSummary {
        per_label,
        melanoma: per_label[N_NODES - 1],
        mean,
    }
}
