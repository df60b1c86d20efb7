use serde::{Deserialize, Serialize};

use super::roc::{learned_roc, traditional_roc, RocCurve};
use super::{auc, binarize, label_scores, traditional_score, Confusion};
use crate::checklist::{NODE_NAMES, N_ATTRIBUTES, N_NODES, REFERRAL_SCORE, TRADITIONAL_WEIGHTS};
use crate::dataset::Case;
use crate::model::Prediction;
use crate::{Error, Result};

/// Published learned weights on the EDRA data, kept for side-by-side display.
/// Not reproduced by this crate.
pub const REFERENCE_WEIGHTS: [f64; N_ATTRIBUTES] = [1.47, 0.95, 0.93, 0.92, 0.97, 1.42, 1.35];
/// Published mean AUC on the EDRA data with an image backbone; context only.
pub const REFERENCE_MEAN_AUC: f64 = 0.850;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelMetrics {
    pub label: String,
    pub positives: usize,
    pub threshold: f64,
    pub auc: Option<f64>,
    pub precision: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

/// Means over the labels where each metric is defined.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricAverages {
    pub auc: Option<f64>,
    pub precision: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportThresholds {
    pub attribute: f64,
    pub melanoma: f64,
    pub traditional_binarize: f64,
    pub traditional_referral_score: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraditionalSummary {
    pub auc: f64,
    pub precision: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_cases: usize,
    pub thresholds: ReportThresholds,
    /// Seven attributes in canonical order, then melanoma.
    pub labels: Vec<LabelMetrics>,
    pub averages: MetricAverages,
    pub learned_melanoma_auc: f64,
    pub traditional: TraditionalSummary,
    pub reference_mean_auc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightsComparison {
    pub attributes: Vec<String>,
    pub traditional: [u32; N_ATTRIBUTES],
    /// Learned weights rescaled to the traditional total of 10.
    pub learned: [f64; N_ATTRIBUTES],
    pub learned_raw: [f64; N_ATTRIBUTES],
    pub reference: [f64; N_ATTRIBUTES],
}

impl WeightsComparison {
    pub fn new(learned_raw: [f64; N_ATTRIBUTES]) -> Self {
        let total_traditional: f64 = TRADITIONAL_WEIGHTS.iter().sum();
        let total: f64 = learned_raw.iter().sum();
        WeightsComparison {
            attributes: NODE_NAMES[..N_ATTRIBUTES].iter().map(|s| s.to_string()).collect(),
            traditional: TRADITIONAL_WEIGHTS.map(|w| w as u32),
            learned: learned_raw.map(|w| w * total_traditional / total),
            learned_raw,
            reference: REFERENCE_WEIGHTS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metrics: MetricsReport,
    pub weights: WeightsComparison,
    pub roc_learned: RocCurve,
    pub roc_traditional: RocCurve,
}

fn mean_defined(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.into_iter().flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Assemble every evaluation artifact for `preds` on `cases`. The learned and
/// traditional curves are computed from the same attribute predictions.
pub fn build_report(
    preds: &[Prediction],
    cases: &[Case],
    melanoma_threshold: f64,
    learned_weights: [f64; N_ATTRIBUTES],
    binarize_threshold: f64,
) -> Result<EvalReport> {
    if preds.len() != cases.len() || cases.is_empty() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} cases",
            preds.len(),
            cases.len()
        )));
    }
    let labels: Vec<LabelMetrics> = (0..N_NODES)
        .map(|k| {
            let (s, l) = label_scores(preds, cases, k);
            let threshold = if k < N_ATTRIBUTES { binarize_threshold } else { melanoma_threshold };
            let c = Confusion::count(&s, &l, threshold);
            LabelMetrics {
                label: NODE_NAMES[k].to_string(),
                positives: l.iter().filter(|&&v| v == 1).count(),
                threshold,
                auc: auc(&s, &l).ok(),
                precision: c.precision(),
                sensitivity: c.sensitivity(),
                specificity: c.specificity(),
            }
        })
        .collect();
    let averages = MetricAverages {
        auc: mean_defined(labels.iter().map(|m| m.auc)),
        precision: mean_defined(labels.iter().map(|m| m.precision)),
        sensitivity: mean_defined(labels.iter().map(|m| m.sensitivity)),
        specificity: mean_defined(labels.iter().map(|m| m.specificity)),
    };

    let mel_scores: Vec<f64> = preds.iter().map(|p| p.melanoma).collect();
    let mel_labels: Vec<u8> = cases.iter().map(|c| c.mel_label).collect();
    let y7: Vec<[f64; N_ATTRIBUTES]> = preds.iter().map(|p| p.attributes).collect();
    let roc_learned = learned_roc(&mel_scores, &mel_labels)?;
    let roc_traditional = traditional_roc(&y7, &mel_labels, binarize_threshold)?;

    let trad_scores: Vec<f64> = y7
        .iter()
        .map(|p| f64::from(traditional_score(&binarize(p, binarize_threshold))))
        .collect();
    let tc = Confusion::count(&trad_scores, &mel_labels, f64::from(REFERRAL_SCORE));

    let metrics = MetricsReport {
        n_cases: cases.len(),
        thresholds: ReportThresholds {
            attribute: binarize_threshold,
            melanoma: melanoma_threshold,
            traditional_binarize: binarize_threshold,
            traditional_referral_score: REFERRAL_SCORE,
        },
        labels,
        averages,
        learned_melanoma_auc: roc_learned.auc,
        traditional: TraditionalSummary {
            auc: roc_traditional.auc,
            precision: tc.precision(),
            sensitivity: tc.sensitivity(),
            specificity: tc.specificity(),
        },
        reference_mean_auc: REFERENCE_MEAN_AUC,
    };
    Ok(EvalReport {
        metrics,
        weights: WeightsComparison::new(learned_weights),
        roc_learned,
        roc_traditional,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cases(n: usize) -> Vec<Case> {
        (0..n)
            .map(|i| {
                let l: [u8; 7] = std::array::from_fn(|j| ((i >> j) & 1) as u8);
                Case::new(format!("c{i}"), l, (i % 3 == 0) as u8)
            })
            .collect()
    }

    #[test]
    fn trivial_model_is_chance_everywhere() {
        let cs = cases(128);
        let preds = vec![
            Prediction {
                attributes: [0.5; 7],
                melanoma: 0.5
            };
            128
        ];
        let r = build_report(&preds, &cs, 0.5, TRADITIONAL_WEIGHTS, 0.5).unwrap();
        assert!(r.metrics.labels.iter().all(|m| m.auc == Some(0.5)));
        assert_eq!(r.metrics.averages.auc, Some(0.5));
        assert_eq!(r.metrics.learned_melanoma_auc, 0.5);
        assert_eq!(r.metrics.traditional.auc, 0.5);
    }

    #[test]
    fn undefined_precision_is_null() {
        let cs = cases(16);
        let preds = vec![
            Prediction {
                attributes: [0.1; 7],
                melanoma: 0.2
            };
            16
        ];
        let r = build_report(&preds, &cs, 0.9, TRADITIONAL_WEIGHTS, 0.5).unwrap();
        let mel = r.metrics.labels.last().unwrap();
        assert_eq!(mel.precision, None);
        assert_eq!(mel.sensitivity, Some(0.0));
        let json = serde_json::to_value(&r.metrics).unwrap();
        assert!(json["labels"][7]["precision"].is_null());
        assert_eq!(r.metrics.averages.precision, None);
    }

    #[test]
    fn weights_rescaled_to_traditional_total() {
        let w = WeightsComparison::new([4.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        assert!((w.learned.iter().sum::<f64>() - 10.0).abs() < 1e-12);
        assert!((w.learned[0] / w.learned[1] - 4.0).abs() < 1e-12);
        assert_eq!(w.traditional, [2, 1, 1, 1, 1, 2, 2]);
        assert_eq!(w.attributes[0], "APN");
    }
}
