use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{binarize, class_counts, traditional_score, Confusion};
use crate::checklist::N_ATTRIBUTES;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

/// Operating points in ascending threshold order, with the trapezoidal area
/// under `(1 - specificity, sensitivity)` anchored at `(0, 0)` and `(1, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

impl RocCurve {
    /// Sweep `thresholds` (ascending) with prediction `score >= threshold`.
    pub fn sweep(scores: &[f64], labels: &[u8], thresholds: &[f64]) -> Result<Self> {
        class_counts(scores, labels)?;
        let points: Vec<RocPoint> = thresholds
            .iter()
            .map(|&t| {
                let c = Confusion::count(scores, labels, t);
                RocPoint {
                    threshold: t,
                    sensitivity: c.sensitivity().expect("positives present"),
                    specificity: c.specificity().expect("negatives present"),
                }
            })
            .collect();
        let auc = trapezoid(&points);
        Ok(RocCurve { points, auc })
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["threshold", "sens", "spec"])?;
        for p in &self.points {
            w.write_record([p.threshold.to_string(), p.sensitivity.to_string(), p.specificity.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<roc csv>", e))?;
        Ok(())
    }
}

fn trapezoid(points: &[RocPoint]) -> f64 {
    // Rising thresholds walk the curve from (1, 1) down to (0, 0).
    let mut xy: Vec<(f64, f64)> = vec![(1.0, 1.0)];
    xy.extend(points.iter().map(|p| (1.0 - p.specificity, p.sensitivity)));
    xy.push((0.0, 0.0));
    xy.windows(2)
        .map(|w| (w[0].0 - w[1].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

/// ROC of a continuous score, one operating point per distinct value.
pub fn learned_roc(scores: &[f64], labels: &[u8]) -> Result<RocCurve> {
    let mut thresholds: Vec<f64> = scores.to_vec();
    if thresholds.iter().any(|s| s.is_nan()) {
        return Err(Error::UndefinedMetric("scores contain NaN".into()));
    }
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    RocCurve::sweep(scores, labels, &thresholds)
}

/// ROC of the traditional integer score computed from binarized attribute
/// predictions, swept over every attainable cut `0..=10`.
pub fn traditional_roc(y7hat: &[[f64; N_ATTRIBUTES]], mel_labels: &[u8], binarize_threshold: f64) -> Result<RocCurve> {
    let scores: Vec<f64> = y7hat
        .iter()
        .map(|p| f64::from(traditional_score(&binarize(p, binarize_threshold))))
        .collect();
    let thresholds: Vec<f64> = (0..=10).map(f64::from).collect();
    RocCurve::sweep(&scores, mel_labels, &thresholds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::auc;
    use proptest::prelude::*;

    #[test]
    fn oracle_attributes_give_perfect_traditional_roc() {
        let mut y7 = Vec::new();
        let mut mel = Vec::new();
        for bits in 0u32..128 {
            let a: [u8; 7] = std::array::from_fn(|j| ((bits >> j) & 1) as u8);
            y7.push(a.map(f64::from));
            mel.push(u8::from(traditional_score(&a) >= 3));
        }
        assert_eq!(traditional_roc(&y7, &mel, 0.5).unwrap().auc, 1.0);
    }

    #[test]
    fn constant_scorer_is_chance() {
        let y7 = vec![[0.0; 7]; 6];
        let roc = traditional_roc(&y7, &[0, 1, 1, 0, 0, 1], 0.5).unwrap();
        assert_eq!(roc.auc, 0.5);
        assert_eq!(roc.points.len(), 11);
        assert_eq!((roc.points[0].sensitivity, roc.points[0].specificity), (1.0, 0.0));
        assert!(roc.points[1..].iter().all(|p| p.sensitivity == 0.0 && p.specificity == 1.0));
    }

    #[test]
    fn csv_layout() {
        let roc = learned_roc(&[0.2, 0.8], &[0, 1]).unwrap();
        let mut buf = Vec::new();
        roc.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "threshold,sens,spec\n0.2,1,0\n0.8,1,1\n");
    }

    proptest! {
        #[test]
        fn learned_curve_area_is_auc(
            s in proptest::collection::vec(0u8..12, 4..80),
            l in proptest::collection::vec(0u8..2, 4..80),
        ) {
            let n = s.len().min(l.len());
            let (s, l): (Vec<f64>, Vec<u8>) = (s[..n].iter().map(|&v| f64::from(v)).collect(), l[..n].to_vec());
            prop_assume!(l.contains(&0) && l.contains(&1));
            let roc = learned_roc(&s, &l).unwrap();
            prop_assert!((roc.auc - auc(&s, &l).unwrap()).abs() < 1e-12);
            for w in roc.points.windows(2) {
                prop_assert!(w[1].sensitivity <= w[0].sensitivity);
                prop_assert!(w[1].specificity >= w[0].specificity);
            }
        }
    }
}
