//! Graph-fused multimodal classifier with an attributes-first melanoma head.
//!
//! Per case, the dermoscopic and clinical feature vectors are blended into a
//! third channel, each channel is gated element-wise by a pooled graph
//! feature, and the weighted sum feeds seven sigmoid attribute heads. The
//! melanoma probability is the sigmoid of the attribute predictions averaged
//! with learned positive weights.

mod forward;
mod grad;
mod loss;
mod params;
mod train;

use serde::{Deserialize, Serialize};

use crate::checklist::N_ATTRIBUTES;
use crate::dataset::CaseSet;
use crate::{Error, Result};

pub use forward::{
    attribute_heads, digraph_conv, forward_case, fuse_graph_image, fuse_modalities, melanoma_from_weights,
    melanoma_head, ForwardTrace, GraphContext, GraphFeature,
};
pub use grad::{batch_loss, gradients, BatchGradient};
pub use loss::{focal_loss, focal_loss_grad, total_loss, LossBreakdown, PROB_CLAMP};
pub use params::{ModelParameters, ParametersDoc};
pub use train::{predict, train, Adam, EpochRecord, Prediction, TrainedModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparameters {
    /// Weight of the clinical channel in the blended channel.
    pub delta: f64,
    /// Weights of the dermoscopic, clinical, and blended channels.
    pub gamma: [f64; 3],
    /// Highest proximity order `K`.
    pub order: usize,
    /// Per-attribute focal balance; `None` derives it from the training split.
    pub mu: Option<[f64; N_ATTRIBUTES]>,
    pub mu_mel: f64,
    pub tau: f64,
    pub lambda: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            delta: 0.4,
            gamma: [1.0 / 3.0; 3],
            order: 3,
            mu: None,
            mu_mel: 1.0,
            tau: 2.0,
            lambda: 1.0,
            learning_rate: 1e-5,
            max_epochs: 150,
            patience: 50,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(0.0..=1.0).contains(&self.delta) {
            return bad("delta must lie in [0, 1]");
        }
        if self.gamma.iter().any(|&g| !(g >= 0.0)) || (self.gamma.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad("gamma must be nonnegative and sum to 1");
        }
        if let Some(mu) = self.mu {
            if mu.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
                return bad("mu entries must be positive");
            }
        }
        if !(self.mu_mel > 0.0 && self.mu_mel.is_finite()) {
            return bad("mu_mel must be positive");
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return bad("tau must be nonnegative");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be nonnegative");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return bad("batch_size and max_epochs must be positive");
        }
        Ok(())
    }

    pub fn mu_or_default(&self) -> [f64; N_ATTRIBUTES] {
        self.mu.unwrap_or([1.0; N_ATTRIBUTES])
    }
}

/// Inverse positive-class frequency per attribute, normalized to mean 1.
/// Attributes without positives are treated as having one.
pub fn balance_from_frequencies(cases: &CaseSet) -> [f64; N_ATTRIBUTES] {
    let n = cases.len().max(1) as f64;
    let mut inv = [0.0; N_ATTRIBUTES];
    for (j, slot) in inv.iter_mut().enumerate() {
        let pos = cases.cases().iter().filter(|c| c.attr_labels[j] == 1).count().max(1);
        *slot = n / pos as f64;
    }
    let mean = inv.iter().sum::<f64>() / N_ATTRIBUTES as f64;
    inv.map(|v| v / mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Case, SplitTag};

    #[test]
    fn defaults_validate() {
        Hyperparameters::default().validate().unwrap();
        let h = Hyperparameters {
            gamma: [0.5, 0.5, 0.5],
            ..Default::default()
        };
        assert!(h.validate().is_err());
    }

    #[test]
    fn balance_is_mean_one() {
        let cases = (0..10)
            .map(|i| {
                let mut l = [0u8; 7];
                l[0] = (i < 5) as u8;
                l[1] = (i < 1) as u8;
                Case::new(format!("c{i}"), l, 0)
            })
            .collect();
        let set = CaseSet::new(cases, SplitTag::Train).unwrap();
        let mu = balance_from_frequencies(&set);
        assert!((mu.iter().sum::<f64>() / 7.0 - 1.0).abs() < 1e-12);
        assert!(mu[1] > mu[0]);
        assert!((mu[1] / mu[0] - 5.0).abs() < 1e-12);
    }
}
