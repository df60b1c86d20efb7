//! Adam training loop with validation-AUC early stopping.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::forward::{forward_case, GraphContext};
use super::grad::gradients;
use super::params::ModelParameters;
use super::{balance_from_frequencies, Hyperparameters};
use crate::checklist::N_ATTRIBUTES;
use crate::dataset::{Case, CaseSet};
use crate::eval;
use crate::{Error, Result};

pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: ModelParameters,
    v: ModelParameters,
}

impl Adam {
    pub fn new(params: &ModelParameters, learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    pub fn step(&mut self, params: &mut ModelParameters, grad: &ModelParameters) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.learning_rate, self.eps);
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grad.tensors())
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut())
        {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub attributes: [f64; N_ATTRIBUTES],
    pub melanoma: f64,
}

/// Forward pass over `cases` in parallel; output order follows input order.
pub fn predict(cases: &[Case], params: &ModelParameters, hyper: &Hyperparameters, ctx: &GraphContext) -> Vec<Prediction> {
    let graph = ctx.graph_feature(params);
    cases
        .par_iter()
        .map(|c| {
            let t = forward_case(c, params, &graph, hyper);
            Prediction {
                attributes: t.y7,
                melanoma: t.y_mel,
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_mean_auc: f64,
    pub val_mel_auc: f64,
}

#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub params: ModelParameters,
    /// Hyperparameters with `mu` resolved.
    pub hyper: Hyperparameters,
    pub best_epoch: usize,
    pub best_val_mean_auc: f64,
    pub best_val_mel_auc: f64,
    /// Youden-optimal melanoma probability cut on the validation split.
    pub threshold: f64,
}

/// Train with mini-batch Adam, keeping the parameters with the best mean
/// validation AUC over melanoma and the seven attributes.
///
/// Stops after `max_epochs`, or once `patience` consecutive epochs fail to
/// improve on the best validation score.
pub fn train(
    train_set: &CaseSet,
    val_set: &CaseSet,
    hyper: &Hyperparameters,
    ctx: &GraphContext,
) -> Result<(TrainedModel, Vec<EpochRecord>)> {
    hyper.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Config("training and validation splits must be nonempty".into()));
    }
    if hyper.order != ctx.order() {
        return Err(Error::Config(format!(
            "hyperparameter order {} differs from graph order {}",
            hyper.order,
            ctx.order()
        )));
    }
    let d = train_set
        .feature_dim()
        .ok_or_else(|| Error::Config("training cases have no features".into()))?;
    if val_set.feature_dim() != Some(d) {
        return Err(Error::Dimension("validation features differ from training features".into()));
    }
    {
        let train_ids: std::collections::HashSet<&str> = train_set.cases().iter().map(|c| c.id.as_str()).collect();
        if val_set.cases().iter().any(|c| train_ids.contains(c.id.as_str())) {
            return Err(Error::Config("training and validation splits overlap".into()));
        }
    }

    let mut hyper = hyper.clone();
    if hyper.mu.is_none() {
        hyper.mu = Some(balance_from_frequencies(train_set));
    }

    let mut params = ModelParameters::init(d, ctx, hyper.seed);
    let mut adam = Adam::new(&params, hyper.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    let mut history = Vec::new();
    let mut best: Option<(usize, f64, f64, ModelParameters)> = None;
    let mut since_best = 0usize;

    for epoch in 1..=hyper.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(hyper.batch_size) {
            let batch: Vec<&Case> = chunk.iter().map(|&i| &train_set.cases()[i]).collect();
            let g = gradients(&batch, &params, &hyper, ctx)?;
            loss_sum += g.loss * batch.len() as f64;
            adam.step(&mut params, &g.grad);
        }
        if !params.is_finite() {
            return Err(Error::Numerical {
                case_id: format!("<epoch {epoch}>"),
                message: "parameters diverged".into(),
            });
        }

        let preds = predict(val_set.cases(), &params, &hyper, ctx);
        let summary = eval::auc_summary(&preds, val_set.cases());
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            val_mean_auc: summary.mean,
            val_mel_auc: summary.melanoma.unwrap_or(f64::NAN),
        };
        log::debug!(
            "epoch {epoch}: loss {:.6} val mean AUC {:.4} mel AUC {:.4}",
            record.train_loss,
            record.val_mean_auc,
            record.val_mel_auc
        );
        history.push(record);

        let improved = best.as_ref().is_none_or(|b| record.val_mean_auc > b.1);
        if improved {
            best = Some((epoch, record.val_mean_auc, record.val_mel_auc, params.clone()));
            since_best = 0;
        } else {
            since_best += 1;
        }
        if since_best >= hyper.patience {
            break;
        }
    }

    let (best_epoch, best_val_mean_auc, best_val_mel_auc, params) = best.expect("at least one epoch ran");
    let preds = predict(val_set.cases(), &params, &hyper, ctx);
    let mel_scores: Vec<f64> = preds.iter().map(|p| p.melanoma).collect();
    let mel_labels: Vec<u8> = val_set.cases().iter().map(|c| c.mel_label).collect();
    let threshold = eval::youden_threshold(&mel_scores, &mel_labels).unwrap_or(eval::TRADITIONAL_EQUIVALENT_THRESHOLD);
    Ok((
        TrainedModel {
            params,
            hyper,
            best_epoch,
            best_val_mean_auc,
            best_val_mel_auc,
            threshold,
        },
        history,
    ))
}
