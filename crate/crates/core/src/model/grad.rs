//! Analytic gradients of the mean batch loss.

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use super::forward::{forward_case, GraphContext};
use super::loss::{focal_loss_grad, total_loss};
use super::params::ModelParameters;
use super::Hyperparameters;
use crate::checklist::N_ATTRIBUTES;
use crate::dataset::Case;
use crate::util::sigmoid;
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct BatchGradient {
    /// Mean loss over the batch.
    pub loss: f64,
    pub grad: ModelParameters,
}

struct CaseGradient {
    loss: f64,
    head_w: Array2<f64>,
    head_b: [f64; N_ATTRIBUTES],
    u: [f64; N_ATTRIBUTES],
    gate: Array1<f64>,
}

fn case_gradient(
    case: &Case,
    params: &ModelParameters,
    graph: &super::GraphFeature,
    hyper: &Hyperparameters,
    mu: &[f64; N_ATTRIBUTES],
) -> Result<CaseGradient> {
    let numerical = |message: &str| Error::Numerical {
        case_id: case.id.clone(),
        message: message.to_string(),
    };
    if case.derm_features.len() != params.feature_dim() || case.clin_features.len() != params.feature_dim() {
        return Err(Error::Dimension(format!(
            "case `{}` has {} features, model expects {}",
            case.id,
            case.derm_features.len(),
            params.feature_dim()
        )));
    }
    let t = forward_case(case, params, graph, hyper);
    let loss = total_loss(
        &t.y7,
        &case.attr_labels,
        t.y_mel,
        case.mel_label,
        mu,
        hyper.mu_mel,
        hyper.tau,
        hyper.lambda,
    )
    .total;
    if !loss.is_finite() {
        return Err(numerical("non-finite loss"));
    }

    let w = params.attribute_weights();
    let w_sum: f64 = w.iter().sum();
    // d loss / d (weighted average), through the melanoma sigmoid.
    let g_avg = hyper.lambda
        * focal_loss_grad(t.y_mel, case.mel_label, hyper.mu_mel, hyper.tau)
        * t.y_mel
        * (1.0 - t.y_mel);

    let u: [f64; N_ATTRIBUTES] =
        std::array::from_fn(|j| g_avg * (t.y7[j] - t.weighted_average) / w_sum * sigmoid(params.u[j]));

    let d = params.feature_dim();
    let mut head_w = Array2::zeros((N_ATTRIBUTES, d));
    let mut head_b = [0.0; N_ATTRIBUTES];
    let mut dx = Array1::<f64>::zeros(d);
    for j in 0..N_ATTRIBUTES {
        let p = t.y7[j];
        let dp = focal_loss_grad(p, case.attr_labels[j], mu[j], hyper.tau) + g_avg * w[j] / w_sum;
        let delta = dp * p * (1.0 - p);
        if !delta.is_finite() {
            return Err(numerical("non-finite head gradient"));
        }
        head_b[j] = delta;
        head_w.row_mut(j).scaled_add(delta, &t.x);
        dx.scaled_add(delta, &params.head_w.row(j));
    }

    let [gd, gc, gf] = hyper.gamma;
    let gate = Array1::from_shape_fn(d, |i| {
        dx[i] * (gd * case.derm_features[i] + gc * case.clin_features[i] + gf * t.blended[i])
    });
    if gate.iter().any(|v| !v.is_finite()) {
        return Err(numerical("non-finite gate gradient"));
    }
    Ok(CaseGradient {
        loss,
        head_w,
        head_b,
        u,
        gate,
    })
}

/// Mean loss and its gradient with respect to every parameter.
///
/// Per-case terms are evaluated in parallel and reduced in batch order, so
/// the result does not depend on the number of worker threads.
pub fn gradients(
    batch: &[&Case],
    params: &ModelParameters,
    hyper: &Hyperparameters,
    ctx: &GraphContext,
) -> Result<BatchGradient> {
    if batch.is_empty() {
        return Err(Error::Config("gradient of an empty batch".into()));
    }
    let mu = hyper.mu_or_default();
    let graph = ctx.graph_feature(params);
    let per_case: Vec<CaseGradient> = batch
        .par_iter()
        .map(|c| case_gradient(c, params, &graph, hyper, &mu))
        .collect::<Result<_>>()?;

    let n = batch.len() as f64;
    let mut grad = params.zeros_like();
    let mut loss = 0.0;
    let mut d_gate = Array1::<f64>::zeros(params.feature_dim());
    for cg in &per_case {
        loss += cg.loss;
        grad.head_w += &cg.head_w;
        for j in 0..N_ATTRIBUTES {
            grad.head_b[j] += cg.head_b[j];
            grad.u[j] += cg.u[j];
        }
        d_gate += &cg.gate;
    }
    grad.head_w /= n;
    grad.head_b /= n;
    grad.u /= n;
    d_gate /= n;

    // gate = pool_proj * pooled, pooled = sum_k Theta_k^T r_k.
    let pooled = &graph.pooled;
    grad.pool_proj = Array2::from_shape_fn(grad.pool_proj.raw_dim(), |(i, j)| d_gate[i] * pooled[j]);
    let d_pooled = params.pool_proj.t().dot(&d_gate);
    for (g, r) in grad.theta.iter_mut().zip(ctx.pooled_nodes()) {
        *g = Array2::from_shape_fn(g.raw_dim(), |(a, b)| r[a] * d_pooled[b]);
    }

    Ok(BatchGradient { loss: loss / n, grad })
}

/// Mean batch loss alone; shares the forward path with [`gradients`].
pub fn batch_loss(batch: &[&Case], params: &ModelParameters, hyper: &Hyperparameters, ctx: &GraphContext) -> f64 {
    let mu = hyper.mu_or_default();
    let graph = ctx.graph_feature(params);
    let total: f64 = batch
        .iter()
        .map(|c| {
            let t = forward_case(c, params, &graph, hyper);
            total_loss(&t.y7, &c.attr_labels, t.y_mel, c.mel_label, &mu, hyper.mu_mel, hyper.tau, hyper.lambda).total
        })
        .sum();
    total / batch.len() as f64
}
