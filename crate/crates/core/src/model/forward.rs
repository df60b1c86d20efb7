use ndarray::{Array1, Array2, ArrayView1};

use super::params::ModelParameters;
use super::Hyperparameters;
use crate::checklist::N_ATTRIBUTES;
use crate::dataset::Case;
use crate::embedding::{NodeFeatureMatrix, NODE_FEATURE_DIM};
use crate::graph::ProximityStack;
use crate::util::{sigmoid, softplus};
use crate::{Error, Result};

/// `delta * clin + (1 - delta) * derm`.
pub fn fuse_modalities(clin: &[f64], derm: &[f64], delta: f64) -> Vec<f64> {
    assert_eq!(clin.len(), derm.len(), "modality feature lengths differ");
    clin.iter()
        .zip(derm)
        .map(|(&c, &d)| delta * c + (1.0 - delta) * d)
        .collect()
}

/// Multi-scale digraph convolution, `sum_k S_k X Theta^(k)` with `S_k` from
/// [`ProximityStack::propagation`].
pub fn digraph_conv(prox: &ProximityStack, x: &NodeFeatureMatrix, theta: &[Array2<f64>]) -> Array2<f64> {
    assert_eq!(theta.len(), prox.order + 1, "need one Theta per proximity order");
    assert_eq!(x.nrows(), prox.n_nodes(), "node feature rows must match graph nodes");
    let mut z = Array2::zeros((x.nrows(), theta[0].ncols()));
    for (k, th) in theta.iter().enumerate() {
        assert_eq!(th.nrows(), x.ncols(), "Theta rows must match node feature width");
        z += &prox.propagation(k).dot(&x.dot(th));
    }
    z
}

/// Gate each modality channel by `z = pool_proj * mean_rows(z_nodes)` and
/// blend with `gamma = (derm, clin, blended)`.
pub fn fuse_graph_image(
    derm: &[f64],
    clin: &[f64],
    blended: &[f64],
    z_nodes: &Array2<f64>,
    pool_proj: &Array2<f64>,
    gamma: [f64; 3],
) -> Array1<f64> {
    let pooled = z_nodes.mean_axis(ndarray::Axis(0)).expect("graph has nodes");
    let z = pool_proj.dot(&pooled);
    gate(derm, clin, blended, &z, gamma).3
}

/// Returns the three gated channels and their blend.
fn gate(
    derm: &[f64],
    clin: &[f64],
    blended: &[f64],
    z: &Array1<f64>,
    gamma: [f64; 3],
) -> (Array1<f64>, Array1<f64>, Array1<f64>, Array1<f64>) {
    let d = z.len();
    assert!(
        derm.len() == d && clin.len() == d && blended.len() == d,
        "image features must match the graph feature width"
    );
    let fd = Array1::from_shape_fn(d, |i| derm[i] * z[i]);
    let fc = Array1::from_shape_fn(d, |i| clin[i] * z[i]);
    let ff = Array1::from_shape_fn(d, |i| blended[i] * z[i]);
    let x = Array1::from_shape_fn(d, |i| gamma[0] * fd[i] + gamma[1] * fc[i] + gamma[2] * ff[i]);
    (fd, fc, ff, x)
}

/// Seven independent sigmoid heads on the fused feature.
pub fn attribute_heads(x: ArrayView1<f64>, head_w: &Array2<f64>, head_b: &Array1<f64>) -> ([f64; N_ATTRIBUTES], [f64; N_ATTRIBUTES]) {
    let logits: [f64; N_ATTRIBUTES] = std::array::from_fn(|j| head_w.row(j).dot(&x) + head_b[j]);
    (logits, logits.map(sigmoid))
}

/// Weighted attribute average `sum w y / sum w` and its sigmoid, for explicit
/// positive weights.
pub fn melanoma_from_weights(y7: &[f64; N_ATTRIBUTES], w: &[f64; N_ATTRIBUTES]) -> (f64, f64) {
    let total: f64 = w.iter().sum();
    let avg = y7.iter().zip(w).map(|(y, w)| y * w).sum::<f64>() / total;
    (avg, sigmoid(avg))
}

/// Melanoma probability with weights `softplus(u)`.
pub fn melanoma_head(y7: &[f64; N_ATTRIBUTES], u: &[f64; N_ATTRIBUTES]) -> f64 {
    melanoma_from_weights(y7, &u.map(softplus)).1
}

/// Graph operators and pooled node features that do not depend on the case.
#[derive(Clone, Debug)]
pub struct GraphContext {
    pub proximity: ProximityStack,
    pub node_features: NodeFeatureMatrix,
    /// `X^T S_k^T 1 / n` per scale: the node-mean of `S_k X`.
    pooled_nodes: Vec<Array1<f64>>,
}

impl GraphContext {
    pub fn new(proximity: ProximityStack, node_features: NodeFeatureMatrix) -> Result<Self> {
        if node_features.nrows() != proximity.n_nodes() || node_features.ncols() != NODE_FEATURE_DIM {
            return Err(Error::Dimension(format!(
                "node features are {:?}, expected ({}, {NODE_FEATURE_DIM})",
                node_features.dim(),
                proximity.n_nodes()
            )));
        }
        let n = proximity.n_nodes() as f64;
        let pooled_nodes = (0..=proximity.order)
            .map(|k| {
                let s = proximity.propagation(k);
                let col_mean = s.sum_axis(ndarray::Axis(0)) / n;
                node_features.t().dot(&col_mean)
            })
            .collect();
        Ok(GraphContext {
            proximity,
            node_features,
            pooled_nodes,
        })
    }

    pub fn order(&self) -> usize {
        self.proximity.order
    }

    pub(crate) fn pooled_nodes(&self) -> &[Array1<f64>] {
        &self.pooled_nodes
    }

    /// Node-mean of the convolution output, `sum_k Theta_k^T r_k`.
    pub fn pooled(&self, theta: &[Array2<f64>]) -> Array1<f64> {
        let mut g = Array1::zeros(theta[0].ncols());
        for (th, r) in theta.iter().zip(&self.pooled_nodes) {
            g += &th.t().dot(r);
        }
        g
    }

    pub fn graph_feature(&self, params: &ModelParameters) -> GraphFeature {
        let z_nodes = digraph_conv(&self.proximity, &self.node_features, &params.theta);
        let pooled = z_nodes.mean_axis(ndarray::Axis(0)).expect("graph has nodes");
        let gate = params.pool_proj.dot(&pooled);
        GraphFeature { pooled, gate }
    }
}

/// Case-independent graph output: pooled node feature and the gate vector.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphFeature {
    pub pooled: Array1<f64>,
    pub gate: Array1<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace {
    pub blended: Vec<f64>,
    pub gate: Array1<f64>,
    pub fused_derm: Array1<f64>,
    pub fused_clin: Array1<f64>,
    pub fused_blended: Array1<f64>,
    pub x: Array1<f64>,
    pub logits: [f64; N_ATTRIBUTES],
    pub y7: [f64; N_ATTRIBUTES],
    pub weighted_average: f64,
    pub y_mel: f64,
}

pub fn forward_case(case: &Case, params: &ModelParameters, graph: &GraphFeature, hyper: &Hyperparameters) -> ForwardTrace {
    let blended = fuse_modalities(&case.clin_features, &case.derm_features, hyper.delta);
    let (fused_derm, fused_clin, fused_blended, x) =
        gate(&case.derm_features, &case.clin_features, &blended, &graph.gate, hyper.gamma);
    let (logits, y7) = attribute_heads(x.view(), &params.head_w, &params.head_b);
    let (weighted_average, y_mel) = melanoma_from_weights(&y7, &params.attribute_weights());
    ForwardTrace {
        blended,
        gate: graph.gate.clone(),
        fused_derm,
        fused_clin,
        fused_blended,
        x,
        logits,
        y7,
        weighted_average,
        y_mel,
    }
}
