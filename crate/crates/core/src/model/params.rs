use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::forward::GraphContext;
use crate::checklist::{N_ATTRIBUTES, TRADITIONAL_WEIGHTS};
use crate::embedding::NODE_FEATURE_DIM;
use crate::util::{softplus, softplus_inv};
use crate::{Error, Result};

/// Trainable state. Also used as the container for gradients and optimizer
/// moments, which share its shapes.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParameters {
    /// `Theta^(k)` for `k = 0..=K`, each `128 x d`.
    pub theta: Vec<Array2<f64>>,
    /// `d x d` map from the pooled graph feature to the gate vector.
    pub pool_proj: Array2<f64>,
    /// `7 x d` attribute head weights.
    pub head_w: Array2<f64>,
    pub head_b: Array1<f64>,
    /// Pre-activation attribute weights; the weights are `softplus(u)`.
    pub u: Array1<f64>,
}

impl ModelParameters {
    pub fn zeros(feature_dim: usize, order: usize) -> Self {
        ModelParameters {
            theta: (0..=order)
                .map(|_| Array2::zeros((NODE_FEATURE_DIM, feature_dim)))
                .collect(),
            pool_proj: Array2::zeros((feature_dim, feature_dim)),
            head_w: Array2::zeros((N_ATTRIBUTES, feature_dim)),
            head_b: Array1::zeros(N_ATTRIBUTES),
            u: Array1::zeros(N_ATTRIBUTES),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.feature_dim(), self.order())
    }

    /// Starting point for training.
    ///
    /// `Theta` is uniform in `+-1/sqrt(128)`, the heads are zero, `u` puts the
    /// attribute weights at the traditional 2/1 points, and `pool_proj` is the
    /// minimum-norm map sending the initial pooled graph feature to the
    /// all-ones gate.
    pub fn init(feature_dim: usize, ctx: &GraphContext, seed: u64) -> Self {
        let order = ctx.order();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1a17_5eed);
        let bound = 1.0 / (NODE_FEATURE_DIM as f64).sqrt();
        let mut p = Self::zeros(feature_dim, order);
        for th in &mut p.theta {
            th.mapv_inplace(|_| rng.random_range(-bound..bound));
        }
        p.u = Array1::from_iter(TRADITIONAL_WEIGHTS.iter().map(|&w| softplus_inv(w)));

        let pooled = ctx.pooled(&p.theta);
        let norm2 = pooled.dot(&pooled);
        if norm2 > 1e-300 {
            p.pool_proj = Array2::from_shape_fn((feature_dim, feature_dim), |(_, j)| pooled[j] / norm2);
        } else {
            let b = 1.0 / (feature_dim as f64).sqrt();
            p.pool_proj.mapv_inplace(|_| rng.random_range(-b..b));
        }
        p
    }

    pub fn feature_dim(&self) -> usize {
        self.head_w.ncols()
    }

    pub fn order(&self) -> usize {
        self.theta.len() - 1
    }

    /// `softplus(u)`, always positive.
    pub fn attribute_weights(&self) -> [f64; N_ATTRIBUTES] {
        std::array::from_fn(|j| softplus(self.u[j]))
    }

    /// Flat views of every tensor in a fixed order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = self.theta.iter().map(|t| t.as_slice().expect("standard layout")).collect();
        out.push(self.pool_proj.as_slice().expect("standard layout"));
        out.push(self.head_w.as_slice().expect("standard layout"));
        out.push(self.head_b.as_slice().expect("standard layout"));
        out.push(self.u.as_slice().expect("standard layout"));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = self
            .theta
            .iter_mut()
            .map(|t| t.as_slice_mut().expect("standard layout"))
            .collect();
        out.push(self.pool_proj.as_slice_mut().expect("standard layout"));
        out.push(self.head_w.as_slice_mut().expect("standard layout"));
        out.push(self.head_b.as_slice_mut().expect("standard layout"));
        out.push(self.u.as_slice_mut().expect("standard layout"));
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn to_doc(&self) -> ParametersDoc {
        let rows = |m: &Array2<f64>| m.outer_iter().map(|r| r.to_vec()).collect::<Vec<_>>();
        ParametersDoc {
            theta: self.theta.iter().map(rows).collect(),
            pool_proj: rows(&self.pool_proj),
            head_w: rows(&self.head_w),
            head_b: self.head_b.to_vec(),
            u: self.u.to_vec(),
        }
    }

    pub fn from_doc(doc: &ParametersDoc) -> Result<Self> {
        let mat = |name: &str, rows: &[Vec<f64>], shape: (usize, usize)| -> Result<Array2<f64>> {
            if rows.len() != shape.0 || rows.iter().any(|r| r.len() != shape.1) {
                return Err(Error::Checkpoint(format!("`{name}` does not have shape {shape:?}")));
            }
            Ok(Array2::from_shape_fn(shape, |(i, j)| rows[i][j]))
        };
        let d = doc.head_b.len().max(1);
        let d = doc.head_w.first().map_or(d, Vec::len);
        if doc.theta.is_empty() || d == 0 {
            return Err(Error::Checkpoint("parameters are empty".into()));
        }
        let theta = doc
            .theta
            .iter()
            .enumerate()
            .map(|(k, t)| mat(&format!("theta[{k}]"), t, (NODE_FEATURE_DIM, d)))
            .collect::<Result<Vec<_>>>()?;
        if doc.head_b.len() != N_ATTRIBUTES || doc.u.len() != N_ATTRIBUTES {
            return Err(Error::Checkpoint("head_b and u must have 7 entries".into()));
        }
        let p = ModelParameters {
            theta,
            pool_proj: mat("pool_proj", &doc.pool_proj, (d, d))?,
            head_w: mat("head_w", &doc.head_w, (N_ATTRIBUTES, d))?,
            head_b: Array1::from(doc.head_b.clone()),
            u: Array1::from(doc.u.clone()),
        };
        if !p.is_finite() {
            return Err(Error::Checkpoint("parameters contain non-finite values".into()));
        }
        Ok(p)
    }
}

/// Nested-array form of [`ModelParameters`] for checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParametersDoc {
    pub theta: Vec<Vec<Vec<f64>>>,
    pub pool_proj: Vec<Vec<f64>>,
    pub head_w: Vec<Vec<f64>>,
    pub head_b: Vec<f64>,
    pub u: Vec<f64>,
}
