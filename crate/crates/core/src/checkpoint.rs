//! Versioned JSON checkpoints and the read-only model rebuilt from them.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::checklist::{N_ATTRIBUTES, N_NODES};
use crate::dataset::Case;
use crate::embedding::{feature_digest, NodeFeatureMatrix, NODE_FEATURE_DIM};
use crate::graph::{CoOccurrence, GraphArtifacts, GraphConfig};
use crate::model::{predict, GraphContext, Hyperparameters, ModelParameters, ParametersDoc, Prediction, TrainedModel};
use crate::util::sha256_hex;
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphProvenance {
    pub config: GraphConfig,
    pub cooccurrence: CoOccurrence,
    pub cooccurrence_digest: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingMetrics {
    pub best_epoch: usize,
    pub val_mean_auc: Option<f64>,
    pub val_mel_auc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub hyperparameters: Hyperparameters,
    pub parameters: ParametersDoc,
    pub graph: GraphProvenance,
    /// `"glove"` or `"one_hot"`.
    pub node_encoding: String,
    pub node_features: Vec<Vec<f64>>,
    pub embedding_digest: String,
    /// Melanoma probability at or above which the model refers.
    pub threshold: f64,
    pub best_epoch: usize,
    pub metrics: TrainingMetrics,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl Checkpoint {
    pub fn new(trained: &TrainedModel, graph: &GraphArtifacts, cfg: &GraphConfig, node_features: &NodeFeatureMatrix, node_encoding: &str) -> Self {
        Checkpoint {
            format_version: FORMAT_VERSION,
            hyperparameters: trained.hyper.clone(),
            parameters: trained.params.to_doc(),
            graph: GraphProvenance {
                config: *cfg,
                cooccurrence: graph.cooccurrence.clone(),
                cooccurrence_digest: graph.cooccurrence.digest(),
            },
            node_encoding: node_encoding.to_string(),
            node_features: node_features.outer_iter().map(|r| r.to_vec()).collect(),
            embedding_digest: feature_digest(node_features),
            threshold: trained.threshold,
            best_epoch: trained.best_epoch,
            metrics: TrainingMetrics {
                best_epoch: trained.best_epoch,
                val_mean_auc: finite(trained.best_val_mean_auc),
                val_mel_auc: finite(trained.best_val_mel_auc),
            },
        }
    }

    /// Pretty-printed JSON with a trailing newline. Reals use the shortest
    /// representation that parses back to the same bits.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        s.push('\n');
        s
    }

    pub fn digest(&self) -> String {
        sha256_hex(self.to_json().as_bytes())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    /// Parse and validate. Malformed JSON is a format error naming the line,
    /// column and byte offset; a wrong version or shape is a checkpoint error.
    pub fn from_json(text: &str, source_name: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| {
            let offset = byte_offset(text, e.line(), e.column());
            Error::Format {
                source_name: source_name.to_string(),
                line: e.line() as u64,
                message: format!("column {}, byte offset {offset}: {e}", e.column()),
            }
        })?;
        match value.get("format_version").and_then(serde_json::Value::as_u64) {
            Some(v) if v == u64::from(FORMAT_VERSION) => {}
            Some(v) => {
                return Err(Error::Checkpoint(format!(
                    "unsupported format_version {v}, expected {FORMAT_VERSION}"
                )))
            }
            None => return Err(Error::Checkpoint("missing format_version".into())),
        }
        let ck: Checkpoint = serde_json::from_value(value).map_err(|e| Error::Checkpoint(e.to_string()))?;
        ck.validate()?;
        Ok(ck)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&crate::util::read_to_string(path)?, &path.display().to_string())
    }

    fn validate(&self) -> Result<()> {
        if self.graph.cooccurrence.digest() != self.graph.cooccurrence_digest {
            return Err(Error::Checkpoint("co-occurrence digest mismatch".into()));
        }
        if self.node_features.len() != N_NODES || self.node_features.iter().any(|r| r.len() != NODE_FEATURE_DIM) {
            return Err(Error::Checkpoint(format!("node_features must be {N_NODES}x{NODE_FEATURE_DIM}")));
        }
        if feature_digest(&self.node_feature_matrix()) != self.embedding_digest {
            return Err(Error::Checkpoint("embedding digest mismatch".into()));
        }
        if self.graph.config.order != self.hyperparameters.order {
            return Err(Error::Checkpoint("graph order differs from hyperparameter order".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Checkpoint("threshold must lie in [0, 1]".into()));
        }
        self.hyperparameters
            .validate()
            .map_err(|e| Error::Checkpoint(format!("hyperparameters: {e}")))
    }

    fn node_feature_matrix(&self) -> NodeFeatureMatrix {
        Array2::from_shape_fn((N_NODES, NODE_FEATURE_DIM), |(i, j)| self.node_features[i][j])
    }
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let line_start: usize = text.split_inclusive('\n').take(line.saturating_sub(1)).map(str::len).sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

/// Immutable model state for scoring and evaluation.
#[derive(Clone, Debug)]
pub struct Model {
    pub checkpoint: Checkpoint,
    pub params: ModelParameters,
    pub graph: GraphArtifacts,
    pub context: GraphContext,
}

impl Model {
    pub fn from_checkpoint(checkpoint: Checkpoint) -> Result<Self> {
        let params = ModelParameters::from_doc(&checkpoint.parameters)?;
        if params.order() != checkpoint.hyperparameters.order {
            return Err(Error::Checkpoint("theta count differs from hyperparameter order".into()));
        }
        let graph = GraphArtifacts::build(checkpoint.graph.cooccurrence.clone(), &checkpoint.graph.config)?;
        let context = GraphContext::new(graph.proximity.clone(), checkpoint.node_feature_matrix())?;
        Ok(Model {
            checkpoint,
            params,
            graph,
            context,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(Checkpoint::load(path)?)
    }

    pub fn hyperparameters(&self) -> &Hyperparameters {
        &self.checkpoint.hyperparameters
    }

    pub fn weights(&self) -> [f64; N_ATTRIBUTES] {
        self.params.attribute_weights()
    }

    pub fn threshold(&self) -> f64 {
        self.checkpoint.threshold
    }

    pub fn feature_dim(&self) -> usize {
        self.params.feature_dim()
    }

    pub fn predict(&self, cases: &[Case]) -> Result<Vec<Prediction>> {
        if let Some(c) = cases.iter().find(|c| c.derm_features.len() != self.feature_dim() || c.clin_features.len() != self.feature_dim()) {
            return Err(Error::Dimension(format!(
                "case `{}` features do not match model width {}",
                c.id,
                self.feature_dim()
            )));
        }
        Ok(predict(cases, &self.params, self.hyperparameters(), &self.context))
    }
}
