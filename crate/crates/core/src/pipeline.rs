//! Run configuration and the file-producing commands behind the CLI.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::checkpoint::{Checkpoint, Model};
use crate::dataset::{generate_synthetic, load_features, parse_metadata, split, CaseSet, LabelMapping, SyntheticSpec};
use crate::embedding::{encode_all_nodes, one_hot_features, EmbeddingTable, NodeFeatureMatrix, NodeTokens};
use crate::eval::{build_report, EvalReport, DEFAULT_BINARIZE_THRESHOLD};
use crate::graph::{count_cooccurrence, GraphArtifacts, GraphConfig};
use crate::model::{train, EpochRecord, GraphContext, Hyperparameters};
use crate::scoring::{ScoreRequest, ScoreResponse, Scorer};
use crate::{Error, Result};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const HISTORY_FILE: &str = "history.csv";
pub const GRAPH_FILE: &str = "graph.json";
pub const METRICS_FILE: &str = "metrics.json";
pub const ROC_LEARNED_FILE: &str = "roc_learned.csv";
pub const ROC_TRADITIONAL_FILE: &str = "roc_traditional.csv";
pub const WEIGHTS_FILE: &str = "weights.json";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalSplit {
    Train,
    Val,
    #[default]
    Test,
    All,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    /// Train, validation, and test fractions.
    pub fractions: [f64; 3],
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            fractions: [0.6, 0.2, 0.2],
            seed: 0,
        }
    }
}

/// JSON run configuration. Relative paths resolve against the directory of
/// the configuration file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Generate a planted dataset instead of reading files.
    pub synthetic: Option<SyntheticSpec>,
    pub metadata: Option<PathBuf>,
    pub features: Option<PathBuf>,
    /// Category binarization table; the shipped default when absent.
    pub mapping: Option<PathBuf>,
    /// Word vectors in GloVe text format.
    pub embeddings: Option<PathBuf>,
    /// `{node: [tokens]}`; the built-in token table when absent.
    pub node_tokens: Option<PathBuf>,
    /// Use one-hot node features when no embeddings are configured.
    pub allow_one_hot_fallback: bool,
    pub split: SplitConfig,
    pub hyperparameters: Hyperparameters,
    pub graph: GraphConfig,
    /// Checkpoint for `eval`, `score`, and `serve`; `<out>/checkpoint.json`
    /// when absent.
    pub checkpoint: Option<PathBuf>,
    pub eval_split: EvalSplit,
    pub binarize_threshold: Option<f64>,
    pub out: Option<PathBuf>,
    pub port: Option<u16>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("run config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_json(&crate::util::read_to_string(path)?)?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        for p in [
            &mut self.metadata,
            &mut self.features,
            &mut self.mapping,
            &mut self.embeddings,
            &mut self.node_tokens,
            &mut self.checkpoint,
            &mut self.out,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint
            .clone()
            .unwrap_or_else(|| self.out_dir().join(CHECKPOINT_FILE))
    }

    pub fn binarize(&self) -> f64 {
        self.binarize_threshold.unwrap_or(DEFAULT_BINARIZE_THRESHOLD)
    }

    /// Overrides the training and split seeds.
    pub fn set_seed(&mut self, seed: u64) {
        self.hyperparameters.seed = seed;
        self.split.seed = seed;
    }

    fn require_file(path: &Path, what: &str) -> Result<()> {
        if path.is_file() {
            Ok(())
        } else {
            Err(Error::Config(format!("{what} `{}` does not exist", path.display())))
        }
    }

    /// Checks the data source and every referenced input file.
    pub fn validate_data(&self) -> Result<()> {
        match (&self.synthetic, &self.metadata, &self.features) {
            (Some(spec), None, None) => spec.validate()?,
            (None, Some(m), Some(f)) => {
                Self::require_file(m, "metadata")?;
                Self::require_file(f, "features")?;
            }
            (None, Some(_), None) | (None, None, Some(_)) => {
                return Err(Error::Config("metadata and features must be given together".into()))
            }
            (None, None, None) => return Err(Error::Config("no data source: set `synthetic` or `metadata` + `features`".into())),
            _ => return Err(Error::Config("`synthetic` excludes `metadata` and `features`".into())),
        }
        if let Some(m) = &self.mapping {
            Self::require_file(m, "mapping")?;
        }
        if let Some(t) = &self.node_tokens {
            Self::require_file(t, "node token table")?;
        }
        if let Some(t) = self.binarize_threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Config("binarize_threshold must lie in [0, 1]".into()));
            }
        }
        Ok(())
    }

    pub fn validate_training(&self) -> Result<()> {
        self.validate_data()?;
        match &self.embeddings {
            Some(e) => Self::require_file(e, "embeddings")?,
            None if self.allow_one_hot_fallback => {}
            None => {
                return Err(Error::Config(
                    "no embeddings configured and allow_one_hot_fallback is false".into(),
                ))
            }
        }
        if self.graph.order != self.hyperparameters.order {
            return Err(Error::Config(format!(
                "graph.order ({}) and hyperparameters.order ({}) differ",
                self.graph.order, self.hyperparameters.order
            )));
        }
        self.hyperparameters.validate()
    }

    pub fn load_cases(&self) -> Result<CaseSet> {
        if let Some(spec) = &self.synthetic {
            return generate_synthetic(spec);
        }
        let (Some(meta), Some(feat)) = (&self.metadata, &self.features) else {
            return Err(Error::Config("no data source configured".into()));
        };
        let mapping = match &self.mapping {
            Some(p) => LabelMapping::load(p)?,
            None => LabelMapping::default(),
        };
        load_features(feat, parse_metadata(meta, &mapping)?)
    }

    pub fn load_splits(&self) -> Result<(CaseSet, CaseSet, CaseSet)> {
        split(&self.load_cases()?, self.split.fractions, self.split.seed)
    }

    /// Node features and the encoding label stored in the checkpoint.
    pub fn node_features(&self) -> Result<(NodeFeatureMatrix, &'static str)> {
        match &self.embeddings {
            Some(path) => {
                let table = EmbeddingTable::load(path)?;
                let tokens = match &self.node_tokens {
                    Some(p) => NodeTokens::load(p)?,
                    None => NodeTokens::default(),
                };
                Ok((encode_all_nodes(&table, &tokens)?, "glove"))
            }
            None if self.allow_one_hot_fallback => {
                log::warn!("no embeddings configured; using one-hot node features");
                Ok((one_hot_features(), "one_hot"))
            }
            None => Err(Error::Config("no embeddings configured and allow_one_hot_fallback is false".into())),
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn pretty(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

pub fn write_history(history: &[EpochRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "train_loss", "val_mean_auc", "val_mel_auc"])?;
    for r in history {
        w.write_record([
            r.epoch.to_string(),
            r.train_loss.to_string(),
            r.val_mean_auc.to_string(),
            r.val_mel_auc.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub checkpoint_digest: String,
    pub history: Vec<EpochRecord>,
    pub out_dir: PathBuf,
}

/// Dataset, graph, node features, training; writes the checkpoint, the
/// per-epoch history, and the graph dump into the output directory.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainOutcome> {
    cfg.validate_training()?;
    let (train_set, val_set, _) = cfg.load_splits()?;
    log::info!("training on {} cases, validating on {}", train_set.len(), val_set.len());
    let q = count_cooccurrence(train_set.labels())?;
    let graph = GraphArtifacts::build(q, &cfg.graph)?;
    let (node_features, encoding) = cfg.node_features()?;
    let ctx = GraphContext::new(graph.proximity.clone(), node_features.clone())?;
    let (trained, history) = train(&train_set, &val_set, &cfg.hyperparameters, &ctx)?;
    log::info!(
        "best epoch {} with validation mean AUC {:.4}",
        trained.best_epoch,
        trained.best_val_mean_auc
    );

    let checkpoint = Checkpoint::new(&trained, &graph, &cfg.graph, &node_features, encoding);
    let out = cfg.out_dir();
    create_dir(&out)?;
    checkpoint.save(&out.join(CHECKPOINT_FILE))?;
    write_history(&history, &out.join(HISTORY_FILE))?;
    write_file(&out.join(GRAPH_FILE), pretty(&graph.to_json()))?;
    Ok(TrainOutcome {
        checkpoint_digest: checkpoint.digest(),
        checkpoint,
        history,
        out_dir: out,
    })
}

/// Evaluates the configured checkpoint on the chosen split and writes the
/// metrics, both ROC curves, and the weight comparison.
pub fn cmd_eval(cfg: &RunConfig) -> Result<EvalReport> {
    cfg.validate_data()?;
    let model = Model::load(&cfg.checkpoint_path())?;
    let (train_set, val_set, test_set) = cfg.load_splits()?;
    let cases = match cfg.eval_split {
        EvalSplit::Train => train_set.into_cases(),
        EvalSplit::Val => val_set.into_cases(),
        EvalSplit::Test => test_set.into_cases(),
        EvalSplit::All => [train_set, val_set, test_set].into_iter().flat_map(CaseSet::into_cases).collect(),
    };
    if cases.is_empty() {
        return Err(Error::InsufficientData(format!("{:?} split is empty", cfg.eval_split)));
    }
    let preds = model.predict(&cases)?;
    let report = build_report(&preds, &cases, model.threshold(), model.weights(), cfg.binarize())?;
    write_eval_artifacts(&report, &cfg.out_dir())?;
    Ok(report)
}

pub fn write_eval_artifacts(report: &EvalReport, out: &Path) -> Result<()> {
    create_dir(out)?;
    write_file(&out.join(METRICS_FILE), pretty(&report.metrics))?;
    write_file(&out.join(WEIGHTS_FILE), pretty(&report.weights))?;
    for (name, roc) in [(ROC_LEARNED_FILE, &report.roc_learned), (ROC_TRADITIONAL_FILE, &report.roc_traditional)] {
        let path = out.join(name);
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        roc.write_csv(file)?;
    }
    Ok(())
}

/// Graph dump from the configured checkpoint, or from the training split of
/// the configured data when no checkpoint is set.
pub fn cmd_graph(cfg: &RunConfig) -> Result<serde_json::Value> {
    let json = if let Some(ck) = &cfg.checkpoint {
        Model::load(ck)?.graph.to_json()
    } else {
        cfg.validate_data()?;
        let (train_set, _, _) = cfg.load_splits()?;
        GraphArtifacts::build(count_cooccurrence(train_set.labels())?, &cfg.graph)?.to_json()
    };
    let out = cfg.out_dir();
    create_dir(&out)?;
    write_file(&out.join(GRAPH_FILE), pretty(&json))?;
    Ok(json)
}

/// Scores one attribute vector with the checkpoint weights, or with the
/// traditional weights when `traditional` is set or no checkpoint is
/// configured.
pub fn cmd_score(cfg: &RunConfig, attrs: &str, traditional: bool) -> Result<ScoreResponse> {
    let request = ScoreRequest::parse(attrs)?;
    let scorer = if traditional || cfg.checkpoint.is_none() {
        Scorer::traditional()
    } else {
        Scorer::from_model(&Model::load(&cfg.checkpoint_path())?)
    };
    scorer.score(&request)
}
