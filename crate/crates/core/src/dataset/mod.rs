//! Cases, case sets, and deterministic splits.

mod io;
mod synthetic;

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checklist::N_ATTRIBUTES;
use crate::{Error, Result};

pub use io::{
    load_features, load_features_from_reader, parse_metadata, parse_metadata_from_reader,
    write_features, write_metadata, LabelMapping, METADATA_HEADER,
};
pub use synthetic::{generate_synthetic, signature_directions, SyntheticSpec};

pub type AttrLabels = [u8; N_ATTRIBUTES];

/// One lesion: attribute labels, diagnosis, and the two modality feature vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Case {
    pub id: String,
    pub attr_labels: AttrLabels,
    pub mel_label: u8,
    /// Dermoscopic features; empty until populated.
    pub derm_features: Vec<f64>,
    /// Clinical features; empty until populated.
    pub clin_features: Vec<f64>,
}

impl Case {
    pub fn new(id: impl Into<String>, attr_labels: AttrLabels, mel_label: u8) -> Self {
        Case {
            id: id.into(),
            attr_labels,
            mel_label,
            derm_features: Vec::new(),
            clin_features: Vec::new(),
        }
    }

    pub fn has_features(&self) -> bool {
        !self.derm_features.is_empty() && self.derm_features.len() == self.clin_features.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Val,
    Test,
    Unsplit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseSet {
    cases: Vec<Case>,
    feature_dim: Option<usize>,
    split_tag: SplitTag,
}

impl CaseSet {
    /// Validates unique ids, binary labels, and a shared feature dimension.
    /// Cases either all carry features or none do.
    pub fn new(cases: Vec<Case>, split_tag: SplitTag) -> Result<Self> {
        let mut seen = HashSet::with_capacity(cases.len());
        let mut feature_dim = None;
        for (i, c) in cases.iter().enumerate() {
            if !seen.insert(c.id.as_str()) {
                return Err(Error::DuplicateCase(c.id.clone()));
            }
            if c.mel_label > 1 || c.attr_labels.iter().any(|&l| l > 1) {
                return Err(Error::Config(format!("case `{}` has non-binary labels", c.id)));
            }
            let d = c.derm_features.len();
            if d != c.clin_features.len() {
                return Err(Error::Dimension(format!(
                    "case `{}`: derm length {} != clin length {}",
                    c.id,
                    d,
                    c.clin_features.len()
                )));
            }
            let this = (d > 0).then_some(d);
            if i == 0 {
                feature_dim = this;
            } else if this != feature_dim {
                return Err(Error::Dimension(format!(
                    "case `{}` has feature length {} but expected {}",
                    c.id,
                    d,
                    feature_dim.unwrap_or(0)
                )));
            }
        }
        Ok(CaseSet {
            cases,
            feature_dim,
            split_tag,
        })
    }

    pub fn empty(split_tag: SplitTag) -> Self {
        CaseSet {
            cases: Vec::new(),
            feature_dim: None,
            split_tag,
        }
    }

    pub fn cases(&self) -> &[Case] {
        &self.cases
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn feature_dim(&self) -> Option<usize> {
        self.feature_dim
    }

    pub fn split_tag(&self) -> SplitTag {
        self.split_tag
    }

    pub fn into_cases(self) -> Vec<Case> {
        self.cases
    }

    pub fn labels(&self) -> impl Iterator<Item = (AttrLabels, u8)> + '_ {
        self.cases.iter().map(|c| (c.attr_labels, c.mel_label))
    }
}

/// Partition `caseset` into train/validation/test.
///
/// Counts are `floor(f_train * n)` and `floor(f_val * n)` with the remainder
/// going to test. Membership is drawn from a seeded permutation; within each
/// split, cases keep their original relative order.
pub fn split(caseset: &CaseSet, fractions: [f64; 3], seed: u64) -> Result<(CaseSet, CaseSet, CaseSet)> {
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
        return Err(Error::Config(format!("split fractions must be in [0, 1]: {fractions:?}")));
    }
    let sum: f64 = fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split fractions sum to {sum}, expected 1")));
    }
    let n = caseset.len();
    // The small epsilon absorbs representation error in fractions like 413/1011.
    let n_train = ((fractions[0] * n as f64) + 1e-9).floor() as usize;
    let n_val = (((fractions[1] * n as f64) + 1e-9).floor() as usize).min(n - n_train);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignment = vec![SplitTag::Test; n];
    for &i in &order[..n_train] {
        assignment[i] = SplitTag::Train;
    }
    for &i in &order[n_train..n_train + n_val] {
        assignment[i] = SplitTag::Val;
    }

    let mut parts = [Vec::new(), Vec::new(), Vec::new()];
    for (case, tag) in caseset.cases.iter().zip(&assignment) {
        let slot = match tag {
            SplitTag::Train => 0,
            SplitTag::Val => 1,
            _ => 2,
        };
        parts[slot].push(case.clone());
    }
    let [train, val, test] = parts;
    let make = |cases, tag| CaseSet {
        cases,
        feature_dim: caseset.feature_dim,
        split_tag: tag,
    };
    Ok((
        make(train, SplitTag::Train),
        make(val, SplitTag::Val),
        make(test, SplitTag::Test),
    ))
}
