//! Desk-scale synthetic cohorts with a planted attribute-to-diagnosis weighting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{AttrLabels, Case, CaseSet, SplitTag};
use crate::checklist::N_ATTRIBUTES;
use crate::util::sigmoid;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_cases: usize,
    pub feature_dim: usize,
    pub planted_weights: [f64; N_ATTRIBUTES],
    pub attr_base_rates: [f64; N_ATTRIBUTES],
    pub noise_sigma: f64,
    /// Multiplier on the centered weighted attribute mean before the sigmoid
    /// that draws the melanoma label.
    #[serde(default = "default_logit_scale")]
    pub mel_logit_scale: f64,
    pub seed: u64,
}

fn default_logit_scale() -> f64 {
    20.0
}

impl Default for SyntheticSpec {
    /// Majors (APN, BWV, IR-VS) carry the planted weight mass.
    fn default() -> Self {
        SyntheticSpec {
            n_cases: 5000,
            feature_dim: 16,
            planted_weights: [4.0, 1.0, 0.6, 1.2, 0.5, 3.0, 2.0],
            attr_base_rates: [0.35, 0.25, 0.35, 0.3, 0.35, 0.25, 0.2],
            noise_sigma: 0.25,
            mel_logit_scale: default_logit_scale(),
            seed: 7,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_cases == 0 || self.feature_dim == 0 {
            return Err(Error::Config("synthetic n_cases and feature_dim must be positive".into()));
        }
        if self.planted_weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::Config("planted weights must be positive".into()));
        }
        if self.attr_base_rates.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
            return Err(Error::Config("attribute base rates must lie in (0, 1)".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config("noise_sigma must be nonnegative".into()));
        }
        if !self.mel_logit_scale.is_finite() {
            return Err(Error::Config("mel_logit_scale must be finite".into()));
        }
        Ok(())
    }
}

/// Per-attribute feature signatures: orthonormal when `dim >= 7`, otherwise
/// independent unit vectors.
pub fn signature_directions(dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5167_7e5d);
    let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(N_ATTRIBUTES);
    while dirs.len() < N_ATTRIBUTES {
        let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        if dim >= N_ATTRIBUTES {
            for u in &dirs {
                let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        dirs.push(v);
    }
    dirs
}

/// Draw a synthetic cohort. The output depends only on `spec`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<CaseSet> {
    spec.validate()?;
    let d = spec.feature_dim;
    let dirs = signature_directions(d, spec.seed);
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;
    let weight_sum: f64 = spec.planted_weights.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut cases = Vec::with_capacity(spec.n_cases);
    for i in 0..spec.n_cases {
        let mut labels: AttrLabels = [0; N_ATTRIBUTES];
        for (l, &rate) in labels.iter_mut().zip(&spec.attr_base_rates) {
            *l = (rng.random::<f64>() < rate) as u8;
        }
        let centered: f64 = labels
            .iter()
            .zip(spec.planted_weights.iter().zip(&spec.attr_base_rates))
            .map(|(&l, (&w, &r))| w * (l as f64 - r))
            .sum::<f64>()
            / weight_sum;
        let mel = (rng.random::<f64>() < sigmoid(spec.mel_logit_scale * centered)) as u8;

        let mut signal = vec![0.0; d];
        for (j, dir) in dirs.iter().enumerate() {
            if labels[j] == 1 {
                signal.iter_mut().zip(dir).for_each(|(s, v)| *s += v);
            }
        }
        let mut draw = |base: &[f64]| -> Vec<f64> {
            base.iter()
                .map(|&s| if spec.noise_sigma > 0.0 { s + noise.sample(&mut rng) } else { s })
                .collect()
        };
        let derm = draw(&signal);
        let clin = draw(&signal);
        cases.push(Case {
            id: format!("S{i:05}"),
            attr_labels: labels,
            mel_label: mel,
            derm_features: derm,
            clin_features: clin,
        });
    }
    CaseSet::new(cases, SplitTag::Unsplit)
}
