//! Single-case scoring shared by the CLI and the HTTP service.

use serde::{Deserialize, Serialize};

use crate::checklist::{N_ATTRIBUTES, REFERRAL_SCORE, TRADITIONAL_WEIGHTS};
use crate::checkpoint::Model;
use crate::eval::{binarize, traditional_score, DEFAULT_BINARIZE_THRESHOLD, TRADITIONAL_EQUIVALENT_THRESHOLD};
use crate::model::melanoma_from_weights;
use crate::{Error, Result};

/// Observed findings in canonical order, each 0/1 or a probability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub attrs: Vec<f64>,
}

impl ScoreRequest {
    pub fn validate(&self) -> Result<[f64; N_ATTRIBUTES]> {
        if self.attrs.len() != N_ATTRIBUTES {
            return Err(Error::Usage(format!(
                "attrs: expected {N_ATTRIBUTES} values, got {}",
                self.attrs.len()
            )));
        }
        if let Some(i) = self.attrs.iter().position(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::Usage(format!("attrs[{i}]: value must lie in [0, 1]")));
        }
        Ok(std::array::from_fn(|j| self.attrs[j]))
    }

    /// Accepts a digit string such as `0000010` or a comma-separated list.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let attrs = if text.contains(',') {
            text.split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Usage(format!("attrs: `{}` is not a number", t.trim())))
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            text.chars()
                .map(|c| match c {
                    '0' => Ok(0.0),
                    '1' => Ok(1.0),
                    _ => Err(Error::Usage(format!("attrs: unexpected character `{c}`"))),
                })
                .collect::<Result<Vec<_>>>()?
        };
        let req = ScoreRequest { attrs };
        req.validate()?;
        Ok(req)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub traditional_score: u32,
    pub traditional_referral: bool,
    pub weighted_average: f64,
    pub melanoma_probability: f64,
    pub referral: bool,
    pub weights_used: [f64; N_ATTRIBUTES],
    pub threshold_used: f64,
}

/// Attribute weights and referral cut used to score requests.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scorer {
    pub weights: [f64; N_ATTRIBUTES],
    pub threshold: f64,
}

impl Scorer {
    /// Traditional 2/1 weights with the cut matching a score of 3.
    pub fn traditional() -> Self {
        Scorer {
            weights: TRADITIONAL_WEIGHTS,
            threshold: TRADITIONAL_EQUIVALENT_THRESHOLD,
        }
    }

    pub fn from_model(model: &Model) -> Self {
        Scorer {
            weights: model.weights(),
            threshold: model.threshold(),
        }
    }

    pub fn score(&self, request: &ScoreRequest) -> Result<ScoreResponse> {
        let attrs = request.validate()?;
        let points = traditional_score(&binarize(&attrs, DEFAULT_BINARIZE_THRESHOLD));
        let (avg, prob) = melanoma_from_weights(&attrs, &self.weights);
        Ok(ScoreResponse {
            traditional_score: points,
            traditional_referral: points >= REFERRAL_SCORE,
            weighted_average: avg,
            melanoma_probability: prob,
            referral: prob >= self.threshold,
            weights_used: self.weights,
            threshold_used: self.threshold,
        })
    }
}
