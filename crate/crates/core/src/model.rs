//! Interfaces to the four kinds of remote model, and their result types.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::text::MASK;
use crate::types::LabelId;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("transport error from {endpoint}: {message}")]
    Transport { endpoint: String, message: String },
    #[error("model error from {endpoint}: {message}")]
    Model { endpoint: String, message: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
}

impl ModelError {
    pub fn model(endpoint: &str, message: impl Into<String>) -> Self {
        ModelError::Model {
            endpoint: endpoint.into(),
            message: message.into(),
        }
    }

    pub fn transport(endpoint: &str, message: impl Into<String>) -> Self {
        ModelError::Transport {
            endpoint: endpoint.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyResult {
    pub predicted_label: LabelId,
    pub probabilities: Vec<f64>,
}

impl ClassifyResult {
    /// Validates a probability vector and takes its argmax (lowest index on ties).
    pub fn from_probabilities(probabilities: Vec<f64>) -> Result<Self, ModelError> {
        if probabilities.len() < 2 {
            return Err(ModelError::Config(format!(
                "classifier returned {} label scores, need at least 2",
                probabilities.len()
            )));
        }
        if probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(ModelError::Contract("probabilities must be finite and non-negative".into()));
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(ModelError::Contract(format!("probabilities sum to {sum}, not 1")));
        }
        let predicted_label = argmax(&probabilities) as LabelId;
        Ok(ClassifyResult {
            predicted_label,
            probabilities,
        })
    }

    /// Softmax over raw scores.
    pub fn from_logits(logits: &[f64]) -> Result<Self, ModelError> {
        if logits.iter().any(|l| !l.is_finite()) {
            return Err(ModelError::Contract("non-finite logit".into()));
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| libm::exp(l - max)).collect();
        let total: f64 = exps.iter().sum();
        Self::from_probabilities(exps.into_iter().map(|e| e / total).collect())
    }

    /// Probability assigned to `label`, 0 when out of range.
    pub fn prob(&self, label: LabelId) -> f64 {
        self.probabilities.get(label as usize).copied().unwrap_or(0.0)
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillCandidate {
    pub token: String,
    pub log_prob: f64,
}

/// Fill candidates for a single mask, best first.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FillResult {
    pub candidates: Vec<FillCandidate>,
}

impl FillResult {
    pub fn validate(&self) -> Result<(), ModelError> {
        for pair in self.candidates.windows(2) {
            if pair[0].log_prob < pair[1].log_prob {
                return Err(ModelError::Contract("fill candidates not sorted by log_prob".into()));
            }
        }
        if self.candidates.iter().any(|c| !(c.log_prob <= 0.0)) {
            return Err(ModelError::Contract("fill log_prob must be non-positive".into()));
        }
        Ok(())
    }

    pub fn log_prob_of(&self, token: &str) -> Option<f64> {
        self.candidates
            .iter()
            .find(|c| c.token == token)
            .map(|c| c.log_prob)
    }
}

pub fn count_masks(text: &str) -> usize {
    text.matches(MASK).count()
}

pub fn require_single_mask(text: &str) -> Result<(), ModelError> {
    match count_masks(text) {
        1 => Ok(()),
        n => Err(ModelError::Contract(format!(
            "fill-mask input must contain exactly one {MASK}, found {n}"
        ))),
    }
}

/// Number of candidates requested when a filler has no direct token scoring.
pub const SCORE_TOP_K: usize = 1000;

pub trait Classifier: Send + Sync {
    fn id(&self) -> &str;
    /// `texts` holds one string for single-text tasks and two for pair tasks.
    fn classify(&self, texts: &[String]) -> Result<ClassifyResult, ModelError>;
}

pub trait MaskFiller: Send + Sync {
    fn id(&self) -> &str;
    fn fill_mask(&self, text_with_mask: &str, top_k: usize) -> Result<FillResult, ModelError>;

    /// Log-probabilities of specific tokens at the mask; `None` when a token is
    /// outside the scorer's vocabulary.
    fn score_tokens(
        &self,
        text_with_mask: &str,
        tokens: &[&str],
    ) -> Result<Vec<Option<f64>>, ModelError> {
        let fill = self.fill_mask(text_with_mask, SCORE_TOP_K)?;
        Ok(tokens.iter().map(|t| fill.log_prob_of(t)).collect())
    }
}

pub trait Embedder: Send + Sync {
    fn id(&self) -> &str;
    fn embed(&self, text: &str) -> Result<Vec<f64>, ModelError>;
}

pub trait ChatModel: Send + Sync {
    fn id(&self) -> &str;
    fn chat(&self, system_prompt: &str, user_prompt: &str) -> Result<String, ModelError>;
}

/// Cosine similarity; 0 when either vector is zero or lengths differ.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() || a.is_empty() {
        return 0.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = libm::sqrt(a.iter().map(|x| x * x).sum::<f64>());
    let nb = libm::sqrt(b.iter().map(|x| x * x).sum::<f64>());
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na * nb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn argmax_matches_prediction() {
        let r = ClassifyResult::from_probabilities(vec![0.3, 0.7]).unwrap();
        assert_eq!(r.predicted_label, 1);
        let r = ClassifyResult::from_probabilities(vec![0.5, 0.5]).unwrap();
        assert_eq!(r.predicted_label, 0);
        assert!(ClassifyResult::from_probabilities(vec![0.3, 0.3]).is_err());
        assert!(ClassifyResult::from_probabilities(vec![1.0]).is_err());
        let r = ClassifyResult::from_logits(&[2.0, -1.0]).unwrap();
        assert_eq!(r.predicted_label, 0);
        assert!((r.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_basics() {
        let v = vec![0.2, -1.5, 3.0];
        assert!((cosine(&v, &v) - 1.0).abs() < 1e-12);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]), 0.0);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 1.0]), 0.0);
    }

    #[test]
    fn mask_counting() {
        assert!(require_single_mask("I [MASK] this.").is_ok());
        assert!(require_single_mask("I hate this.").is_err());
        assert!(require_single_mask("[MASK] [MASK]").is_err());
    }

    #[test]
    fn fill_result_validation() {
        let ok = FillResult {
            candidates: vec![
                FillCandidate { token: "a".into(), log_prob: -0.1 },
                FillCandidate { token: "b".into(), log_prob: -2.0 },
            ],
        };
        assert!(ok.validate().is_ok());
        let mut bad = ok.clone();
        bad.candidates.reverse();
        assert!(bad.validate().is_err());
        assert_eq!(ok.log_prob_of("b"), Some(-2.0));
    }
}
