use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::metrics::{Counts, EvalReport, Granularity};
use crate::autodiff::Graph;
use crate::corpus::{Dataset, Sentence};
use crate::error::{Error, Result};
use crate::model::{forward, Model};

/// Scores at or above this value are predicted positive.
pub const THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TokenPrediction {
    pub label: bool,
    /// Unnormalized token score `â_i`.
    pub score: f64,
    /// Normalized attention weight `ã_i`.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: bool,
    pub score: f64,
    pub tokens: Vec<TokenPrediction>,
}

/// Runs the inference path on one sentence. No dropout is applied.
pub fn predict(model: &Model, sentence: &Sentence) -> Result<Prediction> {
    let input = model.encode(sentence);
    let mut g = Graph::new();
    let enc = forward(&mut g, &model.params, &input, None)?;
    let score = g.scalar(enc.output.y_hat);
    let weights = g.value(enc.output.a_tilde).data();
    let tokens = enc
        .scores
        .a_hat
        .iter()
        .zip(weights)
        .map(|(&a, &w)| {
            let s = g.scalar(a);
            TokenPrediction {
                label: s >= THRESHOLD,
                score: s,
                weight: w,
            }
        })
        .collect();
    Ok(Prediction {
        label: score >= THRESHOLD,
        score,
        tokens,
    })
}

/// Predictions for every sentence, in dataset order.
pub fn predict_all(model: &Model, dataset: &Dataset) -> Result<Vec<Prediction>> {
    dataset
        .sentences
        .par_iter()
        .map(|s| predict(model, s))
        .collect()
}

/// Sentence-level report, plus a token-level report over the sentences that
/// carry token labels (absent when none do).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub sentence: EvalReport,
    pub token: Option<EvalReport>,
}

pub fn score_predictions(predictions: &[Prediction], dataset: &Dataset) -> Result<Evaluation> {
    if predictions.len() != dataset.len() {
        return Err(Error::shape(
            "score_predictions",
            &[predictions.len()],
            &[dataset.len()],
        ));
    }
    let mut sent = Counts::default();
    let mut tok = Counts::default();
    let mut any_tokens = false;
    for (p, s) in predictions.iter().zip(dataset) {
        sent.record(p.label, s.sentence_label());
        if let Some(labels) = s.token_labels() {
            if labels.len() != p.tokens.len() {
                return Err(Error::shape(
                    "score_predictions",
                    &[p.tokens.len()],
                    &[labels.len()],
                ));
            }
            any_tokens = true;
            for (t, &gold) in p.tokens.iter().zip(labels) {
                tok.record(t.label, gold);
            }
        }
    }
    Ok(Evaluation {
        sentence: EvalReport::from_counts(Granularity::Sentence, sent),
        token: any_tokens.then(|| EvalReport::from_counts(Granularity::Token, tok)),
    })
}

pub fn evaluate(model: &Model, dataset: &Dataset) -> Result<Evaluation> {
    score_predictions(&predict_all(model, dataset)?, dataset)
}

/// Development-set measure used for model selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopMetric {
    SentenceF1,
    TokenF1,
    TokenF05,
}

impl StopMetric {
    pub fn name(self) -> &'static str {
        match self {
            StopMetric::SentenceF1 => "sentence_dev_F1",
            StopMetric::TokenF1 => "token_dev_F1",
            StopMetric::TokenF05 => "token_dev_F0.5",
        }
    }

    pub fn is_token_level(self) -> bool {
        !matches!(self, StopMetric::SentenceF1)
    }

    /// Reads the measure from an evaluation; token measures need token labels.
    pub fn value(self, eval: &Evaluation) -> Result<f64> {
        let token = || {
            eval.token
                .ok_or_else(|| Error::config(format!("{} needs token-labeled data", self.name())))
        };
        Ok(match self {
            StopMetric::SentenceF1 => eval.sentence.f1,
            StopMetric::TokenF1 => token()?.f1,
            StopMetric::TokenF05 => token()?.f05,
        })
    }
}

impl fmt::Display for StopMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StopMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sentence_dev_F1" => Ok(StopMetric::SentenceF1),
            "token_dev_F1" => Ok(StopMetric::TokenF1),
            "token_dev_F0.5" => Ok(StopMetric::TokenF05),
            other => Err(Error::config(format!(
                "unknown stop metric {other:?} (expected sentence_dev_F1, token_dev_F1 or token_dev_F0.5)"
            ))),
        }
    }
}
