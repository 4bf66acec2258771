use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    Sentence,
    Token,
}

impl Granularity {
    pub fn name(self) -> &'static str {
        match self {
            Granularity::Sentence => "sentence",
            Granularity::Token => "token",
        }
    }
}

/// Confusion counts with label 1 as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Counts {
    pub fn from_pairs(predicted: &[bool], gold: &[bool]) -> Result<Self> {
        if predicted.len() != gold.len() {
            return Err(Error::shape(
                "compute_metrics",
                &[predicted.len()],
                &[gold.len()],
            ));
        }
        let mut c = Counts::default();
        for (&p, &g) in predicted.iter().zip(gold) {
            c.record(p, g);
        }
        Ok(c)
    }

    pub fn record(&mut self, predicted: bool, gold: bool) {
        match (predicted, gold) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// `(1 + β²) P R / (β² P + R)`, defined as 0 when both are 0.
pub fn f_beta(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let den = b2 * precision + recall;
    if den == 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / den
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub granularity: Granularity,
    pub counts: Counts,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub f05: f64,
}

impl EvalReport {
    pub fn from_counts(granularity: Granularity, counts: Counts) -> Self {
        let precision = ratio(counts.tp, counts.tp + counts.fp);
        let recall = ratio(counts.tp, counts.tp + counts.fn_);
        EvalReport {
            granularity,
            counts,
            accuracy: ratio(counts.tp + counts.tn, counts.total()),
            precision,
            recall,
            f1: f_beta(precision, recall, 1.0),
            f05: f_beta(precision, recall, 0.5),
        }
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.counts;
        write!(
            f,
            "{:<8} acc={:.4} p={:.4} r={:.4} f1={:.4} f05={:.4} (tp={} fp={} fn={} tn={})",
            self.granularity.name(),
            self.accuracy,
            self.precision,
            self.recall,
            self.f1,
            self.f05,
            c.tp,
            c.fp,
            c.fn_,
            c.tn
        )
    }
}

/// Counts and rates for aligned prediction and gold label sequences.
pub fn compute_metrics(
    predicted: &[bool],
    gold: &[bool],
    granularity: Granularity,
) -> Result<EvalReport> {
    Ok(EvalReport::from_counts(
        granularity,
        Counts::from_pairs(predicted, gold)?,
    ))
}
