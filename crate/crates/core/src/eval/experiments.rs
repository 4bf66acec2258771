use std::fmt::Write as _;

use rayon::prelude::*;

use super::predict::{evaluate, StopMetric};
use crate::corpus::{mask_token_annotation, Splits};
use crate::error::{Error, Result};
use crate::model::Architecture;
use crate::objectives::LossWeights;
use crate::trainer::{train, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub fraction: f64,
    pub seed: u64,
    pub metric_name: String,
    pub value: f64,
}

/// Trains one model per (fraction, seed) pair with token labels kept on a
/// nested seeded subset of the training sentences, and reports the test
/// token measure. Model selection uses the matching dev token measure.
pub fn run_fraction_sweep(
    config: &TrainConfig,
    splits: &Splits,
    fractions: &[f64],
    seeds: &[u64],
) -> Result<Vec<SweepRow>> {
    if fractions.is_empty() || seeds.is_empty() {
        return Err(Error::config(
            "sweep needs at least one fraction and one seed",
        ));
    }
    if let Some(f) = fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(Error::config(format!(
            "annotation fraction {f} outside [0, 1]"
        )));
    }
    if !splits.test.all_token_labeled() {
        return Err(Error::config("sweep needs a fully token-labeled test set"));
    }
    let metric = match config.stop_metric {
        StopMetric::SentenceF1 => StopMetric::TokenF1,
        m => m,
    };
    let metric_name = match metric {
        StopMetric::TokenF05 => "token_test_F0.5",
        _ => "token_test_F1",
    };
    let runs: Vec<(f64, u64)> = fractions
        .iter()
        .flat_map(|&f| seeds.iter().map(move |&s| (f, s)))
        .collect();
    runs.par_iter()
        .map(|&(fraction, seed)| {
            let masked = mask_token_annotation(&splits.train, fraction, seed)?;
            let cfg = TrainConfig {
                seed,
                stop_metric: metric,
                ..config.clone()
            };
            let outcome = train(&cfg, &masked, &splits.dev, None)?;
            let value = metric.value(&evaluate(&outcome.model, &splits.test)?)?;
            Ok(SweepRow {
                fraction,
                seed,
                metric_name: metric_name.to_string(),
                value,
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("fraction,seed,metric_name,value\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.fraction, r.seed, r.metric_name, r.value
        );
    }
    out
}

/// Model variants compared in the ablation table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Last,
    Attn,
    AttnToken,
    AttnLmWord,
    AttnLmChar,
    AttnAttnCost,
    Joint,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::Last,
        Variant::Attn,
        Variant::AttnToken,
        Variant::AttnLmWord,
        Variant::AttnLmChar,
        Variant::AttnAttnCost,
        Variant::Joint,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Last => "LAST",
            Variant::Attn => "ATTN",
            Variant::AttnToken => "ATTN+token",
            Variant::AttnLmWord => "ATTN+LMword",
            Variant::AttnLmChar => "ATTN+LMchar",
            Variant::AttnAttnCost => "ATTN+attncost",
            Variant::Joint => "JOINT",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::config(format!("unknown ablation variant {s:?}")))
    }

    pub fn arch(self) -> Architecture {
        match self {
            Variant::Last => Architecture::LastState,
            _ => Architecture::Attention,
        }
    }

    /// Sentence loss plus the named objective at its joint weight.
    pub fn weights(self) -> LossWeights {
        let joint = LossWeights::joint();
        let base = LossWeights::baseline();
        match self {
            Variant::Last | Variant::Attn => base,
            Variant::AttnToken => LossWeights {
                tok: joint.tok,
                ..base
            },
            Variant::AttnLmWord => LossWeights {
                lm: joint.lm,
                ..base
            },
            Variant::AttnLmChar => LossWeights {
                char: joint.char,
                ..base
            },
            Variant::AttnAttnCost => LossWeights {
                attn: joint.attn,
                ..base
            },
            Variant::Joint => joint,
        }
    }
}

/// Sentence-level results of one variant, averaged over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub variant: Variant,
    pub dev_f1: f64,
    pub acc: f64,
    pub p: f64,
    pub r: f64,
    pub f1: f64,
    pub f05: f64,
}

/// Trains every variant under every seed and reports dev-selected test
/// sentence metrics, averaged over the seeds.
pub fn run_ablation(
    config: &TrainConfig,
    splits: &Splits,
    variants: &[Variant],
    seeds: &[u64],
) -> Result<Vec<AblationRow>> {
    if variants.is_empty() {
        return Err(Error::config("ablation needs at least one variant"));
    }
    if seeds.is_empty() {
        return Err(Error::config("ablation needs at least one seed"));
    }
    let runs: Vec<(Variant, u64)> = variants
        .iter()
        .flat_map(|&v| seeds.iter().map(move |&s| (v, s)))
        .collect();
    let results: Vec<[f64; 6]> = runs
        .par_iter()
        .map(|&(variant, seed)| {
            let cfg = TrainConfig {
                weights: variant.weights(),
                arch: variant.arch(),
                seed,
                ..config.clone()
            };
            let outcome = train(&cfg, &splits.train, &splits.dev, None)?;
            let dev = evaluate(&outcome.model, &splits.dev)?.sentence;
            let test = evaluate(&outcome.model, &splits.test)?.sentence;
            Ok([
                dev.f1,
                test.accuracy,
                test.precision,
                test.recall,
                test.f1,
                test.f05,
            ])
        })
        .collect::<Result<_>>()?;
    let k = seeds.len() as f64;
    Ok(variants
        .iter()
        .zip(results.chunks(seeds.len()))
        .map(|(&variant, per_seed)| {
            let mean = |i: usize| per_seed.iter().map(|r| r[i]).sum::<f64>() / k;
            AblationRow {
                variant,
                dev_f1: mean(0),
                acc: mean(1),
                p: mean(2),
                r: mean(3),
                f1: mean(4),
                f05: mean(5),
            }
        })
        .collect())
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from("variant,dev_f1,acc,p,r,f1,f05\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.variant.name(),
            r.dev_f1,
            r.acc,
            r.p,
            r.r,
            r.f1,
            r.f05
        );
    }
    out
}
