use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::TrainConfig;
use super::dropout::{derive_seed, sentence_dropout_masks};
use super::init::init_params;
use super::optimizer::{adadelta_step, OptimizerState};
use crate::autodiff::{Gradients, Graph};
use crate::corpus::{build_vocabs, Dataset, Sentence};
use crate::error::{Error, Result};
use crate::eval::{evaluate, StopMetric};
use crate::model::{EncodedInput, LayerSizes, Model};
use crate::objectives::{sentence_objective, LossComponents};

/// Averages over the training sentences of one epoch, plus the dev measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub components: LossComponents,
    pub total: f64,
    pub dev_metric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct History {
    pub metric: StopMetric,
    pub records: Vec<EpochRecord>,
}

impl History {
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "epoch,loss_sent,loss_tok,loss_lm,loss_char,loss_attn,loss_total,{}\n",
            self.metric
        );
        for r in &self.records {
            let c = &r.components;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.epoch, c.sent, c.tok, c.lm, c.char, c.attn, r.total, r.dev_metric
            );
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Patience-based stopping on a dev measure where larger is better.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<(usize, f64)>,
    stale: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Improved,
    Continue,
    Stop,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: None,
            stale: 0,
        }
    }

    /// Records an epoch's measure. Only strict improvements reset patience.
    pub fn observe(&mut self, epoch: usize, metric: f64) -> Verdict {
        match self.best {
            Some((_, b)) if metric <= b => {
                self.stale += 1;
                if self.stale >= self.patience {
                    Verdict::Stop
                } else {
                    Verdict::Continue
                }
            }
            _ => {
                self.best = Some((epoch, metric));
                self.stale = 0;
                Verdict::Improved
            }
        }
    }

    pub fn best(&self) -> Option<(usize, f64)> {
        self.best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Parameters from the best dev epoch.
    pub model: Model,
    pub history: History,
    pub best_epoch: usize,
    pub best_metric: f64,
}

/// Vocabularies from the training data and freshly initialized parameters.
pub fn initial_model(config: &TrainConfig, train: &Dataset) -> Result<Model> {
    config.validate()?;
    let (words, chars) = build_vocabs(train, config.min_count)?;
    let sizes = LayerSizes {
        word_vocab: words.len(),
        char_vocab: chars.len(),
        ..config.sizes
    };
    let params = init_params(sizes, config.arch, config.seed)?;
    Model::new(params, words, chars)
}

fn as_divergence(e: Error) -> Error {
    match e {
        Error::NumericOverflow { op } => Error::Divergence(format!("non-finite value in {op}")),
        other => other,
    }
}

/// Mean gradient and summed loss components over one batch. Sentences are
/// processed in parallel and reduced in batch order, so the result does not
/// depend on thread scheduling.
pub fn batch_gradients(
    model: &Model,
    config: &TrainConfig,
    batch: &[(usize, &Sentence, &EncodedInput)],
    epoch: usize,
) -> Result<(Gradients, LossComponents)> {
    let sizes = model.params.sizes;
    let per_sentence: Vec<(Gradients, LossComponents)> = batch
        .par_iter()
        .map(|&(idx, sentence, input)| -> Result<_> {
            let masks = if config.dropout > 0.0 {
                let seed = derive_seed(config.seed, &[epoch as u64, idx as u64]);
                Some(sentence_dropout_masks(
                    input.len(),
                    sizes.word_emb,
                    sizes.hidden,
                    config.dropout,
                    seed,
                )?)
            } else {
                None
            };
            let mut g = Graph::new();
            let obj = sentence_objective(
                &mut g,
                &model.params,
                input,
                sentence,
                &config.weights,
                masks.as_ref(),
            )?;
            let grads = g.param_gradients(obj.total, &model.params.store)?;
            Ok((grads, obj.components))
        })
        .collect::<Result<_>>()
        .map_err(as_divergence)?;
    let mut grads = Gradients::for_store(&model.params.store);
    let mut components = LossComponents::default();
    for (g, c) in &per_sentence {
        grads.accumulate(g);
        components.add(c);
    }
    grads.scale(1.0 / batch.len() as f64);
    Ok((grads, components))
}

pub fn train(
    config: &TrainConfig,
    train: &Dataset,
    dev: &Dataset,
    initial: Option<Model>,
) -> Result<TrainOutcome> {
    train_with_progress(config, train, dev, initial, &mut |_| {})
}

/// Trains with mini-batch AdaDelta and early stopping on the dev measure,
/// calling `progress` after every epoch.
pub fn train_with_progress(
    config: &TrainConfig,
    train: &Dataset,
    dev: &Dataset,
    initial: Option<Model>,
    progress: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() || dev.is_empty() {
        return Err(Error::config(
            "training and development sets must be non-empty",
        ));
    }
    if config.stop_metric.is_token_level() && !dev.all_token_labeled() {
        return Err(Error::config(format!(
            "{} needs token labels on every development sentence",
            config.stop_metric
        )));
    }
    let mut model = match initial {
        Some(m) => m,
        None => initial_model(config, train)?,
    };
    if model.params.arch != config.arch {
        return Err(Error::config(
            "initial model architecture differs from the configuration",
        ));
    }
    if config.weights.lm > 0.0 && model.params.word_lm.is_none()
        || config.weights.char > 0.0 && model.params.char_lm.is_none()
    {
        return Err(Error::config(
            "LM objectives are enabled but the model has no LM heads",
        ));
    }

    let inputs: Vec<EncodedInput> = train.iter().map(|s| model.encode(s)).collect();
    let mut state = OptimizerState::new(&model.params.store, config.optimizer);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best_params = model.params.clone();
    let mut records = Vec::new();
    let n = train.len() as f64;

    for epoch in 1..=config.max_epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(
            config.seed,
            &[epoch as u64],
        )));
        let mut sums = LossComponents::default();
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<_> = chunk
                .iter()
                .map(|&i| (i, &train.sentences[i], &inputs[i]))
                .collect();
            let (mut grads, comps) = batch_gradients(&model, config, &batch, epoch)?;
            if let Some(max) = config.clip_norm {
                grads.clip_global_norm(max);
            }
            adadelta_step(&mut model.params.store, &grads, &mut state)?;
            sums.add(&comps);
        }
        let components = sums.scaled(1.0 / n);
        let total = crate::objectives::total_loss(&components, &config.weights)?;
        if !total.is_finite() {
            return Err(Error::Divergence(format!(
                "loss became {total} in epoch {epoch}"
            )));
        }
        let dev_metric = config
            .stop_metric
            .value(&evaluate(&model, dev).map_err(as_divergence)?)?;
        let record = EpochRecord {
            epoch,
            components,
            total,
            dev_metric,
        };
        records.push(record);
        progress(&record);
        match stopper.observe(epoch, dev_metric) {
            Verdict::Improved => best_params = model.params.clone(),
            Verdict::Continue => {}
            Verdict::Stop => break,
        }
    }
    let (best_epoch, best_metric) = stopper.best().expect("at least one epoch ran");
    model.params = best_params;
    Ok(TrainOutcome {
        model,
        history: History {
            metric: config.stop_metric,
            records,
        },
        best_epoch,
        best_metric,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stops_after_patience_non_improving_epochs() {
        let mut s = EarlyStopping::new(1);
        assert_eq!(s.observe(1, 0.9), Verdict::Improved);
        assert_eq!(s.observe(2, 0.8), Verdict::Stop);
        assert_eq!(s.best(), Some((1, 0.9)));

        let mut s = EarlyStopping::new(3);
        s.observe(1, 0.5);
        assert_eq!(s.observe(2, 0.5), Verdict::Continue);
        assert_eq!(s.observe(3, 0.6), Verdict::Improved);
        assert_eq!(s.observe(4, 0.1), Verdict::Continue);
        assert_eq!(s.observe(5, 0.1), Verdict::Continue);
        assert_eq!(s.observe(6, 0.1), Verdict::Stop);
        assert_eq!(s.best(), Some((3, 0.6)));
    }

    #[test]
    fn history_csv_layout() {
        let h = History {
            metric: StopMetric::TokenF1,
            records: vec![EpochRecord {
                epoch: 1,
                components: LossComponents {
                    sent: 0.25,
                    ..Default::default()
                },
                total: 0.25,
                dev_metric: 0.5,
            }],
        };
        assert_eq!(
            h.to_csv(),
            "epoch,loss_sent,loss_tok,loss_lm,loss_char,loss_attn,loss_total,token_dev_F1\n1,0.25,0,0,0,0,0.25,0.5\n"
        );
    }
}
