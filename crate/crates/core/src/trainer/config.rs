use crate::error::{Error, Result};
use crate::eval::StopMetric;
use crate::model::{Architecture, LayerSizes};
use crate::objectives::LossWeights;

use super::optimizer::AdaDelta;

/// Everything that determines a training run besides the data.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub weights: LossWeights,
    pub arch: Architecture,
    /// Layer sizes; the vocabulary fields are filled in from the training data.
    pub sizes: LayerSizes,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub stop_metric: StopMetric,
    pub dropout: f64,
    pub seed: u64,
    /// Global gradient-norm ceiling; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub optimizer: AdaDelta,
    /// Minimum training-set frequency for a word to enter the vocabulary.
    pub min_count: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            weights: LossWeights::joint(),
            arch: Architecture::Attention,
            sizes: LayerSizes::standard(0, 0),
            batch_size: 32,
            max_epochs: 100,
            patience: 7,
            stop_metric: StopMetric::SentenceF1,
            dropout: 0.5,
            seed: 1,
            clip_norm: Some(5.0),
            optimizer: AdaDelta::default(),
            min_count: 1,
        }
    }
}

/// Keys accepted by [`TrainConfig::set`], in the order [`TrainConfig::entries`]
/// reports them.
pub const TRAIN_KEYS: &[&str] = &[
    "preset",
    "weight_sent",
    "weight_tok",
    "weight_lm",
    "weight_char",
    "weight_attn",
    "arch",
    "sizes",
    "word_emb",
    "char_emb",
    "char_hidden",
    "char_proj",
    "word_hidden",
    "hidden",
    "attn_hidden",
    "sent_hidden",
    "lm_hidden",
    "char_lm_hidden",
    "batch_size",
    "max_epochs",
    "patience",
    "stop_metric",
    "dropout",
    "seed",
    "clip_norm",
    "adadelta_rho",
    "adadelta_eps",
    "learning_rate",
    "min_count",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(format!("invalid value {value:?} for {key}")))
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        let dims = LayerSizes {
            word_vocab: 1,
            char_vocab: 1,
            ..self.sizes
        };
        dims.validate()?;
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if self.max_epochs == 0 {
            return Err(Error::config("max_epochs must be at least 1"));
        }
        if self.patience == 0 {
            return Err(Error::config("patience must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::config("clip_norm must be positive"));
            }
        }
        if self.min_count == 0 {
            return Err(Error::config("min_count must be at least 1"));
        }
        self.optimizer.validate()
    }

    /// Applies one `key = value` setting. `preset` and `sizes` replace a whole
    /// group, so they should be applied before the individual keys they cover.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let s = &mut self.sizes;
        match key {
            "preset" => {
                self.weights = match value {
                    "baseline" => LossWeights::baseline(),
                    "joint" => LossWeights::joint(),
                    other => return Err(Error::config(format!("unknown preset {other:?}"))),
                }
            }
            "weight_sent" => self.weights.sent = parse(key, value)?,
            "weight_tok" => self.weights.tok = parse(key, value)?,
            "weight_lm" => self.weights.lm = parse(key, value)?,
            "weight_char" => self.weights.char = parse(key, value)?,
            "weight_attn" => self.weights.attn = parse(key, value)?,
            "arch" => self.arch = Architecture::parse(value)?,
            "sizes" => {
                *s = match value {
                    "standard" => LayerSizes::standard(0, 0),
                    "desk" => LayerSizes::desk(0, 0),
                    other => return Err(Error::config(format!("unknown size preset {other:?}"))),
                }
            }
            "word_emb" => s.word_emb = parse(key, value)?,
            "char_emb" => s.char_emb = parse(key, value)?,
            "char_hidden" => s.char_hidden = parse(key, value)?,
            "char_proj" => s.char_proj = parse(key, value)?,
            "word_hidden" => s.word_hidden = parse(key, value)?,
            "hidden" => s.hidden = parse(key, value)?,
            "attn_hidden" => s.attn_hidden = parse(key, value)?,
            "sent_hidden" => s.sent_hidden = parse(key, value)?,
            "lm_hidden" => s.lm_hidden = parse(key, value)?,
            "char_lm_hidden" => s.char_lm_hidden = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "max_epochs" => self.max_epochs = parse(key, value)?,
            "patience" => self.patience = parse(key, value)?,
            "stop_metric" => self.stop_metric = value.parse()?,
            "dropout" => self.dropout = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "clip_norm" => {
                self.clip_norm = match value {
                    "none" | "off" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "adadelta_rho" => self.optimizer.rho = parse(key, value)?,
            "adadelta_eps" => self.optimizer.eps = parse(key, value)?,
            "learning_rate" => self.optimizer.lr = parse(key, value)?,
            "min_count" => self.min_count = parse(key, value)?,
            other => {
                return Err(Error::config(format!(
                    "unknown configuration key {other:?}"
                )))
            }
        }
        Ok(())
    }

    /// Fully resolved settings as `(key, value)` pairs; feeding them back
    /// through [`TrainConfig::set`] reproduces this configuration.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let w = &self.weights;
        let s = &self.sizes;
        vec![
            ("weight_sent", w.sent.to_string()),
            ("weight_tok", w.tok.to_string()),
            ("weight_lm", w.lm.to_string()),
            ("weight_char", w.char.to_string()),
            ("weight_attn", w.attn.to_string()),
            ("arch", self.arch.name().to_string()),
            ("word_emb", s.word_emb.to_string()),
            ("char_emb", s.char_emb.to_string()),
            ("char_hidden", s.char_hidden.to_string()),
            ("char_proj", s.char_proj.to_string()),
            ("word_hidden", s.word_hidden.to_string()),
            ("hidden", s.hidden.to_string()),
            ("attn_hidden", s.attn_hidden.to_string()),
            ("sent_hidden", s.sent_hidden.to_string()),
            ("lm_hidden", s.lm_hidden.to_string()),
            ("char_lm_hidden", s.char_lm_hidden.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("max_epochs", self.max_epochs.to_string()),
            ("patience", self.patience.to_string()),
            ("stop_metric", self.stop_metric.name().to_string()),
            ("dropout", self.dropout.to_string()),
            ("seed", self.seed.to_string()),
            (
                "clip_norm",
                self.clip_norm
                    .map_or_else(|| "none".to_string(), |c| c.to_string()),
            ),
            ("adadelta_rho", self.optimizer.rho.to_string()),
            ("adadelta_eps", self.optimizer.eps.to_string()),
            ("learning_rate", self.optimizer.lr.to_string()),
            ("min_count", self.min_count.to_string()),
        ]
    }

    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entries_round_trip() {
        let mut c = TrainConfig::default();
        c.set("sizes", "desk").unwrap();
        c.set("preset", "baseline").unwrap();
        c.set("weight_attn", "0.01").unwrap();
        c.set("clip_norm", "none").unwrap();
        c.set("stop_metric", "token_dev_F0.5").unwrap();
        c.set("arch", "last").unwrap();
        let mut back = TrainConfig::default();
        for (k, v) in c.entries() {
            back.set(k, &v).unwrap();
        }
        assert_eq!(back, c);
        for (k, _) in c.entries() {
            assert!(TRAIN_KEYS.contains(&k));
        }
    }

    #[test]
    fn rejects_bad_settings() {
        let mut c = TrainConfig::default();
        assert!(matches!(c.set("colour", "red"), Err(Error::Config(_))));
        assert!(c.set("batch_size", "many").is_err());
        c.set("dropout", "1.0").unwrap();
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.set("patience", "0").unwrap();
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.set("weight_lm", "-1").unwrap();
        assert!(c.validate().is_err());
        assert!(TrainConfig::default().validate().is_ok());
    }
}
