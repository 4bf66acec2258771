use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::sentence::{Dataset, Sentence};
use crate::error::{Error, Result};

/// Shared first characters of every trigger word.
pub const TRIGGER_PREFIX: &str = "xq";

/// Trigger-detection corpus: a sentence is positive iff it contains at least
/// one trigger word, and exactly the trigger tokens carry label 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    pub vocab_size: usize,
    pub n_triggers: usize,
    pub max_len: usize,
    pub positive_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_train: 2000,
            n_dev: 500,
            n_test: 500,
            vocab_size: 50,
            n_triggers: 2,
            max_len: 12,
            positive_rate: 0.5,
            seed: 1,
        }
    }
}

/// Train/dev/test partition of a corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Splits {
    pub train: Dataset,
    pub dev: Dataset,
    pub test: Dataset,
}

/// Generated vocabulary: regular words followed by trigger words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticVocabulary {
    pub regular: Vec<String>,
    pub triggers: Vec<String>,
}

fn random_word(rng: &mut ChaCha8Rng, len: usize) -> String {
    (0..len)
        .map(|_| rng.random_range(b'a'..=b'z') as char)
        .collect()
}

fn validate(
    vocab_size: usize,
    n_triggers: usize,
    max_len: usize,
    positive_rate: f64,
) -> Result<()> {
    if max_len < 1 {
        return Err(Error::config("max_len must be at least 1"));
    }
    if n_triggers == 0 {
        return Err(Error::config("at least one trigger word is required"));
    }
    if vocab_size < n_triggers + 2 {
        return Err(Error::config(format!(
            "vocab_size {vocab_size} too small for {n_triggers} trigger words"
        )));
    }
    if !(positive_rate > 0.0 && positive_rate < 1.0) {
        return Err(Error::config(format!(
            "positive_rate {positive_rate} outside (0, 1)"
        )));
    }
    Ok(())
}

fn make_vocabulary(
    rng: &mut ChaCha8Rng,
    vocab_size: usize,
    n_triggers: usize,
) -> SyntheticVocabulary {
    let mut seen = HashSet::new();
    let mut triggers = Vec::with_capacity(n_triggers);
    while triggers.len() < n_triggers {
        let len = rng.random_range(2..=4);
        let w = format!("{TRIGGER_PREFIX}{}", random_word(rng, len));
        if seen.insert(w.clone()) {
            triggers.push(w);
        }
    }
    let mut regular = Vec::with_capacity(vocab_size - n_triggers);
    while regular.len() < vocab_size - n_triggers {
        let len = rng.random_range(2..=7);
        let w = random_word(rng, len);
        if !w.starts_with(TRIGGER_PREFIX) && seen.insert(w.clone()) {
            regular.push(w);
        }
    }
    SyntheticVocabulary { regular, triggers }
}

fn capitalize(w: &str) -> String {
    let mut cs = w.chars();
    match cs.next() {
        Some(c) => c.to_uppercase().chain(cs).collect(),
        None => String::new(),
    }
}

fn make_sentence(
    rng: &mut ChaCha8Rng,
    vocab: &SyntheticVocabulary,
    max_len: usize,
    positive: bool,
) -> Sentence {
    let len = rng.random_range(max_len.min(3)..=max_len);
    let mut words: Vec<String> = (0..len)
        .map(|_| vocab.regular.choose(rng).expect("non-empty").clone())
        .collect();
    let mut labels = vec![false; len];
    if positive {
        let n_trig = if len > 1 && rng.random_bool(0.3) {
            2
        } else {
            1
        };
        let mut positions: Vec<usize> = (0..len).collect();
        positions.shuffle(rng);
        for &p in &positions[..n_trig] {
            words[p] = vocab.triggers.choose(rng).expect("non-empty").clone();
            labels[p] = true;
        }
    }
    words[0] = capitalize(&words[0]);
    Sentence::new(words, Some(labels), positive).expect("generated sentences are valid")
}

/// Generates `n_sentences` token-labeled sentences over a seeded vocabulary of
/// `vocab_size` lowercase words, `n_triggers` of which are triggers sharing
/// [`TRIGGER_PREFIX`]. The first token of each sentence is capitalized.
pub fn generate_synthetic(
    n_sentences: usize,
    vocab_size: usize,
    n_triggers: usize,
    max_len: usize,
    positive_rate: f64,
    seed: u64,
) -> Result<(Dataset, SyntheticVocabulary)> {
    validate(vocab_size, n_triggers, max_len, positive_rate)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = make_vocabulary(&mut rng, vocab_size, n_triggers);
    let sentences = (0..n_sentences)
        .map(|_| {
            let positive = rng.random_bool(positive_rate);
            make_sentence(&mut rng, &vocab, max_len, positive)
        })
        .collect();
    Ok((Dataset::new(sentences), vocab))
}

/// Generates one corpus and partitions it into train, dev and test in order.
pub fn generate_splits(config: &SyntheticConfig) -> Result<Splits> {
    let total = config.n_train + config.n_dev + config.n_test;
    let (data, _) = generate_synthetic(
        total,
        config.vocab_size,
        config.n_triggers,
        config.max_len,
        config.positive_rate,
        config.seed,
    )?;
    let mut it = data.sentences.into_iter();
    let train = Dataset::new(it.by_ref().take(config.n_train).collect());
    let dev = Dataset::new(it.by_ref().take(config.n_dev).collect());
    let test = Dataset::new(it.collect());
    Ok(Splits { train, dev, test })
}
