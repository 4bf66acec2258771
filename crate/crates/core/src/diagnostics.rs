//! Finite-difference check of the full training objective on a tiny model.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{finite_difference_check, GradCheckReport, Graph};
use crate::corpus::{build_vocabs, Dataset, Sentence};
use crate::error::Result;
use crate::model::{Architecture, LayerSizes, Model, ModelParams};
use crate::objectives::{sentence_objective, LossWeights};
use crate::trainer::init_params;

/// Central-difference step used by [`joint_gradient_check`].
pub const GRADCHECK_EPSILON: f64 = 1e-4;

/// A model with a 20-entry word vocabulary, 8-d embeddings, 8-d recurrences
/// and 6-d hidden layers, plus three token-labeled sentences of lengths 5, 3
/// and 1 drawn from that vocabulary.
pub fn tiny_joint_setup(seed: u64) -> Result<(Model, Vec<Sentence>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let letters: Vec<char> = "abcdefgh".chars().collect();
    let mut words: Vec<String> = Vec::new();
    while words.len() < 17 {
        let len = rng.random_range(3..=6);
        let w: String = (0..len)
            .map(|_| *letters.choose(&mut rng).expect("non-empty"))
            .collect();
        if !words.contains(&w) {
            words.push(w);
        }
    }
    let mut make = |toks: &[String]| -> Result<Sentence> {
        let labels: Vec<bool> = toks.iter().map(|_| rng.random_bool(0.3)).collect();
        let mut toks = toks.to_vec();
        if rng.random_bool(0.5) {
            let mut c = toks[0].chars();
            let first = c.next().expect("non-empty").to_ascii_uppercase();
            toks[0] = std::iter::once(first).chain(c).collect();
        }
        Sentence::from_token_labels(toks, labels)
    };
    let sentences = vec![
        make(&words[0..5])?,
        make(&words[5..8])?,
        make(&words[8..9])?,
    ];
    // the vocabulary holds all 17 words, not only the 9 the sentences use
    let vocab_source = Dataset::new(vec![Sentence::from_token_labels(
        words.clone(),
        vec![false; 17],
    )?]);
    let (wv, cv) = build_vocabs(&vocab_source, 1)?;
    let sizes = LayerSizes {
        word_vocab: wv.len(),
        char_vocab: cv.len(),
        word_emb: 8,
        char_emb: 8,
        char_hidden: 8,
        char_proj: 6,
        word_hidden: 8,
        hidden: 6,
        attn_hidden: 6,
        sent_hidden: 6,
        lm_hidden: 6,
        char_lm_hidden: 6,
    };
    let params: ModelParams = init_params(sizes, Architecture::Attention, seed)?;
    Ok((Model::new(params, wv, cv)?, sentences))
}

/// Compares analytic and numeric gradients of the summed joint objective over
/// every parameter of [`tiny_joint_setup`].
pub fn joint_gradient_check(seed: u64, epsilon: f64) -> Result<GradCheckReport> {
    let (model, sentences) = tiny_joint_setup(seed)?;
    let inputs: Vec<_> = sentences.iter().map(|s| model.encode(s)).collect();
    let weights = LossWeights::joint();
    let builder = |store: &crate::autodiff::ParamStore, g: &mut Graph| {
        let params = ModelParams {
            store: store.clone(),
            ..model.params.clone()
        };
        let totals = sentences
            .iter()
            .zip(&inputs)
            .map(|(s, inp)| Ok(sentence_objective(g, &params, inp, s, &weights, None)?.total))
            .collect::<Result<Vec<_>>>()?;
        let v = g.concat(&totals)?;
        g.sum(v)
    };
    finite_difference_check(builder, &model.params.store, epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn setup_matches_declared_sizes() {
        let (m, s) = tiny_joint_setup(1).unwrap();
        assert_eq!(m.words.len(), 20);
        assert_eq!(
            s.iter().map(Sentence::len).collect::<Vec<_>>(),
            vec![5, 3, 1]
        );
        for sent in &s {
            let inp = m.encode(sent);
            assert!(inp.word_ids.iter().all(|&id| id >= 3));
        }
    }
}
