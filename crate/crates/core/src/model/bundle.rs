use super::network::EncodedInput;
use super::params::ModelParams;
use crate::corpus::{CharVocab, Sentence, WordVocab};
use crate::error::{Error, Result};

/// Parameters together with the vocabularies that map text onto them.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub params: ModelParams,
    pub words: WordVocab,
    pub chars: CharVocab,
}

impl Model {
    /// Checks that both vocabularies match the embedding tables.
    pub fn new(params: ModelParams, words: WordVocab, chars: CharVocab) -> Result<Self> {
        let sizes = params.sizes;
        if sizes.word_vocab != words.len() || sizes.char_vocab != chars.len() {
            return Err(Error::contract(format!(
                "vocabularies ({} words, {} chars) do not match embedding tables ({}, {})",
                words.len(),
                chars.len(),
                sizes.word_vocab,
                sizes.char_vocab
            )));
        }
        Ok(Model {
            params,
            words,
            chars,
        })
    }

    pub fn encode(&self, sentence: &Sentence) -> EncodedInput {
        EncodedInput::new(sentence, &self.words, &self.chars)
    }
}
