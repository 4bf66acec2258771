use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::sentence::Dataset;
use crate::error::{Error, Result};

pub const UNK: usize = 0;
/// Target for the backward LM head before the first token.
pub const BOS: usize = 1;
/// Target for the forward LM head after the last token.
pub const EOS: usize = 2;

const WORD_SPECIALS: [&str; 3] = ["<unk>", "<s>", "</s>"];

/// Lowercased word forms mapped to contiguous ids. Ids 0..3 are reserved for
/// the unknown word and the two sentence-boundary markers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordVocab {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl WordVocab {
    pub const NUM_SPECIAL: usize = WORD_SPECIALS.len();

    /// Vocabulary over `words` (in order) after the reserved symbols.
    pub fn from_words<I, S>(words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut all: Vec<String> = WORD_SPECIALS.iter().map(|s| s.to_string()).collect();
        let mut index = HashMap::new();
        for w in words {
            let w = w.into();
            if index.contains_key(&w) {
                return Err(Error::contract(format!("duplicate vocabulary word {w:?}")));
            }
            index.insert(w.clone(), all.len());
            all.push(w);
        }
        Ok(WordVocab { words: all, index })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Id of a (lowercased) word; unseen words map to [`UNK`].
    pub fn id(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    /// Regular (non-reserved) words in id order.
    pub fn words(&self) -> &[String] {
        &self.words[Self::NUM_SPECIAL..]
    }
}

/// Characters (Unicode scalar values) mapped to contiguous ids; id 0 is the
/// unknown character.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharVocab {
    chars: Vec<char>,
    index: HashMap<char, usize>,
}

impl CharVocab {
    pub fn from_chars(chars: impl IntoIterator<Item = char>) -> Result<Self> {
        let mut list = Vec::new();
        let mut index = HashMap::new();
        for c in chars {
            if index.insert(c, list.len() + 1).is_some() {
                return Err(Error::contract(format!("duplicate vocabulary char {c:?}")));
            }
            list.push(c);
        }
        Ok(CharVocab { chars: list, index })
    }

    /// Number of ids including the unknown character.
    pub fn len(&self) -> usize {
        self.chars.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, c: char) -> usize {
        self.index.get(&c).copied().unwrap_or(UNK)
    }

    /// Known characters in id order (id = position + 1).
    pub fn chars(&self) -> &[char] {
        &self.chars
    }
}

/// Builds the word vocabulary over lowercased forms occurring at least
/// `min_count` times and the character vocabulary over every character seen.
///
/// Words are ordered by descending frequency, ties alphabetically.
pub fn build_vocabs(dataset: &Dataset, min_count: usize) -> Result<(WordVocab, CharVocab)> {
    if min_count == 0 {
        return Err(Error::config("min_count must be at least 1"));
    }
    if dataset.is_empty() {
        return Err(Error::contract(
            "cannot build vocabularies from an empty dataset",
        ));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut chars = BTreeSet::new();
    for s in dataset {
        for w in s.lowercased() {
            *counts.entry(w.as_str()).or_default() += 1;
        }
        for seq in s.char_seqs() {
            chars.extend(seq.iter().copied());
        }
    }
    let mut kept: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let words = WordVocab::from_words(kept.into_iter().map(|(w, _)| w))?;
    let chars = CharVocab::from_chars(chars)?;
    Ok((words, chars))
}
