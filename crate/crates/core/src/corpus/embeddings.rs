use std::fs;
use std::path::Path;

use rand::Rng;

use super::vocab::WordVocab;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSource {
    Pretrained,
    RandomlyInitialized,
}

/// Word embedding matrix with per-row provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub matrix: Tensor,
    pub provenance: Vec<RowSource>,
}

impl EmbeddingTable {
    pub fn dim(&self) -> usize {
        self.matrix.shape()[1]
    }

    pub fn pretrained_rows(&self) -> usize {
        self.provenance
            .iter()
            .filter(|&&p| p == RowSource::Pretrained)
            .count()
    }

    /// Fills every row not covered by the embedding file with uniform draws
    /// in `[-limit, limit]`.
    pub fn initialize_missing(&mut self, limit: f64, rng: &mut impl Rng) {
        for (r, src) in self.provenance.iter().enumerate() {
            if *src == RowSource::RandomlyInitialized {
                for v in self.matrix.row_mut(r) {
                    *v = rng.random_range(-limit..=limit);
                }
            }
        }
    }
}

/// Reads a whitespace-separated text embedding file (`word v1 .. vd` per
/// line). Rows for vocabulary words missing from the file are zero and flagged
/// [`RowSource::RandomlyInitialized`].
pub fn load_embeddings(
    path: impl AsRef<Path>,
    vocab: &WordVocab,
    d_word: usize,
) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::MissingFile {
        path: path.to_path_buf(),
        source,
    })?;
    parse_embeddings(&text, &path.display().to_string(), vocab, d_word)
}

pub fn parse_embeddings(
    text: &str,
    source: &str,
    vocab: &WordVocab,
    d_word: usize,
) -> Result<EmbeddingTable> {
    let mut matrix = Tensor::zeros(&[vocab.len(), d_word]);
    let mut provenance = vec![RowSource::RandomlyInitialized; vocab.len()];
    let mut exact = vec![false; vocab.len()];

    for (idx, line) in text.lines().enumerate() {
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else { continue };
        let values: Vec<&str> = fields.collect();
        if values.len() != d_word {
            return Err(Error::Parse {
                path: source.to_string(),
                line: idx + 1,
                msg: format!(
                    "expected {d_word} values after {word:?}, found {}",
                    values.len()
                ),
            });
        }
        let (id, is_exact) = if vocab.contains(word) {
            (vocab.id(word), true)
        } else {
            let lower = word.to_lowercase();
            if !vocab.contains(&lower) {
                continue;
            }
            (vocab.id(&lower), false)
        };
        if exact[id] && !is_exact {
            continue;
        }
        let row = matrix.row_mut(id);
        for (slot, v) in row.iter_mut().zip(&values) {
            *slot = v
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::Parse {
                    path: source.to_string(),
                    line: idx + 1,
                    msg: format!("unreadable value {v:?}"),
                })?;
        }
        provenance[id] = RowSource::Pretrained;
        exact[id] |= is_exact;
    }
    Ok(EmbeddingTable { matrix, provenance })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn copies_rows_and_flags_missing() {
        let vocab = WordVocab::from_words(["good", "bad"]).unwrap();
        let t = parse_embeddings("good 0.1 0.2 0.3\nother 1 1 1\n", "e", &vocab, 3).unwrap();
        assert_eq!(t.matrix.row(vocab.id("good")), &[0.1, 0.2, 0.3]);
        assert_eq!(t.provenance[vocab.id("good")], RowSource::Pretrained);
        assert_eq!(
            t.provenance[vocab.id("bad")],
            RowSource::RandomlyInitialized
        );
        assert_eq!(t.pretrained_rows(), 1);
    }

    #[test]
    fn capitalized_entries_fill_lowercase_words_unless_exact_exists() {
        let vocab = WordVocab::from_words(["paris"]).unwrap();
        let t = parse_embeddings("Paris 1 2\n", "e", &vocab, 2).unwrap();
        assert_eq!(t.matrix.row(vocab.id("paris")), &[1.0, 2.0]);
        let t = parse_embeddings("paris 3 4\nParis 1 2\n", "e", &vocab, 2).unwrap();
        assert_eq!(t.matrix.row(vocab.id("paris")), &[3.0, 4.0]);
    }

    #[test]
    fn dimension_mismatch_and_bad_values() {
        let vocab = WordVocab::from_words(["good"]).unwrap();
        let err = parse_embeddings("x 1 2 3\ngood 0.1 0.2\n", "e", &vocab, 3).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
        let err = parse_embeddings("good 0.1 abc 0.3\n", "e", &vocab, 3).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err:?}");
    }

    #[test]
    fn missing_rows_get_random_values_within_limit() {
        use rand::SeedableRng;
        let vocab = WordVocab::from_words(["good", "bad"]).unwrap();
        let mut t = parse_embeddings("good 0.1 0.2 0.3\n", "e", &vocab, 3).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        t.initialize_missing(0.5, &mut rng);
        assert_eq!(t.matrix.row(vocab.id("good")), &[0.1, 0.2, 0.3]);
        let bad = t.matrix.row(vocab.id("bad"));
        assert!(bad.iter().all(|v| v.abs() <= 0.5) && bad.iter().any(|&v| v != 0.0));
    }
}
