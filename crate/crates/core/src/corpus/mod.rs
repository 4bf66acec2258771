//! Corpus files, vocabularies, pretrained embeddings, annotation masking and
//! synthetic data.

mod embeddings;
mod masking;
mod sentence;
mod synthetic;
mod vocab;

pub use embeddings::{load_embeddings, parse_embeddings, EmbeddingTable, RowSource};
pub use masking::{annotation_priority, mask_token_annotation};
pub use sentence::{parse_tsv, parse_tsv_str, parse_unlabeled_tsv, Dataset, Sentence};
pub use synthetic::{
    generate_splits, generate_synthetic, Splits, SyntheticConfig, SyntheticVocabulary,
    TRIGGER_PREFIX,
};
pub use vocab::{build_vocabs, CharVocab, WordVocab, BOS, EOS, UNK};
