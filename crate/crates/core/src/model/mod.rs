//! The joint labeling network: character and word recurrences, token scoring,
//! soft attention, the sentence head, and the two auxiliary LM heads.

mod bundle;
mod network;
mod params;

pub use bundle::Model;
pub use network::{
    attend_and_classify, char_lm_head, char_lm_position, encode_chars, encode_sentence, forward,
    recurrent_step, score_tokens, word_lm_heads, CellNodes, CharEncoding, CoreNodes, DenseNodes,
    DropoutMasks, EncodedInput, SentenceEncoding, SentenceOutput, TokenScores, WordLmOutput,
    WordStates,
};
pub use params::{
    param_specs, Architecture, CellIds, CharLmIds, DenseIds, LayerSizes, ModelParams, ParamGroup,
    ParamRole, ParamSpec, WordLmIds,
};

#[cfg(test)]
mod tests;
