use super::params::{CellIds, DenseIds, ModelParams};
use crate::autodiff::{Graph, NodeId, Tensor};
use crate::corpus::{CharVocab, Sentence, WordVocab, BOS, EOS};
use crate::error::{Error, Result};

/// A sentence mapped to vocabulary ids: lowercased words for the word level,
/// original-case characters for the character level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedInput {
    pub word_ids: Vec<usize>,
    pub char_ids: Vec<Vec<usize>>,
}

impl EncodedInput {
    pub fn new(sentence: &Sentence, words: &WordVocab, chars: &CharVocab) -> Self {
        EncodedInput {
            word_ids: sentence.lowercased().iter().map(|w| words.id(w)).collect(),
            char_ids: sentence
                .char_seqs()
                .iter()
                .map(|cs| cs.iter().map(|&c| chars.id(c)).collect())
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.word_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word_ids.is_empty()
    }

    /// Next-word targets for the forward LM head; the last position predicts
    /// the end-of-sentence marker.
    pub fn forward_lm_targets(&self) -> Vec<usize> {
        self.word_ids[1..].iter().copied().chain([EOS]).collect()
    }

    /// Previous-word targets for the backward LM head; the first position
    /// predicts the start-of-sentence marker.
    pub fn backward_lm_targets(&self) -> Vec<usize> {
        [BOS]
            .into_iter()
            .chain(self.word_ids[..self.len() - 1].iter().copied())
            .collect()
    }
}

/// Explicit dropout masks for one sentence: one per word embedding `w_i` and
/// one per contextual vector `h_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks {
    pub word: Vec<Tensor>,
    pub hidden: Vec<Tensor>,
}

#[derive(Debug, Clone, Copy)]
pub struct DenseNodes {
    w: NodeId,
    b: NodeId,
}

impl DenseNodes {
    fn bind(g: &mut Graph, p: &ModelParams, ids: DenseIds) -> Self {
        DenseNodes {
            w: g.param(&p.store, ids.w),
            b: g.param(&p.store, ids.b),
        }
    }

    pub fn apply(&self, g: &mut Graph, x: NodeId) -> Result<NodeId> {
        let wx = g.matmul(self.w, x)?;
        g.add(wx, self.b)
    }
}

/// Graph leaves for one recurrent cell. Gate rows are ordered input, forget,
/// output, candidate.
#[derive(Debug, Clone, Copy)]
pub struct CellNodes {
    w: NodeId,
    b: NodeId,
    hidden: usize,
}

impl CellNodes {
    pub fn bind(g: &mut Graph, p: &ModelParams, ids: CellIds) -> Self {
        CellNodes {
            w: g.param(&p.store, ids.w),
            b: g.param(&p.store, ids.b),
            hidden: ids.hidden,
        }
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }
}

/// One step of the gated recurrence:
/// `c = f ⊙ c_prev + i ⊙ tanh(z_c)`, `h = o ⊙ tanh(c)`.
pub fn recurrent_step(
    g: &mut Graph,
    cell: &CellNodes,
    x: NodeId,
    h_prev: NodeId,
    c_prev: NodeId,
) -> Result<(NodeId, NodeId)> {
    let n = cell.hidden;
    if g.value(h_prev).len() != n || g.value(c_prev).len() != n {
        return Err(Error::shape(
            "recurrent_step",
            &[n],
            g.value(h_prev).shape(),
        ));
    }
    let xh = g.concat(&[x, h_prev])?;
    let z = g.matmul(cell.w, xh)?;
    let z = g.add(z, cell.b)?;
    let gates = g.slice(z, 0, 3 * n)?;
    let gates = g.sigmoid(gates)?;
    let input = g.slice(gates, 0, n)?;
    let forget = g.slice(gates, n, n)?;
    let output = g.slice(gates, 2 * n, n)?;
    let cand = g.slice(z, 3 * n, n)?;
    let cand = g.tanh(cand)?;
    let keep = g.mul(forget, c_prev)?;
    let write = g.mul(input, cand)?;
    let c = g.add(keep, write)?;
    let tc = g.tanh(c)?;
    let h = g.mul(output, tc)?;
    Ok((h, c))
}

/// Runs a cell over `inputs` left to right from a zero state and returns the
/// hidden state after every step.
fn run_cell(g: &mut Graph, cell: &CellNodes, inputs: &[NodeId]) -> Result<Vec<NodeId>> {
    let zero = g.constant(Tensor::zeros(&[cell.hidden]))?;
    let (mut h, mut c) = (zero, zero);
    let mut out = Vec::with_capacity(inputs.len());
    for &x in inputs {
        (h, c) = recurrent_step(g, cell, x, h, c)?;
        out.push(h);
    }
    Ok(out)
}

/// Runs `cell` in both reading orders. Backward states are returned aligned
/// with the input positions.
fn run_bidirectional(
    g: &mut Graph,
    fwd: &CellNodes,
    bwd: &CellNodes,
    inputs: &[NodeId],
) -> Result<(Vec<NodeId>, Vec<NodeId>)> {
    let forward = run_cell(g, fwd, inputs)?;
    let reversed: Vec<NodeId> = inputs.iter().rev().copied().collect();
    let mut backward = run_cell(g, bwd, &reversed)?;
    backward.reverse();
    Ok((forward, backward))
}

/// Graph leaves for the parameters every forward pass reads.
#[derive(Debug, Clone, Copy)]
pub struct CoreNodes {
    pub char_fwd: CellNodes,
    pub char_bwd: CellNodes,
    pub char_proj: DenseNodes,
    pub word_fwd: CellNodes,
    pub word_bwd: CellNodes,
    pub hidden: DenseNodes,
    pub attn_hidden: DenseNodes,
    pub attn_out: DenseNodes,
    pub sent_hidden: DenseNodes,
    pub sent_out: DenseNodes,
}

impl CoreNodes {
    pub fn bind(g: &mut Graph, p: &ModelParams) -> Self {
        CoreNodes {
            char_fwd: CellNodes::bind(g, p, p.char_fwd),
            char_bwd: CellNodes::bind(g, p, p.char_bwd),
            char_proj: DenseNodes::bind(g, p, p.char_proj),
            word_fwd: CellNodes::bind(g, p, p.word_fwd),
            word_bwd: CellNodes::bind(g, p, p.word_bwd),
            hidden: DenseNodes::bind(g, p, p.hidden),
            attn_hidden: DenseNodes::bind(g, p, p.attn_hidden),
            attn_out: DenseNodes::bind(g, p, p.attn_out),
            sent_hidden: DenseNodes::bind(g, p, p.sent_hidden),
            sent_out: DenseNodes::bind(g, p, p.sent_out),
        }
    }
}

/// Character-level composition of one token.
#[derive(Debug, Clone)]
pub struct CharEncoding {
    /// Left-to-right states `d→_{i,j}`, one per character.
    pub fwd: Vec<NodeId>,
    /// Right-to-left states `d←_{i,j}`, aligned with character positions.
    pub bwd: Vec<NodeId>,
    /// Composed character vector `m_i`.
    pub m: NodeId,
}

impl CharEncoding {
    /// `d→_{i,R}`: forward state after the last character.
    pub fn fwd_last(&self) -> NodeId {
        *self.fwd.last().expect("non-empty token")
    }

    /// `d←_{i,1}`: backward state after reading back to the first character.
    pub fn bwd_first(&self) -> NodeId {
        self.bwd[0]
    }
}

pub fn encode_chars(
    g: &mut Graph,
    params: &ModelParams,
    nodes: &CoreNodes,
    char_ids: &[usize],
) -> Result<CharEncoding> {
    if char_ids.is_empty() {
        return Err(Error::contract("token has no characters"));
    }
    let embedded = char_ids
        .iter()
        .map(|&c| g.param_row(&params.store, params.char_embeddings, c))
        .collect::<Result<Vec<_>>>()?;
    let (fwd, bwd) = run_bidirectional(g, &nodes.char_fwd, &nodes.char_bwd, &embedded)?;
    let ends = g.concat(&[*fwd.last().unwrap(), bwd[0]])?;
    let m = nodes.char_proj.apply(g, ends)?;
    let m = g.tanh(m)?;
    Ok(CharEncoding { fwd, bwd, m })
}

/// Contextual word-level states for a sentence.
#[derive(Debug, Clone)]
pub struct WordStates {
    pub chars: Vec<CharEncoding>,
    /// `x_i = [w_i; m_i]`
    pub x: Vec<NodeId>,
    pub h_fwd: Vec<NodeId>,
    pub h_bwd: Vec<NodeId>,
    /// `h_i = tanh(W_h [h→_i; h←_i] + b_h)`, after dropout when masks are given.
    pub h: Vec<NodeId>,
}

pub fn encode_sentence(
    g: &mut Graph,
    params: &ModelParams,
    nodes: &CoreNodes,
    input: &EncodedInput,
    masks: Option<&DropoutMasks>,
) -> Result<WordStates> {
    let n = input.len();
    if n == 0 {
        return Err(Error::contract("sentence has no tokens"));
    }
    if input.char_ids.len() != n {
        return Err(Error::contract("character sequences do not match tokens"));
    }
    if let Some(m) = masks {
        if m.word.len() != n || m.hidden.len() != n {
            return Err(Error::contract(format!(
                "dropout masks cover {}/{} positions, sentence has {n}",
                m.word.len(),
                m.hidden.len()
            )));
        }
    }
    let mut chars = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n);
    for i in 0..n {
        let ce = encode_chars(g, params, nodes, &input.char_ids[i])?;
        let mut w = g.param_row(&params.store, params.word_embeddings, input.word_ids[i])?;
        if let Some(m) = masks {
            let mask = g.constant(m.word[i].clone())?;
            w = g.dropout(w, mask)?;
        }
        x.push(g.concat(&[w, ce.m])?);
        chars.push(ce);
    }
    let (h_fwd, h_bwd) = run_bidirectional(g, &nodes.word_fwd, &nodes.word_bwd, &x)?;
    let mut h = Vec::with_capacity(n);
    for i in 0..n {
        let both = g.concat(&[h_fwd[i], h_bwd[i]])?;
        let hi = nodes.hidden.apply(g, both)?;
        let mut hi = g.tanh(hi)?;
        if let Some(m) = masks {
            let mask = g.constant(m.hidden[i].clone())?;
            hi = g.dropout(hi, mask)?;
        }
        h.push(hi);
    }
    Ok(WordStates {
        chars,
        x,
        h_fwd,
        h_bwd,
        h,
    })
}

#[derive(Debug, Clone)]
pub struct TokenScores {
    pub e: Vec<NodeId>,
    /// Per-token `â_i`, each of shape `[1]`.
    pub a_hat: Vec<NodeId>,
    /// All `â_i` as one `[N]` vector.
    pub a_hat_vec: NodeId,
}

/// `e_i = tanh(W_e h_i + b_e)`, `â_i = σ(W_a e_i + b_a)`.
pub fn score_tokens(g: &mut Graph, nodes: &CoreNodes, states: &WordStates) -> Result<TokenScores> {
    let mut e = Vec::with_capacity(states.h.len());
    let mut a_hat = Vec::with_capacity(states.h.len());
    for &h in &states.h {
        let ei = nodes.attn_hidden.apply(g, h)?;
        let ei = g.tanh(ei)?;
        let ai = nodes.attn_out.apply(g, ei)?;
        a_hat.push(g.sigmoid(ai)?);
        e.push(ei);
    }
    let a_hat_vec = g.concat(&a_hat)?;
    Ok(TokenScores {
        e,
        a_hat,
        a_hat_vec,
    })
}

#[derive(Debug, Clone)]
pub struct SentenceOutput {
    /// `ã_i = â_i / Σ_k â_k`
    pub a_tilde: NodeId,
    /// `s = Σ_i ã_i h_i`
    pub s: NodeId,
    pub y_hat: NodeId,
}

/// Normalizes token scores into attention weights, composes the sentence
/// vector and applies the sentence head. With [`Architecture::LastState`]
/// the head reads `[h→_N; h←_1]` instead of `s`.
pub fn attend_and_classify(
    g: &mut Graph,
    params: &ModelParams,
    nodes: &CoreNodes,
    states: &WordStates,
    scores: &TokenScores,
) -> Result<SentenceOutput> {
    let total = g.sum(scores.a_hat_vec)?;
    let a_tilde = g.div(scores.a_hat_vec, total)?;
    let h_matrix = g.stack(&states.h)?;
    let s = g.matmul(a_tilde, h_matrix)?;
    let head_input = match params.arch {
        super::Architecture::Attention => s,
        super::Architecture::LastState => {
            let last = *states.h_fwd.last().expect("non-empty");
            g.concat(&[last, states.h_bwd[0]])?
        }
    };
    let z = nodes.sent_hidden.apply(g, head_input)?;
    let z = g.tanh(z)?;
    let y = nodes.sent_out.apply(g, z)?;
    let y_hat = g.sigmoid(y)?;
    Ok(SentenceOutput { a_tilde, s, y_hat })
}

/// Every quantity of one forward pass.
#[derive(Debug, Clone)]
pub struct SentenceEncoding {
    pub nodes: CoreNodes,
    pub states: WordStates,
    pub scores: TokenScores,
    pub output: SentenceOutput,
}

/// Full inference path for one sentence. `masks = None` means no dropout.
pub fn forward(
    g: &mut Graph,
    params: &ModelParams,
    input: &EncodedInput,
    masks: Option<&DropoutMasks>,
) -> Result<SentenceEncoding> {
    let nodes = CoreNodes::bind(g, params);
    let states = encode_sentence(g, params, &nodes, input, masks)?;
    let scores = score_tokens(g, &nodes, &states)?;
    let output = attend_and_classify(g, params, &nodes, &states, &scores)?;
    Ok(SentenceEncoding {
        nodes,
        states,
        scores,
        output,
    })
}

/// Log-probabilities of both word-level LM heads, one `[V]` row per position.
#[derive(Debug, Clone)]
pub struct WordLmOutput {
    /// Row `i` scores the word at `i + 1` (end marker for the last position).
    pub fwd: Vec<NodeId>,
    /// Row `i` scores the word at `i - 1` (start marker for the first position).
    pub bwd: Vec<NodeId>,
}

pub fn word_lm_heads(
    g: &mut Graph,
    params: &ModelParams,
    states: &WordStates,
) -> Result<WordLmOutput> {
    let ids = params
        .word_lm
        .ok_or_else(|| Error::contract("model has no word-level LM parameters"))?;
    let fh = DenseNodes::bind(g, params, ids.fwd_hidden);
    let fo = DenseNodes::bind(g, params, ids.fwd_out);
    let bh = DenseNodes::bind(g, params, ids.bwd_hidden);
    let bo = DenseNodes::bind(g, params, ids.bwd_out);
    let head =
        |g: &mut Graph, hid: &DenseNodes, out: &DenseNodes, state: NodeId| -> Result<NodeId> {
            let q = hid.apply(g, state)?;
            let q = g.tanh(q)?;
            let logits = out.apply(g, q)?;
            g.log_softmax(logits)
        };
    let fwd = states
        .h_fwd
        .iter()
        .map(|&h| head(g, &fh, &fo, h))
        .collect::<Result<Vec<_>>>()?;
    let bwd = states
        .h_bwd
        .iter()
        .map(|&h| head(g, &bh, &bo, h))
        .collect::<Result<Vec<_>>>()?;
    Ok(WordLmOutput { fwd, bwd })
}

/// Log-probabilities of the character-context head for the 0-based interior
/// positions `1..N-1`, each predicting the word at that position from the
/// character edge states of its two neighbours.
pub fn char_lm_head(
    g: &mut Graph,
    params: &ModelParams,
    states: &WordStates,
) -> Result<Vec<(usize, NodeId)>> {
    let n = states.chars.len();
    if n < 3 {
        return Ok(Vec::new());
    }
    let ids = params
        .char_lm
        .ok_or_else(|| Error::contract("model has no character-level LM parameters"))?;
    let hidden = DenseNodes::bind(g, params, ids.hidden);
    let out = DenseNodes::bind(g, params, ids.out);
    (1..n - 1)
        .map(|i| Ok((i, char_lm_at(g, &hidden, &out, states, i)?)))
        .collect()
}

fn char_lm_at(
    g: &mut Graph,
    hidden: &DenseNodes,
    out: &DenseNodes,
    states: &WordStates,
    i: usize,
) -> Result<NodeId> {
    let (prev, next) = (&states.chars[i - 1], &states.chars[i + 1]);
    let g_in = g.concat(&[
        prev.fwd_last(),
        prev.bwd_first(),
        next.fwd_last(),
        next.bwd_first(),
    ])?;
    let gi = hidden.apply(g, g_in)?;
    let gi = g.tanh(gi)?;
    let logits = out.apply(g, gi)?;
    g.log_softmax(logits)
}

/// Character-context head at a single 0-based position `i` in `1..N-1`.
pub fn char_lm_position(
    g: &mut Graph,
    params: &ModelParams,
    states: &WordStates,
    i: usize,
) -> Result<NodeId> {
    let n = states.chars.len();
    if i == 0 || i + 1 >= n {
        return Err(Error::contract(format!(
            "character LM position {i} outside 1..{} for a sentence of {n} tokens",
            n.saturating_sub(1)
        )));
    }
    let ids = params
        .char_lm
        .ok_or_else(|| Error::contract("model has no character-level LM parameters"))?;
    let hidden = DenseNodes::bind(g, params, ids.hidden);
    let out = DenseNodes::bind(g, params, ids.out);
    char_lm_at(g, &hidden, &out, states, i)
}
