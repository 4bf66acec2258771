//! Training objectives: the sentence loss, the token loss, the two language
//! modelling losses, the attention-range loss, and their weighted sum.

use std::fmt;

use crate::autodiff::{Graph, NodeId, Tensor};
use crate::corpus::Sentence;
use crate::error::{Error, Result};
use crate::model::{
    char_lm_head, forward, word_lm_heads, DropoutMasks, EncodedInput, ModelParams, SentenceEncoding,
};

/// Mixing weights for the five objectives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub sent: f64,
    pub tok: f64,
    pub lm: f64,
    pub char: f64,
    pub attn: f64,
}

impl LossWeights {
    /// Sentence supervision only.
    pub const fn baseline() -> Self {
        LossWeights {
            sent: 1.0,
            tok: 0.0,
            lm: 0.0,
            char: 0.0,
            attn: 0.0,
        }
    }

    /// All objectives at their standard mixing weights.
    pub const fn joint() -> Self {
        LossWeights {
            sent: 1.0,
            tok: 1.0,
            lm: 0.1,
            char: 0.1,
            attn: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.named() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::config(format!(
                    "loss weight {name} must be a non-negative number, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn named(&self) -> [(&'static str, f64); 5] {
        [
            ("sent", self.sent),
            ("tok", self.tok),
            ("lm", self.lm),
            ("char", self.char),
            ("attn", self.attn),
        ]
    }

    /// Whether the word or character LM heads take part in training.
    pub fn needs_lm_heads(&self) -> bool {
        self.lm > 0.0 || self.char > 0.0
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights::joint()
    }
}

/// Unweighted values of the five objectives.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossComponents {
    pub sent: f64,
    pub tok: f64,
    pub lm: f64,
    pub char: f64,
    pub attn: f64,
}

impl LossComponents {
    pub fn add(&mut self, other: &LossComponents) {
        self.sent += other.sent;
        self.tok += other.tok;
        self.lm += other.lm;
        self.char += other.char;
        self.attn += other.attn;
    }

    pub fn scaled(&self, factor: f64) -> LossComponents {
        LossComponents {
            sent: self.sent * factor,
            tok: self.tok * factor,
            lm: self.lm * factor,
            char: self.char * factor,
            attn: self.attn * factor,
        }
    }
}

impl fmt::Display for LossComponents {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "sent={:.6} tok={:.6} lm={:.6} char={:.6} attn={:.6}",
            self.sent, self.tok, self.lm, self.char, self.attn
        )
    }
}

/// Weighted sum of the components. Rejects negative or non-finite weights.
pub fn total_loss(components: &LossComponents, weights: &LossWeights) -> Result<f64> {
    weights.validate()?;
    Ok(weights.sent * components.sent
        + weights.tok * components.tok
        + weights.lm * components.lm
        + weights.char * components.char
        + weights.attn * components.attn)
}

fn zero(g: &mut Graph) -> Result<NodeId> {
    g.constant(Tensor::scalar(0.0))
}

fn label(y: bool) -> f64 {
    if y {
        1.0
    } else {
        0.0
    }
}

fn sum_scalars(g: &mut Graph, terms: &[NodeId]) -> Result<NodeId> {
    match terms {
        [] => zero(g),
        [one] => Ok(*one),
        _ => {
            let v = g.concat(terms)?;
            g.sum(v)
        }
    }
}

/// `(ŷ - y)²`
pub fn loss_sent(g: &mut Graph, y_hat: NodeId, y: bool) -> Result<NodeId> {
    let target = g.constant(Tensor::scalar(label(y)))?;
    let d = g.sub(y_hat, target)?;
    g.square(d)
}

/// `Σ_i (â_i - a_i)²`, or a constant zero when the sentence has no token labels.
pub fn loss_tok(g: &mut Graph, a_hat: NodeId, labels: Option<&[bool]>) -> Result<NodeId> {
    let Some(labels) = labels else {
        return zero(g);
    };
    if g.value(a_hat).len() != labels.len() {
        return Err(Error::shape(
            "loss_tok",
            g.value(a_hat).shape(),
            &[labels.len()],
        ));
    }
    let target = g.constant(Tensor::vector(labels.iter().map(|&a| label(a)).collect()))?;
    let d = g.sub(a_hat, target)?;
    let sq = g.square(d)?;
    g.sum(sq)
}

fn nll(g: &mut Graph, op: &'static str, log_probs: NodeId, target: usize) -> Result<NodeId> {
    let vocab = g.value(log_probs).len();
    if target >= vocab {
        return Err(Error::contract(format!(
            "{op}: target id {target} outside vocabulary of {vocab}"
        )));
    }
    let lp = g.pick(log_probs, target)?;
    g.negate(lp)
}

/// Negative log-likelihood of `targets` under rows of log-probabilities, one
/// row per prediction. Used for both directions of the word LM.
pub fn loss_lm(g: &mut Graph, log_probs: &[NodeId], targets: &[usize]) -> Result<NodeId> {
    if log_probs.len() != targets.len() {
        return Err(Error::shape(
            "loss_lm",
            &[log_probs.len()],
            &[targets.len()],
        ));
    }
    let terms = log_probs
        .iter()
        .zip(targets)
        .map(|(&row, &t)| nll(g, "loss_lm", row, t))
        .collect::<Result<Vec<_>>>()?;
    sum_scalars(g, &terms)
}

/// Negative log-likelihood of each interior word under the character-context
/// head. `predictions` pairs a token position with its log-probability row.
pub fn loss_char(
    g: &mut Graph,
    predictions: &[(usize, NodeId)],
    word_ids: &[usize],
) -> Result<NodeId> {
    let terms = predictions
        .iter()
        .map(|&(i, row)| {
            let target = *word_ids.get(i).ok_or_else(|| {
                Error::contract(format!("loss_char: position {i} outside sentence"))
            })?;
            nll(g, "loss_char", row, target)
        })
        .collect::<Result<Vec<_>>>()?;
    sum_scalars(g, &terms)
}

/// `(min_i â_i)² + (max_i â_i - y)²` over the unnormalized token scores.
pub fn loss_attn(g: &mut Graph, a_hat: NodeId, y: bool) -> Result<NodeId> {
    let lo = g.min_reduce(a_hat)?;
    let hi = g.max_reduce(a_hat)?;
    let target = g.constant(Tensor::scalar(label(y)))?;
    let lo2 = g.square(lo)?;
    let d = g.sub(hi, target)?;
    let hi2 = g.square(d)?;
    g.add(lo2, hi2)
}

/// The weighted objective of one sentence together with the forward pass
/// that produced it.
#[derive(Debug, Clone)]
pub struct SentenceObjective {
    pub total: NodeId,
    pub components: LossComponents,
    pub encoding: SentenceEncoding,
}

/// Builds the weighted loss for one sentence. Objectives with zero weight are
/// skipped entirely and reported as 0, so the LM heads are only needed when
/// their weights are positive.
pub fn sentence_objective(
    g: &mut Graph,
    params: &ModelParams,
    input: &EncodedInput,
    sentence: &Sentence,
    weights: &LossWeights,
    masks: Option<&DropoutMasks>,
) -> Result<SentenceObjective> {
    weights.validate()?;
    if input.len() != sentence.len() {
        return Err(Error::contract(
            "encoded input does not match sentence length",
        ));
    }
    let encoding = forward(g, params, input, masks)?;
    let y = sentence.sentence_label();
    let a_hat = encoding.scores.a_hat_vec;
    let mut components = LossComponents::default();
    let mut weighted = Vec::new();
    let mut push = |g: &mut Graph, node: NodeId, w: f64, slot: &mut f64| -> Result<()> {
        *slot = g.scalar(node);
        weighted.push(g.scale(node, w)?);
        Ok(())
    };

    if weights.sent > 0.0 {
        let l = loss_sent(g, encoding.output.y_hat, y)?;
        push(g, l, weights.sent, &mut components.sent)?;
    }
    if weights.tok > 0.0 && sentence.has_token_labels() {
        let l = loss_tok(g, a_hat, sentence.token_labels())?;
        push(g, l, weights.tok, &mut components.tok)?;
    }
    if weights.lm > 0.0 {
        let heads = word_lm_heads(g, params, &encoding.states)?;
        let fwd = loss_lm(g, &heads.fwd, &input.forward_lm_targets())?;
        let bwd = loss_lm(g, &heads.bwd, &input.backward_lm_targets())?;
        let l = g.add(fwd, bwd)?;
        push(g, l, weights.lm, &mut components.lm)?;
    }
    if weights.char > 0.0 {
        let preds = char_lm_head(g, params, &encoding.states)?;
        if !preds.is_empty() {
            let l = loss_char(g, &preds, &input.word_ids)?;
            push(g, l, weights.char, &mut components.char)?;
        }
    }
    if weights.attn > 0.0 {
        let l = loss_attn(g, a_hat, y)?;
        push(g, l, weights.attn, &mut components.attn)?;
    }
    let total = sum_scalars(g, &weighted)?;
    Ok(SentenceObjective {
        total,
        components,
        encoding,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eval(build: impl FnOnce(&mut Graph) -> Result<NodeId>) -> f64 {
        let mut g = Graph::new();
        let n = build(&mut g).unwrap();
        g.scalar(n)
    }

    fn vector(g: &mut Graph, v: &[f64]) -> NodeId {
        g.constant(Tensor::vector(v.to_vec())).unwrap()
    }

    fn scalar(g: &mut Graph, v: f64) -> NodeId {
        g.constant(Tensor::scalar(v)).unwrap()
    }

    #[test]
    fn sentence_loss_examples() {
        assert_eq!(
            eval(|g| {
                let y = scalar(g, 1.0);
                loss_sent(g, y, true)
            }),
            0.0
        );
        assert_eq!(
            eval(|g| {
                let y = scalar(g, 0.0);
                loss_sent(g, y, false)
            }),
            0.0
        );
        assert!(
            (eval(|g| {
                let y = scalar(g, 0.5);
                loss_sent(g, y, true)
            }) - 0.25)
                .abs()
                < 1e-9
        );
        assert!(
            (eval(|g| {
                let y = scalar(g, 0.9);
                loss_sent(g, y, false)
            }) - 0.81)
                .abs()
                < 1e-9
        );
    }

    #[test]
    fn token_loss_examples() {
        assert_eq!(
            eval(|g| {
                let a = vector(g, &[0.0, 1.0]);
                loss_tok(g, a, Some(&[false, true]))
            }),
            0.0
        );
        let v = eval(|g| {
            let a = vector(g, &[0.5, 0.5]);
            loss_tok(g, a, Some(&[false, true]))
        });
        assert!((v - 0.5).abs() < 1e-9);
        assert_eq!(
            eval(|g| {
                let a = vector(g, &[0.3, 0.9, 0.1]);
                loss_tok(g, a, None)
            }),
            0.0
        );

        let mut g = Graph::new();
        let a = vector(&mut g, &[0.5, 0.5]);
        assert!(loss_tok(&mut g, a, Some(&[true])).is_err());
    }

    fn uniform_row(g: &mut Graph, v: usize) -> NodeId {
        let z = g.constant(Tensor::zeros(&[v])).unwrap();
        g.log_softmax(z).unwrap()
    }

    #[test]
    fn lm_loss_examples() {
        let v = 7;
        let got = eval(|g| {
            let rows: Vec<_> = (0..5).map(|_| uniform_row(g, v)).collect();
            loss_lm(g, &rows, &[0, 1, 2, 3, 6])
        });
        assert!((got - 5.0 * (v as f64).ln()).abs() < 1e-9);

        let got = eval(|g| {
            let row = vector(g, &[(1e-12f64).ln(), (1.0f64 - 1e-12).ln()]);
            loss_lm(g, &[row], &[1])
        });
        assert!(got.abs() < 1e-9);

        let mut g = Graph::new();
        let row = uniform_row(&mut g, 3);
        assert!(loss_lm(&mut g, &[row], &[3]).is_err());
        assert!(loss_lm(&mut g, &[row], &[0, 1]).is_err());
        let empty = loss_lm(&mut g, &[], &[]).unwrap();
        assert_eq!(g.scalar(empty), 0.0);
    }

    #[test]
    fn one_token_sentence_has_two_lm_terms() {
        let inp = EncodedInput {
            word_ids: vec![5],
            char_ids: vec![vec![1]],
        };
        let targets = [inp.forward_lm_targets(), inp.backward_lm_targets()];
        assert_eq!(targets.iter().map(Vec::len).sum::<usize>(), 2);
    }

    #[test]
    fn char_loss_examples() {
        assert_eq!(eval(|g| loss_char(g, &[], &[3, 4])), 0.0);
        let v = 11;
        let got = eval(|g| {
            let preds: Vec<_> = (1..4).map(|i| (i, uniform_row(g, v))).collect();
            loss_char(g, &preds, &[3, 4, 5, 6, 7])
        });
        assert!((got - 3.0 * (v as f64).ln()).abs() < 1e-9);

        let got = eval(|g| {
            let preds: Vec<_> = (1..3)
                .map(|i| {
                    let mut row = vec![(1e-15f64).ln(); 4];
                    row[i] = 0.0;
                    (i, vector(g, &row))
                })
                .collect();
            loss_char(g, &preds, &[0, 1, 2, 3])
        });
        assert!(got.abs() < 1e-9);

        let mut g = Graph::new();
        let row = uniform_row(&mut g, 3);
        assert!(loss_char(&mut g, &[(4, row)], &[0, 1, 2]).is_err());
    }

    #[test]
    fn attention_loss_examples() {
        let v = eval(|g| {
            let a = vector(g, &[0.0001, 0.9999]);
            loss_attn(g, a, true)
        });
        assert!(v < 1e-7);
        let v = eval(|g| {
            let a = vector(g, &[0.5]);
            loss_attn(g, a, true)
        });
        assert!((v - 0.5).abs() < 1e-9);
        let v = eval(|g| {
            let a = vector(g, &[0.2, 0.4]);
            loss_attn(g, a, false)
        });
        assert!((v - 0.2).abs() < 1e-9);
    }

    #[test]
    fn total_loss_examples() {
        let c = LossComponents {
            sent: 1.0,
            tok: 2.0,
            lm: 3.0,
            char: 4.0,
            attn: 5.0,
        };
        assert_eq!(total_loss(&c, &LossWeights::baseline()).unwrap(), 1.0);
        assert_eq!(
            total_loss(&LossComponents::default(), &LossWeights::joint()).unwrap(),
            0.0
        );
        assert!((total_loss(&c, &LossWeights::joint()).unwrap() - 3.75).abs() < 1e-9);
        let bad = LossWeights {
            lm: -0.1,
            ..LossWeights::joint()
        };
        assert!(matches!(total_loss(&c, &bad), Err(Error::Config(_))));
    }

    #[test]
    fn presets() {
        let b = LossWeights::baseline();
        assert_eq!(b.named().map(|(_, v)| v), [1.0, 0.0, 0.0, 0.0, 0.0]);
        let j = LossWeights::joint();
        assert_eq!(j.named().map(|(_, v)| v), [1.0, 1.0, 0.1, 0.1, 0.01]);
        assert!(!b.needs_lm_heads());
        assert!(j.needs_lm_heads());
    }

    proptest! {
        #[test]
        fn losses_are_non_negative(
            a in proptest::collection::vec(0.001f64..0.999, 1..8),
            y in any::<bool>(),
            y_hat in 0.001f64..0.999,
        ) {
            let labels: Vec<bool> = a.iter().map(|&v| v > 0.5).collect();
            let sent = eval(|g| { let s = scalar(g, y_hat); loss_sent(g, s, y) });
            let tok = eval(|g| { let v = vector(g, &a); loss_tok(g, v, Some(&labels)) });
            let attn = eval(|g| { let v = vector(g, &a); loss_attn(g, v, y) });
            prop_assert!(sent >= 0.0 && tok >= 0.0 && attn >= 0.0);
        }

        #[test]
        fn attention_loss_is_positive_away_from_targets(
            a in proptest::collection::vec(0.01f64..0.99, 1..8),
            y in any::<bool>(),
        ) {
            // every score is bounded away from 0 so the min term is at least 1e-4
            let v = eval(|g| { let n = vector(g, &a); loss_attn(g, n, y) });
            prop_assert!(v >= 1e-4 - 1e-12);
        }

        #[test]
        fn total_is_zero_iff_weighted_components_are(
            c in proptest::array::uniform5(prop_oneof![Just(0.0f64), 0.0f64..10.0]),
            w in proptest::array::uniform5(prop_oneof![Just(0.0f64), 0.0f64..2.0]),
        ) {
            let comps = LossComponents { sent: c[0], tok: c[1], lm: c[2], char: c[3], attn: c[4] };
            let weights = LossWeights { sent: w[0], tok: w[1], lm: w[2], char: w[3], attn: w[4] };
            let total = total_loss(&comps, &weights).unwrap();
            prop_assert!(total >= 0.0);
            let all_zero = (0..5).all(|k| c[k] * w[k] == 0.0);
            prop_assert_eq!(total == 0.0, all_zero);
        }
    }
}
