use std::collections::BTreeMap;

use crate::autodiff::{ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

/// Layer dimensions of the network, including both vocabulary sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSizes {
    pub word_vocab: usize,
    pub char_vocab: usize,
    pub word_emb: usize,
    pub char_emb: usize,
    /// Per-direction size of the character recurrence.
    pub char_hidden: usize,
    /// Size of the composed character vector `m_i`.
    pub char_proj: usize,
    /// Per-direction size of the word recurrence.
    pub word_hidden: usize,
    /// Size of the contextual token vector `h_i`.
    pub hidden: usize,
    /// Size of the attention pre-activation `e_i`.
    pub attn_hidden: usize,
    /// Size of the tanh layer in the sentence head.
    pub sent_hidden: usize,
    pub lm_hidden: usize,
    pub char_lm_hidden: usize,
}

impl LayerSizes {
    /// Published configuration (300-d words, 100-d char LSTMs, 300-d word
    /// LSTMs, 200-d `h_i`, 100-d `e_i`) for the given vocabulary sizes.
    pub fn standard(word_vocab: usize, char_vocab: usize) -> Self {
        LayerSizes {
            word_vocab,
            char_vocab,
            word_emb: 300,
            char_emb: 50,
            char_hidden: 100,
            char_proj: 50,
            word_hidden: 300,
            hidden: 200,
            attn_hidden: 100,
            sent_hidden: 200,
            lm_hidden: 50,
            char_lm_hidden: 50,
        }
    }

    /// Small configuration for desk-scale experiments on synthetic data.
    pub fn desk(word_vocab: usize, char_vocab: usize) -> Self {
        LayerSizes {
            word_vocab,
            char_vocab,
            word_emb: 16,
            char_emb: 8,
            char_hidden: 12,
            char_proj: 12,
            word_hidden: 24,
            hidden: 16,
            attn_hidden: 8,
            sent_hidden: 16,
            lm_hidden: 12,
            char_lm_hidden: 12,
        }
    }

    pub fn as_table(&self) -> Vec<(&'static str, usize)> {
        vec![
            ("word_vocab", self.word_vocab),
            ("char_vocab", self.char_vocab),
            ("word_emb", self.word_emb),
            ("char_emb", self.char_emb),
            ("char_hidden", self.char_hidden),
            ("char_proj", self.char_proj),
            ("word_hidden", self.word_hidden),
            ("hidden", self.hidden),
            ("attn_hidden", self.attn_hidden),
            ("sent_hidden", self.sent_hidden),
            ("lm_hidden", self.lm_hidden),
            ("char_lm_hidden", self.char_lm_hidden),
        ]
    }

    pub fn from_table(table: &BTreeMap<String, usize>) -> Result<Self> {
        let get = |k: &str| {
            table
                .get(k)
                .copied()
                .ok_or_else(|| Error::Integrity(format!("layer-size table lacks {k}")))
        };
        let sizes = LayerSizes {
            word_vocab: get("word_vocab")?,
            char_vocab: get("char_vocab")?,
            word_emb: get("word_emb")?,
            char_emb: get("char_emb")?,
            char_hidden: get("char_hidden")?,
            char_proj: get("char_proj")?,
            word_hidden: get("word_hidden")?,
            hidden: get("hidden")?,
            attn_hidden: get("attn_hidden")?,
            sent_hidden: get("sent_hidden")?,
            lm_hidden: get("lm_hidden")?,
            char_lm_hidden: get("char_lm_hidden")?,
        };
        sizes.validate()?;
        Ok(sizes)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((name, _)) = self.as_table().into_iter().find(|&(_, v)| v == 0) {
            return Err(Error::config(format!("layer size {name} must be positive")));
        }
        Ok(())
    }
}

/// How the sentence vector fed to the sentence head is composed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    /// Token scores act as attention weights over `h_i`.
    Attention,
    /// Concatenated final states of both word recurrences.
    LastState,
}

impl Architecture {
    pub fn name(self) -> &'static str {
        match self {
            Architecture::Attention => "attention",
            Architecture::LastState => "last",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "attention" | "attn" => Ok(Architecture::Attention),
            "last" => Ok(Architecture::LastState),
            other => Err(Error::config(format!("unknown architecture {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamRole {
    Embedding,
    Weight,
    Bias,
    /// Gate bias of a recurrent cell; the forget-gate block starts at 1.
    RecurrentBias,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    Core,
    WordLm,
    CharLm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub role: ParamRole,
    pub group: ParamGroup,
}

fn dense(out: &mut Vec<ParamSpec>, name: &str, rows: usize, cols: usize, group: ParamGroup) {
    out.push(ParamSpec {
        name: format!("{name}.w"),
        shape: vec![rows, cols],
        role: ParamRole::Weight,
        group,
    });
    out.push(ParamSpec {
        name: format!("{name}.b"),
        shape: vec![rows],
        role: ParamRole::Bias,
        group,
    });
}

fn cell(out: &mut Vec<ParamSpec>, name: &str, input: usize, hidden: usize) {
    out.push(ParamSpec {
        name: format!("{name}.w"),
        shape: vec![4 * hidden, input + hidden],
        role: ParamRole::Weight,
        group: ParamGroup::Core,
    });
    out.push(ParamSpec {
        name: format!("{name}.b"),
        shape: vec![4 * hidden],
        role: ParamRole::RecurrentBias,
        group: ParamGroup::Core,
    });
}

/// Every tensor of the model with its declared shape, in storage order.
/// Language-model heads come last so they can be dropped without renumbering.
pub fn param_specs(sizes: &LayerSizes, arch: Architecture) -> Vec<ParamSpec> {
    let s = sizes;
    let mut out = Vec::new();
    let emb = |name: &str, rows, cols| ParamSpec {
        name: name.to_string(),
        shape: vec![rows, cols],
        role: ParamRole::Embedding,
        group: ParamGroup::Core,
    };
    out.push(emb("word_embeddings", s.word_vocab, s.word_emb));
    out.push(emb("char_embeddings", s.char_vocab, s.char_emb));
    cell(&mut out, "char_lstm_fwd", s.char_emb, s.char_hidden);
    cell(&mut out, "char_lstm_bwd", s.char_emb, s.char_hidden);
    dense(
        &mut out,
        "char_proj",
        s.char_proj,
        2 * s.char_hidden,
        ParamGroup::Core,
    );
    let x_dim = s.word_emb + s.char_proj;
    cell(&mut out, "word_lstm_fwd", x_dim, s.word_hidden);
    cell(&mut out, "word_lstm_bwd", x_dim, s.word_hidden);
    dense(
        &mut out,
        "hidden",
        s.hidden,
        2 * s.word_hidden,
        ParamGroup::Core,
    );
    dense(
        &mut out,
        "attn_hidden",
        s.attn_hidden,
        s.hidden,
        ParamGroup::Core,
    );
    dense(&mut out, "attn_out", 1, s.attn_hidden, ParamGroup::Core);
    let sent_in = match arch {
        Architecture::Attention => s.hidden,
        Architecture::LastState => 2 * s.word_hidden,
    };
    dense(
        &mut out,
        "sent_hidden",
        s.sent_hidden,
        sent_in,
        ParamGroup::Core,
    );
    dense(&mut out, "sent_out", 1, s.sent_hidden, ParamGroup::Core);
    dense(
        &mut out,
        "lm_fwd_hidden",
        s.lm_hidden,
        s.word_hidden,
        ParamGroup::WordLm,
    );
    dense(
        &mut out,
        "lm_fwd_out",
        s.word_vocab,
        s.lm_hidden,
        ParamGroup::WordLm,
    );
    dense(
        &mut out,
        "lm_bwd_hidden",
        s.lm_hidden,
        s.word_hidden,
        ParamGroup::WordLm,
    );
    dense(
        &mut out,
        "lm_bwd_out",
        s.word_vocab,
        s.lm_hidden,
        ParamGroup::WordLm,
    );
    dense(
        &mut out,
        "char_lm_hidden",
        s.char_lm_hidden,
        4 * s.char_hidden,
        ParamGroup::CharLm,
    );
    dense(
        &mut out,
        "char_lm_out",
        s.word_vocab,
        s.char_lm_hidden,
        ParamGroup::CharLm,
    );
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenseIds {
    pub w: ParamId,
    pub b: ParamId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellIds {
    pub w: ParamId,
    pub b: ParamId,
    pub hidden: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WordLmIds {
    pub fwd_hidden: DenseIds,
    pub fwd_out: DenseIds,
    pub bwd_hidden: DenseIds,
    pub bwd_out: DenseIds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CharLmIds {
    pub hidden: DenseIds,
    pub out: DenseIds,
}

/// All learned tensors of the network together with typed handles into them.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub sizes: LayerSizes,
    pub arch: Architecture,
    pub store: ParamStore,
    pub word_embeddings: ParamId,
    pub char_embeddings: ParamId,
    pub char_fwd: CellIds,
    pub char_bwd: CellIds,
    pub char_proj: DenseIds,
    pub word_fwd: CellIds,
    pub word_bwd: CellIds,
    pub hidden: DenseIds,
    pub attn_hidden: DenseIds,
    pub attn_out: DenseIds,
    pub sent_hidden: DenseIds,
    pub sent_out: DenseIds,
    pub word_lm: Option<WordLmIds>,
    pub char_lm: Option<CharLmIds>,
}

impl ModelParams {
    /// Wraps a store, checking that every core tensor exists with its declared
    /// shape. Each language-model group must be either complete or absent.
    pub fn from_store(sizes: LayerSizes, arch: Architecture, store: ParamStore) -> Result<Self> {
        sizes.validate()?;
        let specs = param_specs(&sizes, arch);
        for spec in &specs {
            match store.by_name(&spec.name) {
                Some(t) if t.shape() != spec.shape.as_slice() => {
                    return Err(Error::TensorShape {
                        name: spec.name.clone(),
                        expected: spec.shape.clone(),
                        found: t.shape().to_vec(),
                    })
                }
                Some(_) => {}
                None if spec.group == ParamGroup::Core => {
                    return Err(Error::TensorShape {
                        name: spec.name.clone(),
                        expected: spec.shape.clone(),
                        found: vec![],
                    })
                }
                None => {}
            }
        }
        if let Some((_, name, _)) = store
            .iter()
            .find(|(_, n, _)| !specs.iter().any(|s| s.name == *n))
        {
            return Err(Error::contract(format!("unexpected parameter {name}")));
        }
        let group_present = |g: ParamGroup| -> Result<bool> {
            let members: Vec<&ParamSpec> = specs.iter().filter(|s| s.group == g).collect();
            let present = members
                .iter()
                .filter(|s| store.id(&s.name).is_some())
                .count();
            if present != 0 && present != members.len() {
                return Err(Error::contract("incomplete language-model head parameters"));
            }
            Ok(present != 0)
        };
        let has_word_lm = group_present(ParamGroup::WordLm)?;
        let has_char_lm = group_present(ParamGroup::CharLm)?;

        let id = |n: &str| store.id(n).expect("presence checked");
        let dense = |n: &str| DenseIds {
            w: id(&format!("{n}.w")),
            b: id(&format!("{n}.b")),
        };
        let cell = |n: &str, hidden| CellIds {
            w: id(&format!("{n}.w")),
            b: id(&format!("{n}.b")),
            hidden,
        };
        let word_lm = has_word_lm.then(|| WordLmIds {
            fwd_hidden: dense("lm_fwd_hidden"),
            fwd_out: dense("lm_fwd_out"),
            bwd_hidden: dense("lm_bwd_hidden"),
            bwd_out: dense("lm_bwd_out"),
        });
        let char_lm = has_char_lm.then(|| CharLmIds {
            hidden: dense("char_lm_hidden"),
            out: dense("char_lm_out"),
        });
        Ok(ModelParams {
            sizes,
            arch,
            word_embeddings: id("word_embeddings"),
            char_embeddings: id("char_embeddings"),
            char_fwd: cell("char_lstm_fwd", sizes.char_hidden),
            char_bwd: cell("char_lstm_bwd", sizes.char_hidden),
            char_proj: dense("char_proj"),
            word_fwd: cell("word_lstm_fwd", sizes.word_hidden),
            word_bwd: cell("word_lstm_bwd", sizes.word_hidden),
            hidden: dense("hidden"),
            attn_hidden: dense("attn_hidden"),
            attn_out: dense("attn_out"),
            sent_hidden: dense("sent_hidden"),
            sent_out: dense("sent_out"),
            word_lm,
            char_lm,
            store,
        })
    }

    /// All-zero parameters of the declared shapes.
    pub fn zeros(sizes: LayerSizes, arch: Architecture) -> Result<Self> {
        let mut store = ParamStore::new();
        for spec in param_specs(&sizes, arch) {
            store.insert(spec.name, Tensor::zeros(&spec.shape))?;
        }
        ModelParams::from_store(sizes, arch, store)
    }

    /// Copy without the language-model heads, which inference never reads.
    pub fn without_lm_heads(&self) -> ModelParams {
        let specs = param_specs(&self.sizes, self.arch);
        let store = self.store.filtered(|name| {
            specs
                .iter()
                .any(|s| s.name == name && s.group == ParamGroup::Core)
        });
        ModelParams::from_store(self.sizes, self.arch, store).expect("core parameters retained")
    }

    pub fn has_lm_heads(&self) -> bool {
        self.word_lm.is_some() || self.char_lm.is_some()
    }
}
