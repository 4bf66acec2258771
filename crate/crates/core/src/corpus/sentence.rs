use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// A pre-tokenized sentence with its sentence label and optional token labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    tokens: Vec<String>,
    lowercased: Vec<String>,
    char_seqs: Vec<Vec<char>>,
    token_labels: Option<Vec<bool>>,
    sentence_label: bool,
}

impl Sentence {
    /// Builds a sentence, rejecting empty input, length mismatches and positive
    /// tokens inside a negative sentence.
    pub fn new(
        tokens: Vec<String>,
        token_labels: Option<Vec<bool>>,
        sentence_label: bool,
    ) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::contract("sentence has no tokens"));
        }
        if let Some(t) = tokens
            .iter()
            .find(|t| t.is_empty() || t.chars().any(char::is_whitespace))
        {
            return Err(Error::contract(format!("invalid token surface {t:?}")));
        }
        if let Some(labels) = &token_labels {
            if labels.len() != tokens.len() {
                return Err(Error::contract(format!(
                    "{} token labels for {} tokens",
                    labels.len(),
                    tokens.len()
                )));
            }
            if labels.iter().any(|&l| l) && !sentence_label {
                return Err(Error::Validation {
                    line: 0,
                    msg: format!("positive token in negative sentence: {}", tokens.join(" ")),
                });
            }
        }
        let lowercased = tokens.iter().map(|t| t.to_lowercase()).collect();
        let char_seqs = tokens.iter().map(|t| t.chars().collect()).collect();
        Ok(Sentence {
            tokens,
            lowercased,
            char_seqs,
            token_labels,
            sentence_label,
        })
    }

    /// Sentence whose label is the maximum of its token labels.
    pub fn from_token_labels(tokens: Vec<String>, labels: Vec<bool>) -> Result<Self> {
        let y = labels.iter().any(|&l| l);
        Sentence::new(tokens, Some(labels), y)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn lowercased(&self) -> &[String] {
        &self.lowercased
    }

    pub fn char_seqs(&self) -> &[Vec<char>] {
        &self.char_seqs
    }

    pub fn token_labels(&self) -> Option<&[bool]> {
        self.token_labels.as_deref()
    }

    pub fn sentence_label(&self) -> bool {
        self.sentence_label
    }

    pub fn has_token_labels(&self) -> bool {
        self.token_labels.is_some()
    }

    /// Same sentence with token annotation dropped.
    pub fn without_token_labels(&self) -> Sentence {
        Sentence {
            token_labels: None,
            ..self.clone()
        }
    }
}

/// An ordered collection of sentences.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    pub sentences: Vec<Sentence>,
}

impl Dataset {
    pub fn new(sentences: Vec<Sentence>) -> Self {
        Dataset { sentences }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Sentence> {
        self.sentences.iter()
    }

    pub fn all_token_labeled(&self) -> bool {
        self.sentences.iter().all(Sentence::has_token_labels)
    }

    pub fn any_token_labeled(&self) -> bool {
        self.sentences.iter().any(Sentence::has_token_labels)
    }

    pub fn positive_count(&self) -> usize {
        self.sentences.iter().filter(|s| s.sentence_label()).count()
    }

    /// Writes the dataset in the tab-separated format read by [`parse_tsv`].
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.sentences.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "#sent {}", u8::from(s.sentence_label()));
            for (k, tok) in s.tokens().iter().enumerate() {
                match s.token_labels() {
                    Some(l) => {
                        let _ = writeln!(out, "{tok}\t{}", u8::from(l[k]));
                    }
                    None => {
                        let _ = writeln!(out, "{tok}");
                    }
                }
            }
        }
        out
    }

    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_tsv())?;
        Ok(())
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a Sentence;
    type IntoIter = std::slice::Iter<'a, Sentence>;

    fn into_iter(self) -> Self::IntoIter {
        self.sentences.iter()
    }
}

/// Reads a token-labeled corpus file.
pub fn parse_tsv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::MissingFile {
        path: path.to_path_buf(),
        source,
    })?;
    parse_tsv_str(&text, &path.display().to_string())
}

#[derive(Default)]
struct Block {
    start_line: usize,
    header: Option<bool>,
    tokens: Vec<String>,
    labels: Vec<Option<bool>>,
}

fn parse_label(field: &str, source: &str, line: usize) -> Result<bool> {
    match field {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::Parse {
            path: source.to_string(),
            line,
            msg: format!("label must be 0 or 1, found {other:?}"),
        }),
    }
}

/// Parses corpus text; `source` names the input in error messages.
pub fn parse_tsv_str(text: &str, source: &str) -> Result<Dataset> {
    parse_blocks(text, source, false)
}

/// Reads sentences for prediction. Labels are optional: a block with neither
/// token labels nor a `#sent` header gets sentence label 0.
pub fn parse_unlabeled_tsv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::MissingFile {
        path: path.to_path_buf(),
        source,
    })?;
    parse_blocks(&text, &path.display().to_string(), true)
}

fn parse_blocks(text: &str, source: &str, lenient: bool) -> Result<Dataset> {
    let perr = |line: usize, msg: String| Error::Parse {
        path: source.to_string(),
        line,
        msg,
    };
    let mut sentences = Vec::new();
    let mut block = Block::default();

    let finish = |block: Block, sentences: &mut Vec<Sentence>| -> Result<()> {
        if block.tokens.is_empty() {
            if block.header.is_some() {
                return Err(perr(
                    block.start_line,
                    "sentence header without tokens".into(),
                ));
            }
            return Ok(());
        }
        let labeled = block.labels.iter().filter(|l| l.is_some()).count();
        let token_labels: Option<Vec<bool>> = match labeled {
            0 => None,
            n if n == block.labels.len() => Some(block.labels.iter().map(|l| l.unwrap()).collect()),
            _ => {
                return Err(perr(
                    block.start_line,
                    "sentence mixes labeled and unlabeled tokens".into(),
                ))
            }
        };
        let y = match (block.header, &token_labels) {
            (Some(y), _) => y,
            (None, Some(l)) => l.iter().any(|&v| v),
            (None, None) if lenient => false,
            (None, None) => {
                return Err(perr(
                    block.start_line,
                    "sentence has neither token labels nor a #sent header".into(),
                ))
            }
        };
        let sentence = Sentence::new(block.tokens, token_labels, y).map_err(|e| match e {
            Error::Validation { msg, .. } => Error::Validation {
                line: block.start_line,
                msg,
            },
            other => other,
        })?;
        sentences.push(sentence);
        Ok(())
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            finish(std::mem::take(&mut block), &mut sentences)?;
            continue;
        }
        if block.tokens.is_empty() && block.header.is_none() {
            block.start_line = line_no;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(value) = rest.strip_prefix("sent") {
                let value = value.trim();
                if !block.tokens.is_empty() || block.header.is_some() {
                    return Err(perr(line_no, "#sent header must open its sentence".into()));
                }
                block.header = Some(parse_label(value, source, line_no)?);
            }
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let (surface, label) = match fields.as_slice() {
            [s] => (*s, None),
            [s, l] => (*s, Some(parse_label(l.trim(), source, line_no)?)),
            _ => {
                return Err(perr(
                    line_no,
                    format!(
                        "expected 1 or 2 tab-separated fields, found {}",
                        fields.len()
                    ),
                ))
            }
        };
        if surface.is_empty() || surface.chars().any(char::is_whitespace) {
            return Err(perr(line_no, format!("invalid token surface {surface:?}")));
        }
        block.tokens.push(surface.to_string());
        block.labels.push(label);
    }
    finish(block, &mut sentences)?;
    Ok(Dataset::new(sentences))
}
