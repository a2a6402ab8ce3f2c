//! Reader and writer for the extended CONLL-2000 format.
//!
//! Each token is one tab-separated line with six columns:
//!
//! ```text
//! WORD  POS  BIO  #  FUNC  FRAME
//! ```
//!
//! `FUNC` is one of `ARG1`, `SUP`, `PRED` or empty, `FRAME` holds the frame
//! classes of the predicate (`/`-joined when there are several). Sentences are
//! separated by a single blank line.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{self, BufRead};
use std::str::FromStr;

use thiserror::Error;

const COLUMNS: usize = 6;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("sentence {sentence}: {message}")]
    Validation { sentence: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Role label carried in the FUNC column.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    #[default]
    None,
    Arg1,
    Support,
    Predicate,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::None => "",
            Role::Arg1 => "ARG1",
            Role::Support => "SUP",
            Role::Predicate => "PRED",
        }
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "" => Ok(Role::None),
            "ARG1" => Ok(Role::Arg1),
            "SUP" => Ok(Role::Support),
            "PRED" => Ok(Role::Predicate),
            other => Err(format!("unknown FUNC label {other:?}")),
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A chunk tag split into its prefix and phrase label.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Chunk<'a> {
    Begin(&'a str),
    Inside(&'a str),
    Outside,
}

impl<'a> Chunk<'a> {
    /// Parses `O`, `B-X` or `I-X` where `X` is one or more ASCII capitals.
    pub fn parse(tag: &'a str) -> Option<Chunk<'a>> {
        if tag == "O" {
            return Some(Chunk::Outside);
        }
        let (prefix, label) = tag.split_once('-')?;
        if label.is_empty() || !label.bytes().all(|b| b.is_ascii_uppercase()) {
            return None;
        }
        match prefix {
            "B" => Some(Chunk::Begin(label)),
            "I" => Some(Chunk::Inside(label)),
            _ => None,
        }
    }

    pub fn label(self) -> Option<&'a str> {
        match self {
            Chunk::Begin(l) | Chunk::Inside(l) => Some(l),
            Chunk::Outside => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub word: String,
    pub pos: String,
    pub bio: String,
    pub index: usize,
    pub func: Role,
    pub frame: String,
}

impl Token {
    pub fn chunk(&self) -> Chunk<'_> {
        // validated at construction
        Chunk::parse(&self.bio).unwrap_or(Chunk::Outside)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    pub sentence_id: usize,
    pub tokens: Vec<Token>,
}

impl Sentence {
    /// Builds a sentence and checks every token/sentence invariant.
    pub fn new(sentence_id: usize, tokens: Vec<Token>) -> Result<Sentence, CorpusError> {
        let sentence = Sentence {
            sentence_id,
            tokens,
        };
        sentence.validate()?;
        Ok(sentence)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.word.as_str())
    }

    fn invalid(&self, message: impl Into<String>) -> CorpusError {
        CorpusError::Validation {
            sentence: self.sentence_id,
            message: message.into(),
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.tokens.is_empty() {
            return Err(self.invalid("sentence has no tokens"));
        }
        let mut previous: Option<Chunk<'_>> = None;
        let (mut preds, mut args) = (0usize, 0usize);
        for (position, token) in self.tokens.iter().enumerate() {
            if token.index != position {
                return Err(self.invalid(format!(
                    "token {position} carries index {}",
                    token.index
                )));
            }
            if token.word.is_empty() || token.word.contains(['\t', '\n']) {
                return Err(self.invalid(format!("token {position} has an unusable word")));
            }
            let chunk = Chunk::parse(&token.bio).ok_or_else(|| {
                self.invalid(format!("token {position}: malformed BIO tag {:?}", token.bio))
            })?;
            if let Chunk::Inside(label) = chunk {
                let continues = matches!(previous.and_then(Chunk::label), Some(prev) if prev == label);
                if !continues {
                    return Err(self.invalid(format!(
                        "token {position}: {} does not continue a {label} chunk",
                        token.bio
                    )));
                }
            }
            previous = Some(chunk);
            match token.func {
                Role::Predicate => preds += 1,
                Role::Arg1 => args += 1,
                _ => {}
            }
        }
        if preds != 1 {
            return Err(self.invalid(format!("expected exactly one PRED token, found {preds}")));
        }
        if args > 1 {
            return Err(self.invalid(format!("expected at most one ARG1 token, found {args}")));
        }
        Ok(())
    }
}

/// The labeled view of one sentence: where the predicate, its support verbs
/// and its ARG1 sit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub sentence_id: usize,
    pub predicate_index: usize,
    pub support_indices: Vec<usize>,
    pub arg1_index: Option<usize>,
    pub frame_classes: BTreeSet<String>,
}

impl Instance {
    pub fn first_support(&self) -> Option<usize> {
        self.support_indices.first().copied()
    }
}

pub fn extract_instance(sentence: &Sentence) -> Instance {
    let mut predicate_index = 0;
    let mut support_indices = Vec::new();
    let mut arg1_index = None;
    let mut frame_classes = BTreeSet::new();
    for token in &sentence.tokens {
        match token.func {
            Role::Predicate => {
                predicate_index = token.index;
                frame_classes = token
                    .frame
                    .split('/')
                    .filter(|c| !c.is_empty())
                    .map(str::to_owned)
                    .collect();
            }
            Role::Support => support_indices.push(token.index),
            Role::Arg1 => arg1_index = Some(token.index),
            Role::None => {}
        }
    }
    Instance {
        sentence_id: sentence.sentence_id,
        predicate_index,
        support_indices,
        arg1_index,
        frame_classes,
    }
}

fn parse_line(line: &str, line_no: usize) -> Result<Token, CorpusError> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != COLUMNS {
        return Err(CorpusError::Parse {
            line: line_no,
            message: format!("expected {COLUMNS} tab-separated columns, found {}", fields.len()),
        });
    }
    let index = fields[3].parse::<usize>().map_err(|_| CorpusError::Parse {
        line: line_no,
        message: format!("token number {:?} is not a non-negative integer", fields[3]),
    })?;
    let func = fields[4]
        .parse::<Role>()
        .map_err(|message| CorpusError::Parse {
            line: line_no,
            message,
        })?;
    Ok(Token {
        word: fields[0].to_owned(),
        pos: fields[1].to_owned(),
        bio: fields[2].to_owned(),
        index,
        func,
        frame: fields[5].to_owned(),
    })
}

/// Reads every sentence from `reader`. Sentence ids are assigned in file order.
pub fn parse_conll<R: BufRead>(reader: R) -> Result<Vec<Sentence>, CorpusError> {
    let mut sentences = Vec::new();
    let mut pending: Vec<Token> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            if !pending.is_empty() {
                let id = sentences.len();
                sentences.push(Sentence::new(id, std::mem::take(&mut pending))?);
            }
            continue;
        }
        pending.push(parse_line(line, i + 1)?);
    }
    if !pending.is_empty() {
        let id = sentences.len();
        sentences.push(Sentence::new(id, pending)?);
    }
    Ok(sentences)
}

pub fn parse_conll_str(text: &str) -> Result<Vec<Sentence>, CorpusError> {
    parse_conll(text.as_bytes())
}

/// Serializes sentences in canonical form: one line per token, a single blank
/// line between sentences and no trailing blank line.
pub fn write_conll(sentences: &[Sentence]) -> String {
    let mut out = String::new();
    for (i, sentence) in sentences.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for t in &sentence.tokens {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                t.word, t.pos, t.bio, t.index, t.func, t.frame
            ));
        }
    }
    out
}
