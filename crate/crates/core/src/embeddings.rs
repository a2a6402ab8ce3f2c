//! Word-vector features: n-gram and "slash" (sentence minus n-gram) mean
//! embeddings compared by cosine similarity against averages fitted on the
//! gold ARG1 positions of a training corpus.

use std::collections::HashMap;
use std::fmt;
use std::io::BufRead;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Instance, Sentence};
use crate::features::FeatureRecord;

const PROFILE_MAGIC: &str = "# srl-average-profile v1";

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("line {line}: {message}")]
    Load { line: usize, message: String },
    #[error("vector file is empty")]
    Empty,
    #[error("training set is empty")]
    NoTraining,
    #[error("training sentence {0} has no ARG1")]
    MissingArg1(usize),
    #[error("profile dimension {profile} does not match vector dimension {store}")]
    DimensionMismatch { profile: usize, store: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct VectorStore {
    dimension: usize,
    table: HashMap<String, Vec<f64>>,
}

impl VectorStore {
    pub fn new(dimension: usize) -> Self {
        VectorStore {
            dimension,
            table: HashMap::new(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Panics if the vector has the wrong dimension.
    pub fn insert(&mut self, word: impl Into<String>, vector: Vec<f64>) {
        assert_eq!(vector.len(), self.dimension, "vector dimension");
        self.table.insert(word.into(), vector);
    }

    /// Exact lookup without the lowercase fallback.
    pub fn contains(&self, word: &str) -> bool {
        self.table.contains_key(word)
    }

    /// Case-sensitive lookup, falling back to the lowercased word.
    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.table
            .get(word)
            .or_else(|| self.table.get(&word.to_lowercase()))
            .map(Vec::as_slice)
    }

    pub fn to_text(&self) -> String {
        let mut words: Vec<&String> = self.table.keys().collect();
        words.sort();
        let mut out = format!("{} {}\n", words.len(), self.dimension);
        for w in words {
            let values: Vec<String> = self.table[w].iter().map(f64::to_string).collect();
            out.push_str(&format!("{w} {}\n", values.join(" ")));
        }
        out
    }
}

/// Reads whitespace-separated `word v1 .. vd` records, with an optional
/// `count dim` header line.
pub fn load_vectors<R: BufRead>(reader: R) -> Result<VectorStore, EmbeddingError> {
    let mut dimension: Option<usize> = None;
    let mut table = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if line_no == 1 && fields.len() == 2 {
            if let (Ok(_), Ok(dim)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                if dim == 0 {
                    return Err(EmbeddingError::Load {
                        line: line_no,
                        message: "header declares dimension 0".into(),
                    });
                }
                dimension = Some(dim);
                continue;
            }
        }
        let values = fields[1..]
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| EmbeddingError::Load {
                line: line_no,
                message: format!("bad number: {e}"),
            })?;
        if values.is_empty() {
            return Err(EmbeddingError::Load {
                line: line_no,
                message: format!("word {:?} has no vector", fields[0]),
            });
        }
        match dimension {
            Some(d) if d != values.len() => {
                return Err(EmbeddingError::Load {
                    line: line_no,
                    message: format!("expected {d} values, found {}", values.len()),
                })
            }
            Some(_) => {}
            None => dimension = Some(values.len()),
        }
        table.insert(fields[0].to_owned(), values);
    }
    match dimension {
        Some(dimension) if !table.is_empty() => Ok(VectorStore { dimension, table }),
        _ => Err(EmbeddingError::Empty),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NgramKind {
    Back3,
    Back2,
    Head,
    Fwd2,
    Fwd3,
}

impl NgramKind {
    pub const ALL: [NgramKind; 5] = [
        NgramKind::Back3,
        NgramKind::Back2,
        NgramKind::Head,
        NgramKind::Fwd2,
        NgramKind::Fwd3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NgramKind::Back3 => "back3",
            NgramKind::Back2 => "back2",
            NgramKind::Head => "head",
            NgramKind::Fwd2 => "fwd2",
            NgramKind::Fwd3 => "fwd3",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedMode {
    Normal,
    Slash,
}

impl EmbedMode {
    pub const ALL: [EmbedMode; 2] = [EmbedMode::Normal, EmbedMode::Slash];

    pub fn name(self) -> &'static str {
        match self {
            EmbedMode::Normal => "normal",
            EmbedMode::Slash => "slash",
        }
    }
}

pub fn feature_name(kind: NgramKind, mode: EmbedMode) -> String {
    format!("emb_{}_{}", kind.name(), mode.name())
}

/// The five n-gram spans around a candidate, clipped at sentence edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CandidateNgrams {
    pub back3: Range<usize>,
    pub back2: Range<usize>,
    pub head: Range<usize>,
    pub fwd2: Range<usize>,
    pub fwd3: Range<usize>,
}

impl CandidateNgrams {
    pub fn get(&self, kind: NgramKind) -> Range<usize> {
        match kind {
            NgramKind::Back3 => self.back3.clone(),
            NgramKind::Back2 => self.back2.clone(),
            NgramKind::Head => self.head.clone(),
            NgramKind::Fwd2 => self.fwd2.clone(),
            NgramKind::Fwd3 => self.fwd3.clone(),
        }
    }

    pub fn words<'s>(&self, sentence: &'s Sentence, kind: NgramKind) -> Vec<&'s str> {
        sentence.tokens[self.get(kind)]
            .iter()
            .map(|t| t.word.as_str())
            .collect()
    }
}

pub fn candidate_ngrams(sentence: &Sentence, idx: usize) -> CandidateNgrams {
    let n = sentence.len();
    CandidateNgrams {
        back3: idx.saturating_sub(2)..idx + 1,
        back2: idx.saturating_sub(1)..idx + 1,
        head: idx..idx + 1,
        fwd2: idx..(idx + 2).min(n),
        fwd3: idx..(idx + 3).min(n),
    }
}

fn mean_of<'a>(vectors: impl Iterator<Item = &'a [f64]>, dimension: usize) -> Vec<f64> {
    let mut sum = vec![0.0; dimension];
    let mut count = 0usize;
    for v in vectors {
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
        count += 1;
    }
    if count > 0 {
        for s in &mut sum {
            *s /= count as f64;
        }
    }
    sum
}

/// NORMAL: mean vector of the words inside `span`. SLASH: mean vector of every
/// other word in the sentence. Unknown words are skipped; nothing found gives
/// the zero vector.
pub fn embed_span(
    sentence: &Sentence,
    span: Range<usize>,
    mode: EmbedMode,
    store: &VectorStore,
) -> Vec<f64> {
    let found = sentence
        .tokens
        .iter()
        .enumerate()
        .filter(|(i, _)| span.contains(i) == (mode == EmbedMode::Normal))
        .filter_map(|(_, t)| store.get(&t.word));
    mean_of(found, store.dimension())
}

fn is_zero(v: &[f64]) -> bool {
    v.iter().all(|x| *x == 0.0)
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub kind: NgramKind,
    pub mode: EmbedMode,
    pub vector: Vec<f64>,
    pub count: usize,
}

/// Ten average embeddings, one per (n-gram kind, mode).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AverageProfile {
    pub dimension: usize,
    pub entries: Vec<ProfileEntry>,
}

fn slots() -> impl Iterator<Item = (NgramKind, EmbedMode)> {
    NgramKind::ALL
        .into_iter()
        .flat_map(|k| EmbedMode::ALL.into_iter().map(move |m| (k, m)))
}

impl AverageProfile {
    pub fn get(&self, kind: NgramKind, mode: EmbedMode) -> &ProfileEntry {
        self.entries
            .iter()
            .find(|e| e.kind == kind && e.mode == mode)
            .expect("profile holds every slot")
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{PROFILE_MAGIC}\ndim {}\n", self.dimension);
        for e in &self.entries {
            let values: Vec<String> = e.vector.iter().map(f64::to_string).collect();
            out.push_str(&format!(
                "{}\t{}\t{}\n",
                feature_name(e.kind, e.mode),
                e.count,
                values.join(" ")
            ));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<AverageProfile, EmbeddingError> {
        let bad = |line: usize, message: &str| EmbeddingError::Load {
            line,
            message: message.to_owned(),
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, l)) if l.trim() == PROFILE_MAGIC => {}
            _ => return Err(bad(1, "missing profile header")),
        }
        let dimension = match lines.next() {
            Some((n, l)) => l
                .strip_prefix("dim ")
                .and_then(|d| d.trim().parse::<usize>().ok())
                .ok_or_else(|| bad(n, "expected 'dim <n>'"))?,
            None => return Err(bad(2, "missing dimension line")),
        };
        let mut entries = Vec::new();
        for (kind, mode) in slots() {
            let (n, line) = lines.next().ok_or_else(|| bad(0, "profile is truncated"))?;
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 || fields[0] != feature_name(kind, mode) {
                return Err(bad(n, &format!("expected entry {}", feature_name(kind, mode))));
            }
            let count = fields[1].parse().map_err(|_| bad(n, "bad count"))?;
            let vector = fields[2]
                .split_whitespace()
                .map(str::parse::<f64>)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| bad(n, "bad vector value"))?;
            if vector.len() != dimension {
                return Err(bad(n, "vector length differs from dim"));
            }
            entries.push(ProfileEntry {
                kind,
                mode,
                vector,
                count,
            });
        }
        Ok(AverageProfile { dimension, entries })
    }
}

/// Averages each of the ten embeddings over the gold ARG1 of every training
/// sentence. Zero vectors (nothing found in the store) are left out.
pub fn fit_averages<'a, I>(training: I, store: &VectorStore) -> Result<AverageProfile, EmbeddingError>
where
    I: IntoIterator<Item = (&'a Sentence, &'a Instance)>,
{
    let dim = store.dimension();
    let mut sums: Vec<(Vec<f64>, usize)> = slots().map(|_| (vec![0.0; dim], 0)).collect();
    let mut seen = 0usize;
    for (sentence, instance) in training {
        seen += 1;
        let arg1 = instance
            .arg1_index
            .ok_or(EmbeddingError::MissingArg1(instance.sentence_id))?;
        let ngrams = candidate_ngrams(sentence, arg1);
        for ((kind, mode), (sum, count)) in slots().zip(sums.iter_mut()) {
            let v = embed_span(sentence, ngrams.get(kind), mode, store);
            if is_zero(&v) {
                continue;
            }
            for (s, x) in sum.iter_mut().zip(&v) {
                *s += x;
            }
            *count += 1;
        }
    }
    if seen == 0 {
        return Err(EmbeddingError::NoTraining);
    }
    let entries = slots()
        .zip(sums)
        .map(|((kind, mode), (mut vector, count))| {
            if count > 0 {
                vector.iter_mut().for_each(|x| *x /= count as f64);
            }
            ProfileEntry {
                kind,
                mode,
                vector,
                count,
            }
        })
        .collect();
    Ok(AverageProfile {
        dimension: dim,
        entries,
    })
}

/// Ten cosine similarities between the candidate's embeddings and the
/// profile averages.
pub fn cosine_features(
    sentence: &Sentence,
    idx: usize,
    profile: &AverageProfile,
    store: &VectorStore,
) -> Result<FeatureRecord, EmbeddingError> {
    if profile.dimension != store.dimension() {
        return Err(EmbeddingError::DimensionMismatch {
            profile: profile.dimension,
            store: store.dimension(),
        });
    }
    let ngrams = candidate_ngrams(sentence, idx);
    let mut record = FeatureRecord::new();
    for (kind, mode) in slots() {
        let v = embed_span(sentence, ngrams.get(kind), mode, store);
        let value = cosine(&v, &profile.get(kind, mode).vector);
        record.numeric.insert(feature_name(kind, mode), value);
    }
    Ok(record)
}

impl fmt::Display for NgramKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
