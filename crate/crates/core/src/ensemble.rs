//! Two-view ensembling of per-token ARG1 probabilities.
//!
//! Score files are TSV with the header `sentence_id\ttoken_index\tscore`.

use std::collections::BTreeMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{extract_instance, Sentence};
use crate::eval::Predictions;

pub const SCORE_HEADER: &str = "sentence_id\ttoken_index\tscore";
/// Probabilities are clipped into [EPS, 1 − EPS] before taking logs.
const LOG_EPS: f64 = 1e-12;
const WEIGHT_STEPS: usize = 100;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("row {row}: {message}")]
    Format { row: usize, message: String },
    #[error("row {row}: score {score} outside [0, 1]")]
    Range { row: usize, score: f64 },
    #[error("row {row}: duplicate key ({sentence}, {token})")]
    Duplicate {
        row: usize,
        sentence: usize,
        token: usize,
    },
    #[error("{table} is missing {} keys, first {:?}", missing.len(), missing.first())]
    Coverage {
        table: String,
        missing: Vec<(usize, usize)>,
    },
    #[error("weights must be non-negative and sum to 1 (got {0}, {1})")]
    BadWeights(f64, f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreTable {
    pub source: String,
    rows: BTreeMap<(usize, usize), f64>,
}

impl ScoreTable {
    pub fn new(source: impl Into<String>) -> Self {
        ScoreTable {
            source: source.into(),
            rows: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, sentence: usize, token: usize, score: f64) -> Result<(), EnsembleError> {
        let row = self.rows.len() + 1;
        if !(0.0..=1.0).contains(&score) {
            return Err(EnsembleError::Range { row, score });
        }
        if self.rows.insert((sentence, token), score).is_some() {
            return Err(EnsembleError::Duplicate {
                row,
                sentence,
                token,
            });
        }
        Ok(())
    }

    pub fn get(&self, sentence: usize, token: usize) -> Option<f64> {
        self.rows.get(&(sentence, token)).copied()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows in (sentence, token) order.
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.rows.iter().map(|(k, v)| (*k, *v))
    }

    fn missing_from(&self, keys: impl Iterator<Item = (usize, usize)>) -> Vec<(usize, usize)> {
        keys.filter(|k| !self.rows.contains_key(k)).collect()
    }

    fn require(&self, keys: impl Iterator<Item = (usize, usize)>) -> Result<(), EnsembleError> {
        let missing = self.missing_from(keys);
        if missing.is_empty() {
            Ok(())
        } else {
            Err(EnsembleError::Coverage {
                table: self.source.clone(),
                missing,
            })
        }
    }
}

/// Reads a score file. Row numbers in errors are file line numbers.
pub fn read_scores<R: BufRead>(reader: R, source: &str) -> Result<ScoreTable, EnsembleError> {
    let mut table = ScoreTable::new(source);
    let mut lines = reader.lines();
    match lines.next().transpose()? {
        Some(header) if header.trim_end_matches('\r') == SCORE_HEADER => {}
        _ => {
            return Err(EnsembleError::Format {
                row: 1,
                message: format!("expected header {SCORE_HEADER:?}"),
            })
        }
    }
    for (i, line) in lines.enumerate() {
        let row = i + 2;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let bad = |message: String| EnsembleError::Format { row, message };
        if fields.len() != 3 {
            return Err(bad(format!("expected 3 columns, found {}", fields.len())));
        }
        let sentence = fields[0]
            .parse()
            .map_err(|_| bad(format!("bad sentence id {:?}", fields[0])))?;
        let token = fields[1]
            .parse()
            .map_err(|_| bad(format!("bad token index {:?}", fields[1])))?;
        let score: f64 = fields[2]
            .parse()
            .map_err(|_| bad(format!("bad score {:?}", fields[2])))?;
        if !(0.0..=1.0).contains(&score) {
            return Err(EnsembleError::Range { row, score });
        }
        if table.rows.insert((sentence, token), score).is_some() {
            return Err(EnsembleError::Duplicate {
                row,
                sentence,
                token,
            });
        }
    }
    Ok(table)
}

pub fn write_scores(table: &ScoreTable) -> String {
    let mut out = String::with_capacity(16 * (table.len() + 1));
    out.push_str(SCORE_HEADER);
    out.push('\n');
    for ((s, t), v) in table.iter() {
        out.push_str(&format!("{s}\t{t}\t{v}\n"));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleWeights {
    pub w_a: f64,
    pub w_b: f64,
}

impl EnsembleWeights {
    pub fn new(w_a: f64) -> Result<Self, EnsembleError> {
        let w = EnsembleWeights { w_a, w_b: 1.0 - w_a };
        w.check()?;
        Ok(w)
    }

    pub fn check(&self) -> Result<(), EnsembleError> {
        if self.w_a < 0.0 || self.w_b < 0.0 || (self.w_a + self.w_b - 1.0).abs() > 1e-9 {
            return Err(EnsembleError::BadWeights(self.w_a, self.w_b));
        }
        Ok(())
    }
}

fn dev_keys(dev: &[Sentence]) -> impl Iterator<Item = ((usize, usize), bool)> + '_ {
    dev.iter().flat_map(|s| {
        let arg1 = extract_instance(s).arg1_index;
        (0..s.len()).map(move |t| ((s.sentence_id, t), arg1 == Some(t)))
    })
}

/// Mean binary cross-entropy of `w_a·a + (1 − w_a)·b` against the gold ARG1
/// labels of `dev`.
pub fn ensemble_loss(
    a: &ScoreTable,
    b: &ScoreTable,
    w_a: f64,
    dev: &[Sentence],
) -> Result<f64, EnsembleError> {
    a.require(dev_keys(dev).map(|(k, _)| k))?;
    b.require(dev_keys(dev).map(|(k, _)| k))?;
    let (mut total, mut n) = (0.0, 0usize);
    for ((s, t), gold) in dev_keys(dev) {
        let p = w_a * a.rows[&(s, t)] + (1.0 - w_a) * b.rows[&(s, t)];
        let p = p.clamp(LOG_EPS, 1.0 - LOG_EPS);
        total -= if gold { p.ln() } else { (1.0 - p).ln() };
        n += 1;
    }
    Ok(if n > 0 { total / n as f64 } else { 0.0 })
}

/// Picks `w_a` on the grid 0.00, 0.01, …, 1.00 minimising dev log-loss.
/// Equal losses resolve toward the larger `w_a`.
pub fn fit_weights(
    a: &ScoreTable,
    b: &ScoreTable,
    dev: &[Sentence],
) -> Result<EnsembleWeights, EnsembleError> {
    let mut best: Option<(f64, f64)> = None;
    for step in (0..=WEIGHT_STEPS).rev() {
        let w = step as f64 / WEIGHT_STEPS as f64;
        let loss = ensemble_loss(a, b, w, dev)?;
        if best.is_none_or(|(_, l)| loss < l - 1e-12) {
            best = Some((w, loss));
        }
    }
    let (w, _) = best.expect("grid is non-empty");
    EnsembleWeights::new(w)
}

pub fn combine(
    a: &ScoreTable,
    b: &ScoreTable,
    weights: EnsembleWeights,
) -> Result<ScoreTable, EnsembleError> {
    weights.check()?;
    a.require(b.rows.keys().copied())?;
    b.require(a.rows.keys().copied())?;
    let rows = a
        .rows
        .iter()
        .map(|(k, sa)| {
            let v = weights.w_a * sa + weights.w_b * b.rows[k];
            (*k, v.clamp(0.0, 1.0))
        })
        .collect();
    Ok(ScoreTable {
        source: "ensemble".into(),
        rows,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DecodeMode {
    /// Every token scoring at least τ.
    Threshold(f64),
    /// The single best token per sentence, lowest index on ties.
    Argmax,
}

pub fn decode(table: &ScoreTable, mode: DecodeMode) -> Predictions {
    let mut out: Predictions = BTreeMap::new();
    let mut best: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
    for ((s, t), v) in table.iter() {
        let chosen = out.entry(s).or_default();
        match mode {
            DecodeMode::Threshold(tau) => {
                if v >= tau {
                    chosen.insert(t);
                }
            }
            DecodeMode::Argmax => {
                let entry = best.entry(s).or_insert((t, v));
                if v > entry.1 {
                    *entry = (t, v);
                }
            }
        }
    }
    for (s, (t, _)) in best {
        out.entry(s).or_default().insert(t);
    }
    out
}
