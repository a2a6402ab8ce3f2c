//! ARG1 scoring: head-word matching with the proper-name allowance, and
//! precision/recall/F1 over per-sentence predictions.

mod ablation;
mod report;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{Chunk, Instance, Sentence};

pub use ablation::{ablation_report, AblationMask, AblationRow, MaskKind};
pub use report::{render_csv, render_table};

/// Predicted ARG1 tokens per sentence id.
pub type Predictions = BTreeMap<usize, BTreeSet<usize>>;

/// Scores in percent plus the raw counts behind them.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PrfScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

/// Harmonic mean of two percentages; 0 when both are 0.
pub fn f1_from_pr(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

impl PrfScores {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> PrfScores {
        let pct = |num: usize, den: usize| {
            if den > 0 {
                100.0 * num as f64 / den as f64
            } else {
                0.0
            }
        };
        let precision = pct(tp, tp + fp);
        let recall = pct(tp, tp + fn_);
        PrfScores {
            precision,
            recall,
            f1: f1_from_pr(precision, recall),
            tp,
            fp,
            fn_,
        }
    }
}

/// Extent of the maximal `B-NP I-NP*` chunk holding `idx`.
fn np_chunk(sentence: &Sentence, idx: usize) -> Option<(usize, usize)> {
    let is_np = |i: usize| sentence.tokens[i].chunk().label() == Some("NP");
    let is_inside = |i: usize| sentence.tokens[i].chunk() == Chunk::Inside("NP");
    if !is_np(idx) {
        return None;
    }
    let mut start = idx;
    while start > 0 && is_inside(start) {
        start -= 1;
    }
    let mut end = idx + 1;
    while end < sentence.len() && is_inside(end) {
        end += 1;
    }
    Some((start, end))
}

/// Exact head match, or both tokens are proper-noun words inside the same
/// NP chunk.
pub fn match_arg1(sentence: &Sentence, gold_idx: usize, predicted_idx: usize) -> bool {
    if gold_idx == predicted_idx {
        return true;
    }
    let proper = |i: usize| sentence.tokens[i].pos.starts_with("NNP");
    proper(gold_idx)
        && proper(predicted_idx)
        && np_chunk(sentence, gold_idx).is_some()
        && np_chunk(sentence, gold_idx) == np_chunk(sentence, predicted_idx)
}

/// Counts one true positive at most per sentence; every predicted token that
/// does not match the gold ARG1 is a false positive.
pub fn prf(predictions: &Predictions, gold: &[Instance], sentences: &[Sentence]) -> PrfScores {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (instance, sentence) in gold.iter().zip(sentences) {
        debug_assert_eq!(instance.sentence_id, sentence.sentence_id);
        let empty = BTreeSet::new();
        let predicted = predictions.get(&sentence.sentence_id).unwrap_or(&empty);
        let mut found = false;
        for &p in predicted {
            match instance.arg1_index {
                Some(g) if match_arg1(sentence, g, p) => found = true,
                _ => fp += 1,
            }
        }
        match (instance.arg1_index, found) {
            (Some(_), true) => tp += 1,
            (Some(_), false) => fn_ += 1,
            (None, _) => {}
        }
    }
    PrfScores::from_counts(tp, fp, fn_)
}
