//! Ordinal and one-hot vectorization of feature records.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureRecord;

const VOCAB_MAGIC: &str = "# srl-vocabulary v1";
pub const UNKNOWN: &str = "<UNK>";

#[derive(Debug, Error)]
pub enum EncodingError {
    #[error("cannot build a vocabulary from zero records")]
    Empty,
    #[error("record {record} has feature names that differ from record 0 ({detail})")]
    InconsistentNames { record: usize, detail: String },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("unknown encoding {0:?} (expected ordinal or onehot)")]
    UnknownMode(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncodingMode {
    Ordinal,
    Onehot,
}

impl fmt::Display for EncodingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EncodingMode::Ordinal => "ordinal",
            EncodingMode::Onehot => "onehot",
        })
    }
}

impl FromStr for EncodingMode {
    type Err = EncodingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "ordinal" => Ok(EncodingMode::Ordinal),
            "onehot" => Ok(EncodingMode::Onehot),
            _ => Err(EncodingError::UnknownMode(s.to_owned())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct VocabularyData {
    mode: EncodingMode,
    categorical: Vec<(String, Vec<String>)>,
    numeric: Vec<String>,
}

/// Category ids per categorical feature (id 0 is UNKNOWN, observed categories
/// start at 1 in first-seen order) plus the numeric feature order.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(from = "VocabularyData", into = "VocabularyData")]
pub struct Vocabulary {
    data: VocabularyData,
    ids: Vec<HashMap<String, usize>>,
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.data == other.data
    }
}

impl From<VocabularyData> for Vocabulary {
    fn from(data: VocabularyData) -> Self {
        let ids = data
            .categorical
            .iter()
            .map(|(_, cats)| {
                cats.iter()
                    .enumerate()
                    .map(|(i, c)| (c.clone(), i + 1))
                    .collect()
            })
            .collect();
        Vocabulary { data, ids }
    }
}

impl From<Vocabulary> for VocabularyData {
    fn from(v: Vocabulary) -> Self {
        v.data
    }
}

fn name_set(record: &FeatureRecord) -> (Vec<&String>, Vec<&String>) {
    (record.categorical.keys().collect(), record.numeric.keys().collect())
}

pub fn build_vocab(records: &[FeatureRecord], mode: EncodingMode) -> Result<Vocabulary, EncodingError> {
    let first = records.first().ok_or(EncodingError::Empty)?;
    let expected = name_set(first);
    let mut categorical: Vec<(String, Vec<String>)> = first
        .categorical
        .keys()
        .map(|k| (k.clone(), Vec::new()))
        .collect();
    let mut seen: Vec<HashMap<String, usize>> = vec![HashMap::new(); categorical.len()];
    for (i, record) in records.iter().enumerate() {
        if name_set(record) != expected {
            let missing: Vec<&String> = expected
                .0
                .iter()
                .chain(expected.1.iter())
                .filter(|n| !record.contains(n))
                .copied()
                .collect();
            return Err(EncodingError::InconsistentNames {
                record: i,
                detail: format!("missing {missing:?}"),
            });
        }
        for (slot, value) in record.categorical.values().enumerate() {
            let (_, cats) = &mut categorical[slot];
            if !seen[slot].contains_key(value) {
                cats.push(value.clone());
                seen[slot].insert(value.clone(), cats.len());
            }
        }
    }
    let numeric = first.numeric.keys().cloned().collect();
    Ok(VocabularyData {
        mode,
        categorical,
        numeric,
    }
    .into())
}

impl Vocabulary {
    pub fn mode(&self) -> EncodingMode {
        self.data.mode
    }

    pub fn categorical_names(&self) -> impl Iterator<Item = &str> {
        self.data.categorical.iter().map(|(n, _)| n.as_str())
    }

    pub fn numeric_names(&self) -> &[String] {
        &self.data.numeric
    }

    /// Id of `category` under feature `name`; 0 when unseen.
    pub fn id(&self, name: &str, category: &str) -> Option<usize> {
        let slot = self.data.categorical.iter().position(|(n, _)| n == name)?;
        Some(self.ids[slot].get(category).copied().unwrap_or(0))
    }

    /// Number of ids for feature slot `slot`, UNKNOWN included.
    fn block(&self, slot: usize) -> usize {
        self.data.categorical[slot].1.len() + 1
    }

    pub fn width(&self) -> usize {
        let categorical = match self.data.mode {
            EncodingMode::Ordinal => self.data.categorical.len(),
            EncodingMode::Onehot => (0..self.data.categorical.len()).map(|s| self.block(s)).sum(),
        };
        categorical + self.data.numeric.len()
    }

    /// Human-readable name of every output column.
    pub fn column_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.width());
        for (name, cats) in &self.data.categorical {
            match self.data.mode {
                EncodingMode::Ordinal => names.push(name.clone()),
                EncodingMode::Onehot => {
                    names.push(format!("{name}={UNKNOWN}"));
                    names.extend(cats.iter().map(|c| format!("{name}={c}")));
                }
            }
        }
        names.extend(self.data.numeric.iter().cloned());
        names
    }

    /// Unseen categories (and absent categorical features) map to UNKNOWN;
    /// absent numeric features read as 0.
    pub fn vectorize(&self, record: &FeatureRecord) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.width());
        for (slot, (name, _)) in self.data.categorical.iter().enumerate() {
            let id = record
                .categorical
                .get(name)
                .and_then(|v| self.ids[slot].get(v).copied())
                .unwrap_or(0);
            match self.data.mode {
                EncodingMode::Ordinal => out.push(id as f64),
                EncodingMode::Onehot => {
                    let start = out.len();
                    out.resize(start + self.block(slot), 0.0);
                    out[start + id] = 1.0;
                }
            }
        }
        for name in &self.data.numeric {
            out.push(record.numeric.get(name).copied().unwrap_or(0.0));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{VOCAB_MAGIC}\nmode {}\n", self.data.mode);
        for (name, cats) in &self.data.categorical {
            out.push_str("cat\t");
            out.push_str(name);
            for c in cats {
                out.push('\t');
                out.push_str(c);
            }
            out.push('\n');
        }
        for name in &self.data.numeric {
            out.push_str(&format!("num\t{name}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Vocabulary, EncodingError> {
        let bad = |line: usize, message: &str| EncodingError::Format {
            line,
            message: message.to_owned(),
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, l)) if l == VOCAB_MAGIC => {}
            _ => return Err(bad(1, "missing vocabulary header")),
        }
        let mode = match lines.next() {
            Some((_, l)) if l.starts_with("mode ") => l[5..].parse()?,
            _ => return Err(bad(2, "expected 'mode <ordinal|onehot>'")),
        };
        let mut categorical = Vec::new();
        let mut numeric = Vec::new();
        for (n, line) in lines {
            let mut fields = line.split('\t');
            match (fields.next(), fields.next()) {
                (Some("cat"), Some(name)) => {
                    categorical.push((name.to_owned(), fields.map(str::to_owned).collect()))
                }
                (Some("num"), Some(name)) => numeric.push(name.to_owned()),
                _ => return Err(bad(n, "expected a cat or num entry")),
            }
        }
        Ok(VocabularyData {
            mode,
            categorical,
            numeric,
        }
        .into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(cats: &[(&str, &str)], nums: &[(&str, f64)]) -> FeatureRecord {
        let mut r = FeatureRecord::new();
        for (k, v) in cats {
            r.set_categorical(*k, *v).unwrap();
        }
        for (k, v) in nums {
            r.set_numeric(*k, *v).unwrap();
        }
        r
    }

    #[test]
    fn first_seen_ids() {
        let records: Vec<_> = ["NN", "VBD", "NN"]
            .iter()
            .map(|p| record(&[("pos", p)], &[]))
            .collect();
        let v = build_vocab(&records, EncodingMode::Ordinal).unwrap();
        assert_eq!(v.id("pos", "NN"), Some(1));
        assert_eq!(v.id("pos", "VBD"), Some(2));
        assert_eq!(v.id("pos", "JJ"), Some(0));
        assert_eq!(v.vectorize(&records[0]), [1.0]);
    }

    #[test]
    fn unseen_category_is_unknown_slot() {
        let records: Vec<_> = ["NN", "VBD"]
            .iter()
            .map(|p| record(&[("pos", p)], &[]))
            .collect();
        let v = build_vocab(&records, EncodingMode::Onehot).unwrap();
        assert_eq!(v.vectorize(&record(&[("pos", "JJ")], &[])), [1.0, 0.0, 0.0]);
        assert_eq!(v.vectorize(&record(&[("pos", "VBD")], &[])), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn empty_and_inconsistent() {
        assert!(matches!(
            build_vocab(&[], EncodingMode::Onehot),
            Err(EncodingError::Empty)
        ));
        let records = vec![
            record(&[("a", "x")], &[("n", 1.0)]),
            record(&[("a", "y")], &[("n", 2.0)]),
            record(&[("a", "x")], &[]),
        ];
        assert!(matches!(
            build_vocab(&records, EncodingMode::Onehot),
            Err(EncodingError::InconsistentNames { record: 2, .. })
        ));
    }

    #[test]
    fn onehot_width_formula() {
        // categorical features with 2, 3 and 4 categories plus two numerics
        let mut records = Vec::new();
        for i in 0..4 {
            let a = ["a0", "a1"][i % 2];
            let b = ["b0", "b1", "b2"][i % 3];
            let c = ["c0", "c1", "c2", "c3"][i];
            records.push(record(&[("a", a), ("b", b), ("c", c)], &[("x", i as f64), ("y", 0.5)]));
        }
        let v = build_vocab(&records, EncodingMode::Onehot).unwrap();
        assert_eq!(v.width(), (2 + 3 + 4) + 3 + 2);
        assert_eq!(v.column_names().len(), v.width());
        let o = build_vocab(&records, EncodingMode::Ordinal).unwrap();
        assert_eq!(o.width(), 3 + 2);
    }

    #[test]
    fn text_and_json_round_trip() {
        let records = vec![
            record(&[("pos", "NN"), ("w", "a b")], &[("n", 1.0)]),
            record(&[("pos", "VBD"), ("w", "c")], &[("n", 2.0)]),
        ];
        let v = build_vocab(&records, EncodingMode::Onehot).unwrap();
        let back = Vocabulary::from_text(&v.to_text()).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.vectorize(&records[1]), v.vectorize(&records[1]));
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(back.vectorize(&records[0]), v.vectorize(&records[0]));
        assert!(Vocabulary::from_text("# srl-vocabulary v1\nmode sparse\n").is_err());
    }

    fn arb_records() -> impl Strategy<Value = Vec<FeatureRecord>> {
        let row = (0usize..4, 0usize..6, -3.0f64..3.0);
        proptest::collection::vec(row, 1..30).prop_map(|rows| {
            rows.into_iter()
                .map(|(a, b, x)| {
                    record(
                        &[("a", &format!("a{a}")), ("b", &format!("b{b}"))],
                        &[("x", x)],
                    )
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn encoding_invariants(train in arb_records(), probe in arb_records()) {
            let hot = build_vocab(&train, EncodingMode::Onehot).unwrap();
            let ord = build_vocab(&train, EncodingMode::Ordinal).unwrap();
            for r in train.iter().chain(&probe) {
                let h = hot.vectorize(r);
                let o = ord.vectorize(r);
                prop_assert_eq!(h.len(), hot.width());
                prop_assert_eq!(o.len(), ord.width());
                let mut start = 0;
                for (slot, name) in hot.categorical_names().enumerate() {
                    let size = hot.block(slot);
                    let block = &h[start..start + size];
                    prop_assert_eq!(block.iter().sum::<f64>(), 1.0);
                    prop_assert!(block.iter().all(|v| *v == 0.0 || *v == 1.0));
                    let id = o[slot];
                    prop_assert!(id >= 0.0 && id.fract() == 0.0 && (id as usize) < size);
                    prop_assert_eq!(block[id as usize], 1.0, "{}", name);
                    start += size;
                }
                prop_assert_eq!(h[start..].iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                    o[2..].iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            }
        }
    }
}
