//! Per-candidate feature families: context window, token distances, chunk
//! paths, tree path flags and predicate classes.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Chunk, Instance, Sentence};
use crate::parsetree::{tree_path, ParseTree, TreeError};

pub const PAD: &str = "<PAD>";

/// Class labels that get a presence feature on the partitive task.
pub const PREDICATE_CLASSES: &[&str] = &[
    "GROUP",
    "MERONYM",
    "PART",
    "QUANT",
    "SHARE",
    "BOOK-CHAPTER",
    "BORDER",
    "CONTAINER",
    "DIVISION",
    "ENVIRONMENT",
    "INSTANCE-OF-SET",
    "NOM",
    "NOMADJ",
    "PART-OF-BODY-FURNITURE-ETC",
    "WORK-OF-ART",
];

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("feature {0:?} defined twice")]
    Duplicate(String),
    #[error("no path between a token and itself (token {0})")]
    EmptyPath(usize),
    #[error("unknown feature group {0:?}")]
    UnknownGroup(String),
    #[error("unknown task {0:?}")]
    UnknownTask(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Percent,
    Partitive,
}

impl FromStr for Task {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "percent" | "%" => Ok(Task::Percent),
            "partitive" => Ok(Task::Partitive),
            _ => Err(FeatureError::UnknownTask(s.to_owned())),
        }
    }
}

/// Named feature families, the unit of ablation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureGroup {
    Window,
    Path,
    BasicEmbed,
    SlashEmbed,
    Class,
    Distance,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 6] = [
        FeatureGroup::Window,
        FeatureGroup::Path,
        FeatureGroup::BasicEmbed,
        FeatureGroup::SlashEmbed,
        FeatureGroup::Class,
        FeatureGroup::Distance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureGroup::Window => "window",
            FeatureGroup::Path => "path",
            FeatureGroup::BasicEmbed => "basic-embed",
            FeatureGroup::SlashEmbed => "slash-embed",
            FeatureGroup::Class => "class",
            FeatureGroup::Distance => "distance",
        }
    }

    /// Resolves a group name; `embed` expands to both embedding groups.
    pub fn parse_name(name: &str) -> Result<Vec<FeatureGroup>, FeatureError> {
        let name = name.trim();
        if name == "embed" {
            return Ok(vec![FeatureGroup::BasicEmbed, FeatureGroup::SlashEmbed]);
        }
        FeatureGroup::ALL
            .into_iter()
            .find(|g| g.name() == name)
            .map(|g| vec![g])
            .ok_or_else(|| FeatureError::UnknownGroup(name.to_owned()))
    }
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Categorical and numeric features of one candidate token. Both maps are
/// name-sorted and names are unique across them.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureRecord {
    pub categorical: BTreeMap<String, String>,
    pub numeric: BTreeMap<String, f64>,
}

impl FeatureRecord {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.categorical.len() + self.numeric.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, name: &str) -> bool {
        self.categorical.contains_key(name) || self.numeric.contains_key(name)
    }

    pub fn set_categorical(
        &mut self,
        name: impl Into<String>,
        value: impl Into<String>,
    ) -> Result<(), FeatureError> {
        let name = name.into();
        if self.contains(&name) {
            return Err(FeatureError::Duplicate(name));
        }
        self.categorical.insert(name, value.into());
        Ok(())
    }

    pub fn set_numeric(&mut self, name: impl Into<String>, value: f64) -> Result<(), FeatureError> {
        let name = name.into();
        if self.contains(&name) {
            return Err(FeatureError::Duplicate(name));
        }
        self.numeric.insert(name, value);
        Ok(())
    }

    /// Name-disjoint union.
    pub fn merge(&mut self, other: FeatureRecord) -> Result<(), FeatureError> {
        for (k, v) in other.categorical {
            self.set_categorical(k, v)?;
        }
        for (k, v) in other.numeric {
            self.set_numeric(k, v)?;
        }
        Ok(())
    }

    /// `name=value` lines, categorical first, each block name-sorted.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.categorical {
            out.push_str(&format!("{k}={v}\n"));
        }
        for (k, v) in &self.numeric {
            out.push_str(&format!("{k}={v}\n"));
        }
        out
    }
}

fn offset_name(offset: isize) -> String {
    if offset > 0 {
        format!("+{offset}")
    } else {
        offset.to_string()
    }
}

/// Word, POS and BIO of the token and its two neighbours on either side.
pub fn window_features(sentence: &Sentence, idx: usize) -> FeatureRecord {
    let mut record = FeatureRecord::new();
    for offset in -2isize..=2 {
        let token = idx
            .checked_add_signed(offset)
            .and_then(|i| sentence.tokens.get(i));
        let suffix = offset_name(offset);
        let (word, pos, bio) = match token {
            Some(t) => (t.word.as_str(), t.pos.as_str(), t.bio.as_str()),
            None => (PAD, PAD, PAD),
        };
        record.categorical.insert(format!("word_{suffix}"), word.to_owned());
        record.categorical.insert(format!("pos_{suffix}"), pos.to_owned());
        record.categorical.insert(format!("bio_{suffix}"), bio.to_owned());
    }
    record
}

/// Signed distance from `anchor` to `idx`; negative when the candidate comes
/// first.
pub fn token_distance(idx: usize, anchor: usize) -> i64 {
    idx as i64 - anchor as i64
}

fn coarse_pos(pos: &str) -> &str {
    if pos.starts_with("NN") {
        "NOUN"
    } else if pos.starts_with("VB") {
        "VERB"
    } else {
        pos
    }
}

/// Collapses the chunk tags spanning `from_idx..=to_idx` into a directional
/// phrase path, e.g. `right_NP_PP_of_NP_NOUN`.
pub fn collapse_bio_path(
    sentence: &Sentence,
    from_idx: usize,
    to_idx: usize,
) -> Result<String, FeatureError> {
    if from_idx == to_idx {
        return Err(FeatureError::EmptyPath(from_idx));
    }
    let (lo, hi) = (from_idx.min(to_idx), from_idx.max(to_idx));
    let span = &sentence.tokens[lo..=hi];
    let mut parts = vec![if to_idx > from_idx { "right" } else { "left" }.to_owned()];
    let mut i = 0;
    while i < span.len() {
        match span[i].chunk() {
            Chunk::Outside => {
                parts.push(format!("O-{}", span[i].word.to_lowercase()));
                i += 1;
            }
            Chunk::Begin(label) | Chunk::Inside(label) => {
                let head = &span[i];
                i += 1;
                while i < span.len() && span[i].chunk() == Chunk::Inside(label) {
                    i += 1;
                }
                parts.push(label.to_owned());
                if label == "PP" {
                    parts.push(head.word.to_lowercase());
                }
            }
        }
    }
    parts.push(coarse_pos(&sentence.tokens[to_idx].pos).to_owned());
    Ok(parts.join("_"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Anchor {
    Support,
    Predicate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// ARG1 precedes the anchor.
    Before,
    /// ARG1 follows the anchor.
    After,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PathPattern {
    pub pattern_id: &'static str,
    pub up_labels: &'static [&'static str],
    pub down_labels: &'static [&'static str],
    pub direction: Direction,
    pub anchor: Anchor,
}

pub const PATH1: PathPattern = PathPattern {
    pattern_id: "PATH1",
    up_labels: &["VP", "S"],
    down_labels: &["NP"],
    direction: Direction::Before,
    anchor: Anchor::Support,
};

pub const PATH2: PathPattern = PathPattern {
    pattern_id: "PATH2",
    up_labels: &["VP"],
    down_labels: &["NP"],
    direction: Direction::After,
    anchor: Anchor::Support,
};

pub const PATH3: PathPattern = PathPattern {
    pattern_id: "PATH3",
    up_labels: &["NP"],
    down_labels: &["NP"],
    direction: Direction::Before,
    anchor: Anchor::Predicate,
};

pub const TREE_PATTERNS: [PathPattern; 3] = [PATH1, PATH2, PATH3];

impl PathPattern {
    /// Whether the candidate at `idx` is linked to this pattern's anchor by
    /// exactly this path. `tree` must be aligned to the instance's sentence.
    pub fn fires(
        &self,
        tree: &ParseTree,
        instance: &Instance,
        idx: usize,
    ) -> Result<bool, TreeError> {
        let anchor = match self.anchor {
            Anchor::Support => match instance.first_support() {
                Some(s) => s,
                None => return Ok(false),
            },
            Anchor::Predicate => {
                if !instance.support_indices.is_empty() {
                    return Ok(false);
                }
                instance.predicate_index
            }
        };
        let placed = match self.direction {
            Direction::Before => idx < anchor,
            Direction::After => idx > anchor,
        };
        if !placed {
            return Ok(false);
        }
        Ok(tree_path(tree, anchor, idx)?.matches(self.up_labels, self.down_labels))
    }
}

pub fn type2_path_flags(
    tree: &ParseTree,
    instance: &Instance,
    idx: usize,
) -> Result<[bool; 3], TreeError> {
    Ok([
        PATH1.fires(tree, instance, idx)?,
        PATH2.fires(tree, instance, idx)?,
        PATH3.fires(tree, instance, idx)?,
    ])
}

/// One presence feature per known class label; nothing for the percent task
/// where every instance shares the same class.
pub fn predicate_class_features(instance: &Instance, task: Task) -> FeatureRecord {
    let mut record = FeatureRecord::new();
    if task == Task::Percent {
        return record;
    }
    for class in PREDICATE_CLASSES {
        let present = instance.frame_classes.contains(*class);
        record
            .categorical
            .insert(format!("class_{class}"), if present { "1" } else { "0" }.to_owned());
    }
    record
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::fixtures::FIGURE;
    use crate::corpus::{extract_instance, parse_conll_str};
    use crate::parsetree::fixtures::*;
    use crate::parsetree::parse_bracketed;
    use std::collections::BTreeSet;

    fn figure() -> Sentence {
        parse_conll_str(FIGURE).unwrap().remove(0)
    }

    fn conll(rows: &[(&str, &str, &str, &str)]) -> Sentence {
        let text: String = rows
            .iter()
            .enumerate()
            .map(|(i, (w, p, b, f))| format!("{w}\t{p}\t{b}\t{i}\t{f}\t\n"))
            .collect();
        parse_conll_str(&text).unwrap().remove(0)
    }

    fn pie() -> Sentence {
        conll(&[
            ("20", "CD", "B-NP", ""),
            ("%", "NN", "I-NP", "PRED"),
            ("of", "IN", "B-PP", ""),
            ("the", "DT", "B-NP", ""),
            ("pie", "NN", "I-NP", "ARG1"),
        ])
    }

    #[test]
    fn window_at_start() {
        let r = window_features(&figure(), 0);
        assert_eq!(r.categorical.len(), 15);
        assert_eq!(r.categorical["word_0"], "Output");
        assert_eq!(r.categorical["pos_0"], "NN");
        assert_eq!(r.categorical["bio_0"], "B-NP");
        assert_eq!(r.categorical["word_-1"], PAD);
        assert_eq!(r.categorical["word_-2"], PAD);
        assert_eq!(r.categorical["word_+1"], "in");
        assert_eq!(r.categorical["word_+2"], "August");
    }

    #[test]
    fn window_near_end() {
        let r = window_features(&figure(), 5);
        assert_eq!(r.categorical["word_-1"], "5");
        assert_eq!(r.categorical["pos_-1"], "CD");
        assert_eq!(r.categorical["word_+1"], ".");
        assert_eq!(r.categorical["word_+2"], PAD);
    }

    #[test]
    fn window_single_token() {
        let s = conll(&[("x", "NN", "B-NP", "PRED")]);
        let r = window_features(&s, 0);
        let pads = r.categorical.values().filter(|v| *v == PAD).count();
        assert_eq!(pads, 12);
    }

    #[test]
    fn distances() {
        assert_eq!(token_distance(0, 5), -5);
        assert_eq!(token_distance(3, 3), 0);
        assert_eq!(token_distance(4, 1), 3);
    }

    #[test]
    fn collapse_worked_example() {
        assert_eq!(
            collapse_bio_path(&pie(), 1, 4).unwrap(),
            "right_NP_PP_of_NP_NOUN"
        );
    }

    #[test]
    fn collapse_within_one_chunk() {
        let s = pie();
        assert_eq!(collapse_bio_path(&s, 3, 4).unwrap(), "right_NP_NOUN");
        assert_eq!(collapse_bio_path(&s, 1, 0).unwrap(), "left_NP_CD");
        let s = conll(&[("big", "JJ", "B-NP", ""), ("prize", "NN", "I-NP", "PRED")]);
        assert_eq!(collapse_bio_path(&s, 1, 0).unwrap(), "left_NP_JJ");
        assert_eq!(collapse_bio_path(&s, 0, 1).unwrap(), "right_NP_NOUN");
    }

    #[test]
    fn collapse_figure_leftward() {
        // Output/B-NP in/B-PP August/B-NP rose/O 5/B-NP percent/I-NP, walked
        // in surface order, target Output/NN.
        assert_eq!(
            collapse_bio_path(&figure(), 5, 0).unwrap(),
            "left_NP_PP_in_NP_O-rose_NP_NOUN"
        );
        assert_eq!(
            collapse_bio_path(&figure(), 3, 0).unwrap(),
            "left_NP_PP_in_NP_O-rose_NOUN"
        );
        assert_eq!(
            collapse_bio_path(&figure(), 0, 3).unwrap(),
            "right_NP_PP_in_NP_O-rose_VERB"
        );
    }

    #[test]
    fn collapse_self_is_error() {
        assert!(matches!(
            collapse_bio_path(&pie(), 2, 2),
            Err(FeatureError::EmptyPath(2))
        ));
    }

    fn instance(pred: usize, support: &[usize]) -> Instance {
        Instance {
            sentence_id: 0,
            predicate_index: pred,
            support_indices: support.to_vec(),
            arg1_index: None,
            frame_classes: BTreeSet::new(),
        }
    }

    #[test]
    fn tree_flags_worked_examples() {
        let t = parse_bracketed(PRICE_ROSE).unwrap();
        assert_eq!(
            type2_path_flags(&t, &instance(4, &[2]), 1).unwrap(),
            [true, false, false]
        );
        let t = parse_bracketed(THEY_INCREASED).unwrap();
        assert_eq!(
            type2_path_flags(&t, &instance(5, &[1]), 3).unwrap(),
            [false, true, false]
        );
        let t = parse_bracketed(INDUSTRY_LEADERS).unwrap();
        assert_eq!(
            type2_path_flags(&t, &instance(2, &[]), 1).unwrap(),
            [false, false, true]
        );
    }

    #[test]
    fn tree_flags_need_anchor_and_direction() {
        let t = parse_bracketed(PRICE_ROSE).unwrap();
        // no support: PATH1/PATH2 cannot fire
        assert_eq!(
            type2_path_flags(&t, &instance(4, &[]), 1).unwrap(),
            [false, false, false]
        );
        // PATH3 requires the absence of a support verb
        let t = parse_bracketed(INDUSTRY_LEADERS).unwrap();
        assert_eq!(
            type2_path_flags(&t, &instance(2, &[0]), 1).unwrap(),
            [false, false, false]
        );
        // the subject also sits on ↑VP↑S↓NP from the verb
        let t = parse_bracketed(THEY_INCREASED).unwrap();
        let flags = type2_path_flags(&t, &instance(5, &[1]), 0).unwrap();
        assert_eq!(flags, [true, false, false]);
        // a longer climb matches nothing
        let t = parse_bracketed(PRICE_ROSE).unwrap();
        assert_eq!(
            type2_path_flags(&t, &instance(4, &[3]), 1).unwrap(),
            [false, false, false]
        );
    }

    #[test]
    fn class_features() {
        let mut inst = extract_instance(&figure());
        let r = predicate_class_features(&inst, Task::Partitive);
        assert_eq!(r.categorical.len(), PREDICATE_CLASSES.len());
        assert_eq!(r.categorical["class_QUANT"], "1");
        assert!(r
            .categorical
            .iter()
            .filter(|(k, _)| *k != "class_QUANT")
            .all(|(_, v)| v == "0"));

        assert!(predicate_class_features(&inst, Task::Percent).is_empty());

        inst.frame_classes = ["GROUP", "NOM"].iter().map(|s| s.to_string()).collect();
        let r = predicate_class_features(&inst, Task::Partitive);
        assert_eq!(r.categorical["class_GROUP"], "1");
        assert_eq!(r.categorical["class_NOM"], "1");
        assert_eq!(r.categorical["class_QUANT"], "0");
    }

    #[test]
    fn record_rejects_duplicates() {
        let mut r = FeatureRecord::new();
        r.set_categorical("a", "x").unwrap();
        assert!(r.set_numeric("a", 1.0).is_err());
        let mut other = FeatureRecord::new();
        other.set_numeric("b", 2.0).unwrap();
        r.merge(other).unwrap();
        assert_eq!(r.dump(), "a=x\nb=2\n");
    }

    #[test]
    fn group_names() {
        assert_eq!(
            FeatureGroup::parse_name("embed").unwrap(),
            vec![FeatureGroup::BasicEmbed, FeatureGroup::SlashEmbed]
        );
        assert_eq!(
            FeatureGroup::parse_name("path").unwrap(),
            vec![FeatureGroup::Path]
        );
        assert!(FeatureGroup::parse_name("syntax").is_err());
        assert_eq!("%".parse::<Task>().unwrap(), Task::Percent);
    }
}
