use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::PrfScores;
use crate::embeddings::VectorStore;
use crate::ensemble::DecodeMode;
use crate::features::{FeatureError, FeatureGroup};
use crate::pipeline::{evaluate, train, Corpus, PipelineError, TrainOptions};

/// How a row derives its groups from the full set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaskKind {
    All,
    Only(Vec<FeatureGroup>),
    Without(Vec<FeatureGroup>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationMask {
    pub label: String,
    pub kind: MaskKind,
}

fn groups(names: &[&str]) -> Vec<FeatureGroup> {
    names
        .iter()
        .flat_map(|n| FeatureGroup::parse_name(n).expect("built-in group name"))
        .collect()
}

impl AblationMask {
    pub fn new(label: impl Into<String>, kind: MaskKind) -> Self {
        AblationMask {
            label: label.into(),
            kind,
        }
    }

    /// The six standard rows. Distances count as path features.
    pub fn standard() -> Vec<AblationMask> {
        vec![
            AblationMask::new("All", MaskKind::All),
            AblationMask::new("N-gram Only", MaskKind::Only(groups(&["window"]))),
            AblationMask::new("All but Path", MaskKind::Without(groups(&["path", "distance"]))),
            AblationMask::new("All but Embed", MaskKind::Without(groups(&["embed"]))),
            AblationMask::new(
                "All but Basic Embed",
                MaskKind::Without(groups(&["basic-embed"])),
            ),
            AblationMask::new(
                "All but Slash Embed",
                MaskKind::Without(groups(&["slash-embed"])),
            ),
        ]
    }

    pub fn apply(&self, full: &BTreeSet<FeatureGroup>) -> BTreeSet<FeatureGroup> {
        match &self.kind {
            MaskKind::All => full.clone(),
            MaskKind::Only(keep) => full.iter().filter(|g| keep.contains(g)).copied().collect(),
            MaskKind::Without(drop) => {
                full.iter().filter(|g| !drop.contains(g)).copied().collect()
            }
        }
    }
}

/// `LABEL=all`, `LABEL=only:g1,g2` or `LABEL=without:g1,g2`.
impl FromStr for AblationMask {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || FeatureError::UnknownGroup(s.to_owned());
        let (label, rule) = s.split_once('=').ok_or_else(bad)?;
        let parse_list = |list: &str| -> Result<Vec<FeatureGroup>, FeatureError> {
            let mut out = Vec::new();
            for name in list.split(',').filter(|n| !n.trim().is_empty()) {
                out.extend(FeatureGroup::parse_name(name)?);
            }
            Ok(out)
        };
        let kind = match rule.split_once(':') {
            None if rule.trim() == "all" => MaskKind::All,
            Some(("only", list)) => MaskKind::Only(parse_list(list)?),
            Some(("without", list)) => MaskKind::Without(parse_list(list)?),
            _ => return Err(bad()),
        };
        Ok(AblationMask::new(label.trim(), kind))
    }
}

impl fmt::Display for AblationMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |gs: &[FeatureGroup]| {
            gs.iter().map(|g| g.name()).collect::<Vec<_>>().join(",")
        };
        match &self.kind {
            MaskKind::All => write!(f, "{}=all", self.label),
            MaskKind::Only(gs) => write!(f, "{}=only:{}", self.label, list(gs)),
            MaskKind::Without(gs) => write!(f, "{}=without:{}", self.label, list(gs)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub label: String,
    pub groups: Vec<FeatureGroup>,
    pub scores: PrfScores,
}

/// Trains one model per mask with `options` (same hyperparameters and seed)
/// and scores each on `dev` with ARGMAX decoding.
pub fn ablation_report(
    masks: &[AblationMask],
    options: &TrainOptions,
    train_set: &Corpus,
    dev: &Corpus,
    store: Option<&VectorStore>,
) -> Result<Vec<AblationRow>, PipelineError> {
    if masks.is_empty() {
        return Err(PipelineError::Missing("no ablation masks given".into()));
    }
    let mut rows = Vec::with_capacity(masks.len());
    for mask in masks {
        let mut opts = options.clone();
        opts.features.groups = mask.apply(&options.features.groups);
        if opts.features.groups.is_empty() {
            return Err(PipelineError::Missing(format!(
                "mask {:?} leaves no feature groups",
                mask.label
            )));
        }
        let model = train(&opts, train_set, store)?;
        let scores = evaluate(&model.predict(dev, store)?, dev, DecodeMode::Argmax);
        rows.push(AblationRow {
            label: mask.label.clone(),
            groups: opts.features.groups.into_iter().collect(),
            scores,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_labels() {
        let labels: Vec<_> = AblationMask::standard().into_iter().map(|m| m.label).collect();
        assert_eq!(
            labels,
            [
                "All",
                "N-gram Only",
                "All but Path",
                "All but Embed",
                "All but Basic Embed",
                "All but Slash Embed"
            ]
        );
    }

    #[test]
    fn apply_masks() {
        let full: BTreeSet<_> = FeatureGroup::ALL.into_iter().collect();
        let masks = AblationMask::standard();
        assert_eq!(masks[0].apply(&full), full);
        assert_eq!(masks[1].apply(&full), BTreeSet::from([FeatureGroup::Window]));
        let no_path = masks[2].apply(&full);
        assert!(!no_path.contains(&FeatureGroup::Path));
        assert!(!no_path.contains(&FeatureGroup::Distance));
        assert_eq!(masks[3].apply(&full).len(), 4);
    }

    #[test]
    fn parse_and_print() {
        let m: AblationMask = "No dist=without:distance,embed".parse().unwrap();
        assert_eq!(m.label, "No dist");
        assert_eq!(
            m.kind,
            MaskKind::Without(vec![
                FeatureGroup::Distance,
                FeatureGroup::BasicEmbed,
                FeatureGroup::SlashEmbed
            ])
        );
        assert_eq!(m.to_string().parse::<AblationMask>().unwrap(), m);
        assert_eq!("x=all".parse::<AblationMask>().unwrap().kind, MaskKind::All);
        assert!("x=without:syntax".parse::<AblationMask>().is_err());
        assert!("x=some:path".parse::<AblationMask>().is_err());
        assert!("nolabel".parse::<AblationMask>().is_err());
    }
}
