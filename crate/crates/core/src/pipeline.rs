//! End-to-end feature-based scorer: corpus loading, feature assembly,
//! training, scoring and grid search.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{extract_instance, parse_conll_str, CorpusError, Instance, Sentence};
use crate::embeddings::{cosine_features, fit_averages, AverageProfile, EmbeddingError, VectorStore};
use crate::encoding::{build_vocab, EncodingError, EncodingMode, Vocabulary};
use crate::ensemble::{decode, DecodeMode, EnsembleError, ScoreTable};
use crate::eval::{prf, PrfScores};
use crate::features::{
    collapse_bio_path, predicate_class_features, token_distance, type2_path_flags,
    window_features, FeatureError, FeatureGroup, FeatureRecord, Task, TREE_PATTERNS,
};
use crate::model::{
    fit_adaboost, grid_search_by, BoostModel, BoostParams, Dataset, GridReport, GridSpec,
    ModelError,
};
use crate::parsetree::{align_leaves, parse_tree_file, ParseTree, TreeError};

pub const BUNDLE_FORMAT_VERSION: u32 = 1;
const SELF_PATH: &str = "<SELF>";
const NO_SUPPORT: &str = "<NONE>";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("sentence {sentence}: {source}")]
    Alignment { sentence: usize, source: TreeError },
    #[error("{trees} trees for {sentences} sentences")]
    TreeCount { trees: usize, sentences: usize },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error("{0}")]
    Missing(String),
    #[error("model bundle: {0}")]
    Bundle(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Sentences with their labeled instances and, optionally, aligned trees.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub sentences: Vec<Sentence>,
    pub instances: Vec<Instance>,
    pub trees: Option<Vec<ParseTree>>,
}

impl Corpus {
    pub fn new(sentences: Vec<Sentence>) -> Self {
        let instances = sentences.iter().map(extract_instance).collect();
        Corpus {
            sentences,
            instances,
            trees: None,
        }
    }

    /// Attaches one tree per sentence, dropping empty elements and aligning
    /// leaves to tokens.
    pub fn with_trees(mut self, trees: Vec<ParseTree>) -> Result<Self, PipelineError> {
        if trees.len() != self.sentences.len() {
            return Err(PipelineError::TreeCount {
                trees: trees.len(),
                sentences: self.sentences.len(),
            });
        }
        let aligned = trees
            .iter()
            .zip(&self.sentences)
            .map(|(tree, sentence)| {
                let stripped = tree.without_empty_elements().ok_or(PipelineError::Alignment {
                    sentence: sentence.sentence_id,
                    source: TreeError::LeafCount {
                        leaves: 0,
                        tokens: sentence.len(),
                    },
                })?;
                align_leaves(&stripped, sentence).map_err(|source| PipelineError::Alignment {
                    sentence: sentence.sentence_id,
                    source,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        self.trees = Some(aligned);
        Ok(self)
    }

    pub fn from_text(conll: &str, trees: Option<&str>) -> Result<Self, PipelineError> {
        let corpus = Corpus::new(parse_conll_str(conll)?);
        match trees {
            Some(text) => corpus.with_trees(parse_tree_file(text)?),
            None => Ok(corpus),
        }
    }

    pub fn load(conll: &Path, trees: Option<&Path>) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(conll)?;
        let trees = trees.map(fs::read_to_string).transpose()?;
        Corpus::from_text(&text, trees.as_deref())
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    pub fn tree(&self, i: usize) -> Option<&ParseTree> {
        self.trees.as_ref().map(|t| &t[i])
    }

    /// Gold label of every token in corpus order.
    pub fn labels(&self) -> Vec<bool> {
        self.sentences
            .iter()
            .zip(&self.instances)
            .flat_map(|(s, inst)| (0..s.len()).map(move |t| inst.arg1_index == Some(t)))
            .collect()
    }
}

/// Which feature families to compute and for which task.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub task: Task,
    pub groups: BTreeSet<FeatureGroup>,
    /// Emit the three tree path flags as part of the path group.
    pub tree_flags: bool,
}

impl FeatureConfig {
    /// Every group the available inputs can support.
    pub fn available(task: Task, has_vectors: bool, has_trees: bool) -> Self {
        let groups = FeatureGroup::ALL
            .into_iter()
            .filter(|g| has_vectors || !is_embedding(*g))
            .collect();
        FeatureConfig {
            task,
            groups,
            tree_flags: has_trees,
        }
    }

    pub fn uses_embeddings(&self) -> bool {
        self.groups.iter().any(|g| is_embedding(*g))
    }

    pub fn uses_trees(&self) -> bool {
        self.tree_flags && self.groups.contains(&FeatureGroup::Path)
    }
}

fn is_embedding(g: FeatureGroup) -> bool {
    matches!(g, FeatureGroup::BasicEmbed | FeatureGroup::SlashEmbed)
}

/// Computes the feature record of every candidate token.
pub struct Featurizer<'a> {
    pub config: &'a FeatureConfig,
    pub profile: Option<&'a AverageProfile>,
    pub store: Option<&'a VectorStore>,
}

impl Featurizer<'_> {
    pub fn record(
        &self,
        sentence: &Sentence,
        instance: &Instance,
        tree: Option<&ParseTree>,
        idx: usize,
    ) -> Result<FeatureRecord, PipelineError> {
        let groups = &self.config.groups;
        let mut record = FeatureRecord::new();
        if groups.contains(&FeatureGroup::Window) {
            record.merge(window_features(sentence, idx))?;
        }
        let support = instance.first_support();
        if groups.contains(&FeatureGroup::Distance) {
            let pred = token_distance(idx, instance.predicate_index);
            record.set_numeric("dist_pred", pred as f64)?;
            let sup = support.map_or(0, |s| token_distance(idx, s));
            record.set_numeric("dist_sup", sup as f64)?;
            record.set_categorical("sup_present", if support.is_some() { "1" } else { "0" })?;
        }
        if groups.contains(&FeatureGroup::Path) {
            let bio_path = |anchor: usize| -> Result<String, FeatureError> {
                if anchor == idx {
                    Ok(SELF_PATH.to_owned())
                } else {
                    collapse_bio_path(sentence, anchor, idx)
                }
            };
            record.set_categorical("path_pred", bio_path(instance.predicate_index)?)?;
            let sup_path = match support {
                Some(s) => bio_path(s)?,
                None => NO_SUPPORT.to_owned(),
            };
            record.set_categorical("path_sup", sup_path)?;
            if self.config.tree_flags {
                let tree = tree.ok_or_else(|| {
                    PipelineError::Missing("tree path flags need parse trees".into())
                })?;
                let flags = type2_path_flags(tree, instance, idx)?;
                for (pattern, flag) in TREE_PATTERNS.iter().zip(flags) {
                    let name = format!("flag_{}", pattern.pattern_id.to_lowercase());
                    record.set_categorical(name, if flag { "1" } else { "0" })?;
                }
            }
        }
        if groups.contains(&FeatureGroup::Class) {
            record.merge(predicate_class_features(instance, self.config.task))?;
        }
        let basic = groups.contains(&FeatureGroup::BasicEmbed);
        let slash = groups.contains(&FeatureGroup::SlashEmbed);
        if basic || slash {
            let (profile, store) = self.profile.zip(self.store).ok_or_else(|| {
                PipelineError::Missing("embedding features need word vectors".into())
            })?;
            let cosines = cosine_features(sentence, idx, profile, store)?;
            for (name, value) in cosines.numeric {
                let keep = if name.ends_with("_slash") { slash } else { basic };
                if keep {
                    record.set_numeric(name, value)?;
                }
            }
        }
        Ok(record)
    }

    /// Records for every token of every sentence, in corpus order.
    pub fn corpus_records(&self, corpus: &Corpus) -> Result<Vec<FeatureRecord>, PipelineError> {
        let mut out = Vec::with_capacity(corpus.token_count());
        for (i, (sentence, instance)) in corpus.sentences.iter().zip(&corpus.instances).enumerate() {
            for idx in 0..sentence.len() {
                out.push(self.record(sentence, instance, corpus.tree(i), idx)?);
            }
        }
        Ok(out)
    }
}

/// A trained scorer: feature settings, vocabulary, embedding averages and the
/// boosted trees. Word vectors are supplied separately at scoring time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SrlModel {
    pub version: u32,
    pub features: FeatureConfig,
    pub vocabulary: Vocabulary,
    pub profile: Option<AverageProfile>,
    pub boost: BoostModel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub features: FeatureConfig,
    pub encoding: EncodingMode,
    pub params: BoostParams,
}

/// Everything training needs before the boosting itself.
struct Prepared {
    vocabulary: Vocabulary,
    profile: Option<AverageProfile>,
    data: Dataset,
    labels: Vec<bool>,
}

fn check_inputs(
    config: &FeatureConfig,
    corpus: &Corpus,
    store: Option<&VectorStore>,
) -> Result<(), PipelineError> {
    if config.uses_embeddings() && store.is_none() {
        return Err(PipelineError::Missing(
            "embedding groups selected but no word vectors given".into(),
        ));
    }
    if config.uses_trees() && corpus.trees.is_none() {
        return Err(PipelineError::Missing(
            "model uses tree path flags but no parse trees given".into(),
        ));
    }
    Ok(())
}

/// Embedding averages over the labeled sentences of `train`, when the
/// configuration uses embedding features and vectors are available.
pub fn fit_profile(
    config: &FeatureConfig,
    train: &Corpus,
    store: Option<&VectorStore>,
) -> Result<Option<AverageProfile>, PipelineError> {
    match (config.uses_embeddings(), store) {
        (true, Some(store)) => {
            let labeled = train
                .sentences
                .iter()
                .zip(&train.instances)
                .filter(|(_, inst)| inst.arg1_index.is_some());
            Ok(Some(fit_averages(labeled, store)?))
        }
        _ => Ok(None),
    }
}

fn prepare(
    options: &TrainOptions,
    train: &Corpus,
    store: Option<&VectorStore>,
) -> Result<Prepared, PipelineError> {
    check_inputs(&options.features, train, store)?;
    let profile = fit_profile(&options.features, train, store)?;
    let featurizer = Featurizer {
        config: &options.features,
        profile: profile.as_ref(),
        store,
    };
    let records = featurizer.corpus_records(train)?;
    let vocabulary = build_vocab(&records, options.encoding)?;
    let mut data = Dataset::with_width(vocabulary.width());
    for record in &records {
        data.push_row(&vocabulary.vectorize(record))?;
    }
    data.finish();
    Ok(Prepared {
        vocabulary,
        profile,
        data,
        labels: train.labels(),
    })
}

pub fn train(
    options: &TrainOptions,
    corpus: &Corpus,
    store: Option<&VectorStore>,
) -> Result<SrlModel, PipelineError> {
    let prepared = prepare(options, corpus, store)?;
    let boost = fit_adaboost(&prepared.data, &prepared.labels, &options.params)?;
    Ok(SrlModel {
        version: BUNDLE_FORMAT_VERSION,
        features: options.features.clone(),
        vocabulary: prepared.vocabulary,
        profile: prepared.profile,
        boost,
    })
}

/// Encoded rows for every token of `corpus` under a trained model's settings.
fn encode(
    features: &FeatureConfig,
    vocabulary: &Vocabulary,
    profile: Option<&AverageProfile>,
    corpus: &Corpus,
    store: Option<&VectorStore>,
) -> Result<Vec<Vec<f64>>, PipelineError> {
    check_inputs(features, corpus, store)?;
    let featurizer = Featurizer {
        config: features,
        profile,
        store,
    };
    Ok(featurizer
        .corpus_records(corpus)?
        .iter()
        .map(|r| vocabulary.vectorize(r))
        .collect())
}

fn score_rows(
    boost: &BoostModel,
    rows: &[Vec<f64>],
    corpus: &Corpus,
) -> Result<ScoreTable, PipelineError> {
    let mut table = ScoreTable::new("feature");
    let keys = corpus
        .sentences
        .iter()
        .flat_map(|s| (0..s.len()).map(move |t| (s.sentence_id, t)));
    for ((s, t), row) in keys.zip(rows) {
        table.insert(s, t, boost.score(row)?)?;
    }
    Ok(table)
}

impl SrlModel {
    pub fn predict(&self, corpus: &Corpus, store: Option<&VectorStore>) -> Result<ScoreTable, PipelineError> {
        let rows = encode(
            &self.features,
            &self.vocabulary,
            self.profile.as_ref(),
            corpus,
            store,
        )?;
        score_rows(&self.boost, &rows, corpus)
    }

    pub fn column_names(&self) -> Vec<String> {
        self.vocabulary.column_names()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<SrlModel, PipelineError> {
        let model: SrlModel =
            serde_json::from_str(text).map_err(|e| PipelineError::Bundle(e.to_string()))?;
        if model.version != BUNDLE_FORMAT_VERSION {
            return Err(PipelineError::Bundle(format!(
                "unsupported version {}",
                model.version
            )));
        }
        model.boost.validate()?;
        if model.boost.width != model.vocabulary.width() {
            return Err(PipelineError::Bundle(format!(
                "model width {} does not match vocabulary width {}",
                model.boost.width,
                model.vocabulary.width()
            )));
        }
        Ok(model)
    }
}

/// ARG1 precision/recall/F1 of a score table decoded with `mode`.
pub fn evaluate(table: &ScoreTable, gold: &Corpus, mode: DecodeMode) -> PrfScores {
    prf(&decode(table, mode), &gold.instances, &gold.sentences)
}

/// Trains every grid configuration and keeps the one with the best dev F1
/// under ARGMAX decoding.
pub fn grid_search_model(
    spec: &GridSpec,
    options: &TrainOptions,
    train: &Corpus,
    dev: &Corpus,
    store: Option<&VectorStore>,
) -> Result<(SrlModel, GridReport), PipelineError> {
    if dev.is_empty() {
        return Err(ModelError::EmptyDev.into());
    }
    let prepared = prepare(options, train, store)?;
    let dev_rows = encode(
        &options.features,
        &prepared.vocabulary,
        prepared.profile.as_ref(),
        dev,
        store,
    )?;
    let (boost, report) = grid_search_by(
        spec,
        &prepared.data,
        &prepared.labels,
        options.params.seed,
        |model| {
            let table = score_rows(model, &dev_rows, dev)
                .map_err(|e| ModelError::Objective(e.to_string()))?;
            Ok(evaluate(&table, dev, DecodeMode::Argmax).f1)
        },
    )?;
    Ok((
        SrlModel {
            version: BUNDLE_FORMAT_VERSION,
            features: options.features.clone(),
            vocabulary: prepared.vocabulary,
            profile: prepared.profile,
            boost,
        },
        report,
    ))
}
