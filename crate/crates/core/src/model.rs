//! Discrete two-class AdaBoost over depth-limited decision trees.
//!
//! Trees are grown greedily: every node takes the single-feature midpoint
//! threshold that minimises weighted misclassification, each leaf predicting
//! its weighted majority. Training data is held column-major with only the
//! non-zero entries stored, which keeps split search proportional to the
//! number of non-zeros on one-hot inputs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Errors within this distance are treated as ties.
const TIE_EPS: f64 = 1e-12;
/// Floor used for the stage weight of a perfect weak learner.
const MIN_ERROR: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("row {row}, column {column} is NaN")]
    NotANumber { row: usize, column: usize },
    #[error("row {row} has width {found}, expected {expected}")]
    RaggedRow { row: usize, found: usize, expected: usize },
    #[error("{features} rows but {labels} labels")]
    LengthMismatch { features: usize, labels: usize },
    #[error("need at least two training rows")]
    TooFewRows,
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("input width {found} does not match model width {expected}")]
    WidthMismatch { found: usize, expected: usize },
    #[error("invalid hyperparameter: {0}")]
    BadParameter(String),
    #[error("grid search needs a non-empty dev set")]
    EmptyDev,
    #[error("{0}")]
    Objective(String),
}

#[derive(Clone, Debug, Default)]
struct Column {
    /// (value, row) with value < 0, ascending.
    negative: Vec<(f64, u32)>,
    /// (value, row) with value > 0, ascending.
    positive: Vec<(f64, u32)>,
}

/// A column-major sparse feature matrix.
#[derive(Clone, Debug)]
pub struct Dataset {
    rows: usize,
    columns: Vec<Column>,
}

impl Dataset {
    pub fn with_width(width: usize) -> Self {
        Dataset {
            rows: 0,
            columns: vec![Column::default(); width],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ModelError> {
        let width = rows.first().map_or(0, Vec::len);
        let mut data = Dataset::with_width(width);
        for row in rows {
            data.push_row(row)?;
        }
        data.finish();
        Ok(data)
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<(), ModelError> {
        if row.len() != self.columns.len() {
            return Err(ModelError::RaggedRow {
                row: self.rows,
                found: row.len(),
                expected: self.columns.len(),
            });
        }
        let r = self.rows as u32;
        for (c, &v) in row.iter().enumerate() {
            if v.is_nan() {
                return Err(ModelError::NotANumber {
                    row: self.rows,
                    column: c,
                });
            }
            if v < 0.0 {
                self.columns[c].negative.push((v, r));
            } else if v > 0.0 {
                self.columns[c].positive.push((v, r));
            }
        }
        self.rows += 1;
        Ok(())
    }

    /// Sorts the columns; call once after the last `push_row`.
    pub fn finish(&mut self) {
        for col in &mut self.columns {
            col.negative.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            col.positive.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tree {
    Leaf {
        value: i8,
    },
    Split {
        feature: usize,
        threshold: f64,
        /// Weighted misclassification removed by this split.
        gain: f64,
        left: Box<Tree>,
        right: Box<Tree>,
    },
}

impl Tree {
    /// +1 or −1. Rows with `x[feature] <= threshold` go left.
    pub fn predict(&self, x: &[f64]) -> i8 {
        let mut node = self;
        loop {
            match node {
                Tree::Leaf { value } => return *value,
                Tree::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn max_feature(&self) -> Option<usize> {
        match self {
            Tree::Leaf { .. } => None,
            Tree::Split {
                feature, left, right, ..
            } => [Some(*feature), left.max_feature(), right.max_feature()]
                .into_iter()
                .flatten()
                .max(),
        }
    }

    fn visit_splits(&self, f: &mut impl FnMut(usize, f64)) {
        if let Tree::Split {
            feature,
            gain,
            left,
            right,
            ..
        } = self
        {
            f(*feature, *gain);
            left.visit_splits(f);
            right.visit_splits(f);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub tree: Tree,
    pub alpha: f64,
    /// Weighted training error of the tree when it was fitted.
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub rounds: usize,
    pub depth: usize,
    pub shrinkage: f64,
    /// Start from class-balanced instead of uniform weights.
    pub balanced: bool,
    /// Kept as run metadata; fitting itself is deterministic.
    pub seed: u64,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams {
            rounds: 200,
            depth: 2,
            shrinkage: 1.0,
            balanced: false,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostModel {
    pub version: u32,
    pub width: usize,
    pub params: BoostParams,
    pub rounds: Vec<Round>,
}

fn leaf_value(pos: f64, neg: f64) -> i8 {
    if pos >= neg {
        1
    } else {
        -1
    }
}

fn leaf_error(pos: f64, neg: f64) -> f64 {
    if pos >= neg {
        neg
    } else {
        pos
    }
}

#[derive(Clone, Copy, Debug)]
struct SplitChoice {
    feature: usize,
    threshold: f64,
    error: f64,
}

struct Grower<'a> {
    data: &'a Dataset,
    labels: &'a [bool],
    weights: &'a [f64],
    in_node: Vec<bool>,
    goes_left: Vec<bool>,
    /// Scratch: (value, positive weight, negative weight, count) per distinct value.
    groups: Vec<(f64, f64, f64, usize)>,
}

impl<'a> Grower<'a> {
    fn best_split(&mut self, members: &[u32], pos: f64, neg: f64) -> Option<SplitChoice> {
        let mut best: Option<SplitChoice> = None;
        for f in 0..self.data.columns.len() {
            self.collect_groups(f, members.len(), pos, neg);
            let groups = &self.groups;
            if groups.len() < 2 {
                continue;
            }
            let (mut lp, mut ln) = (0.0, 0.0);
            for k in 0..groups.len() - 1 {
                lp += groups[k].1;
                ln += groups[k].2;
                let error = leaf_error(lp, ln) + leaf_error(pos - lp, neg - ln);
                if best.is_none_or(|b| error < b.error - TIE_EPS) {
                    best = Some(SplitChoice {
                        feature: f,
                        threshold: 0.5 * (groups[k].0 + groups[k + 1].0),
                        error,
                    });
                }
            }
        }
        best
    }

    /// Distinct values of feature `f` inside the node, ascending, with their
    /// class weights. Zero entries are implied by what the sparse lists miss.
    fn collect_groups(&mut self, f: usize, node_rows: usize, pos: f64, neg: f64) {
        self.groups.clear();
        let col = &self.data.columns[f];
        let (mut nz_pos, mut nz_neg, mut nz_count) = (0.0, 0.0, 0usize);
        let mut push = |groups: &mut Vec<(f64, f64, f64, usize)>, v: f64, row: u32| {
            let (p, n) = if self.labels[row as usize] {
                (self.weights[row as usize], 0.0)
            } else {
                (0.0, self.weights[row as usize])
            };
            nz_pos += p;
            nz_neg += n;
            nz_count += 1;
            match groups.last_mut() {
                Some(g) if g.0 == v => {
                    g.1 += p;
                    g.2 += n;
                    g.3 += 1;
                }
                _ => groups.push((v, p, n, 1)),
            }
        };
        for &(v, row) in &col.negative {
            if self.in_node[row as usize] {
                push(&mut self.groups, v, row);
            }
        }
        let zero_at = self.groups.len();
        for &(v, row) in &col.positive {
            if self.in_node[row as usize] {
                push(&mut self.groups, v, row);
            }
        }
        let zeros = node_rows - nz_count;
        if zeros > 0 {
            let zp = (pos - nz_pos).max(0.0);
            let zn = (neg - nz_neg).max(0.0);
            self.groups.insert(zero_at, (0.0, zp, zn, zeros));
        }
    }

    fn grow(&mut self, members: Vec<u32>, depth_left: usize, out: &mut [i8]) -> Tree {
        let (mut pos, mut neg) = (0.0, 0.0);
        for &r in &members {
            if self.labels[r as usize] {
                pos += self.weights[r as usize];
            } else {
                neg += self.weights[r as usize];
            }
        }
        let here = leaf_error(pos, neg);
        let make_leaf = |out: &mut [i8]| {
            let value = leaf_value(pos, neg);
            for &r in &members {
                out[r as usize] = value;
            }
            Tree::Leaf { value }
        };
        if depth_left == 0 || here <= 0.0 {
            return make_leaf(out);
        }
        for &r in &members {
            self.in_node[r as usize] = true;
        }
        let choice = self.best_split(&members, pos, neg);
        let (mut left, mut right) = (Vec::new(), Vec::new());
        if let Some(c) = choice {
            let zero_left = 0.0 <= c.threshold;
            for &r in &members {
                self.goes_left[r as usize] = zero_left;
            }
            let col = &self.data.columns[c.feature];
            for &(v, r) in col.negative.iter().chain(&col.positive) {
                if self.in_node[r as usize] {
                    self.goes_left[r as usize] = v <= c.threshold;
                }
            }
            for &r in &members {
                if self.goes_left[r as usize] {
                    left.push(r);
                } else {
                    right.push(r);
                }
            }
        }
        for &r in &members {
            self.in_node[r as usize] = false;
        }
        match choice {
            Some(c) if c.error < here - TIE_EPS => {
                let l = self.grow(left, depth_left - 1, out);
                let r = self.grow(right, depth_left - 1, out);
                Tree::Split {
                    feature: c.feature,
                    threshold: c.threshold,
                    gain: here - c.error,
                    left: Box::new(l),
                    right: Box::new(r),
                }
            }
            _ => make_leaf(out),
        }
    }
}

/// Fits one weighted tree and returns it with its predictions on every row.
pub fn fit_tree(data: &Dataset, labels: &[bool], weights: &[f64], depth: usize) -> (Tree, Vec<i8>) {
    let mut grower = Grower {
        data,
        labels,
        weights,
        in_node: vec![false; data.rows],
        goes_left: vec![false; data.rows],
        groups: Vec::new(),
    };
    let mut out = vec![0i8; data.rows];
    let members: Vec<u32> = (0..data.rows as u32).collect();
    let tree = grower.grow(members, depth, &mut out);
    (tree, out)
}

fn check_params(params: &BoostParams) -> Result<(), ModelError> {
    if params.depth == 0 {
        return Err(ModelError::BadParameter("depth must be at least 1".into()));
    }
    if !(params.shrinkage > 0.0 && params.shrinkage <= 1.0) {
        return Err(ModelError::BadParameter(format!(
            "shrinkage {} outside (0, 1]",
            params.shrinkage
        )));
    }
    Ok(())
}

fn initial_weights(labels: &[bool], balanced: bool) -> Vec<f64> {
    let n = labels.len() as f64;
    if !balanced {
        return vec![1.0 / n; labels.len()];
    }
    let positives = labels.iter().filter(|y| **y).count() as f64;
    let negatives = n - positives;
    labels
        .iter()
        .map(|&y| if y { 0.5 / positives } else { 0.5 / negatives })
        .collect()
}

/// Discrete AdaBoost. Stops early when a tree is perfect (kept, with a large
/// finite stage weight) or no better than chance (discarded).
pub fn fit_adaboost(
    data: &Dataset,
    labels: &[bool],
    params: &BoostParams,
) -> Result<BoostModel, ModelError> {
    check_params(params)?;
    if data.rows() != labels.len() {
        return Err(ModelError::LengthMismatch {
            features: data.rows(),
            labels: labels.len(),
        });
    }
    if labels.len() < 2 {
        return Err(ModelError::TooFewRows);
    }
    if labels.iter().all(|y| *y) || labels.iter().all(|y| !*y) {
        return Err(ModelError::SingleClass);
    }
    let mut weights = initial_weights(labels, params.balanced);
    let mut rounds = Vec::new();
    for _ in 0..params.rounds {
        let (tree, predictions) = fit_tree(data, labels, &weights, params.depth);
        let error: f64 = predictions
            .iter()
            .zip(labels)
            .zip(&weights)
            .filter(|((h, y), _)| (**h > 0) != **y)
            .map(|(_, w)| w)
            .sum();
        if error >= 0.5 - TIE_EPS {
            break;
        }
        let perfect = error <= MIN_ERROR;
        let e = error.max(MIN_ERROR);
        let alpha = params.shrinkage * 0.5 * ((1.0 - e) / e).ln();
        rounds.push(Round { tree, alpha, error });
        if perfect {
            break;
        }
        let mut total = 0.0;
        for ((w, h), y) in weights.iter_mut().zip(&predictions).zip(labels) {
            let agree = if (*h > 0) == *y { 1.0 } else { -1.0 };
            *w *= (-alpha * agree).exp();
            total += *w;
        }
        weights.iter_mut().for_each(|w| *w /= total);
    }
    Ok(BoostModel {
        version: MODEL_FORMAT_VERSION,
        width: data.width(),
        params: params.clone(),
        rounds,
    })
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl BoostModel {
    /// Σ α·h(x).
    pub fn margin(&self, x: &[f64]) -> Result<f64, ModelError> {
        if x.len() != self.width {
            return Err(ModelError::WidthMismatch {
                found: x.len(),
                expected: self.width,
            });
        }
        Ok(self
            .rounds
            .iter()
            .map(|r| r.alpha * f64::from(r.tree.predict(x)))
            .sum())
    }

    /// Logistic link on twice the margin: the probability under the
    /// exponential-loss view of boosting.
    pub fn score(&self, x: &[f64]) -> Result<f64, ModelError> {
        Ok(logistic(2.0 * self.margin(x)?))
    }

    /// The model after its first `rounds` boosting rounds.
    pub fn truncated(&self, rounds: usize) -> BoostModel {
        let mut m = self.clone();
        m.rounds.truncate(rounds);
        m.params.rounds = rounds.min(self.params.rounds);
        m
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (i, r) in self.rounds.iter().enumerate() {
            if !r.alpha.is_finite() {
                return Err(ModelError::BadParameter(format!("round {i}: alpha is not finite")));
            }
            if r.tree.max_feature().is_some_and(|f| f >= self.width) {
                return Err(ModelError::BadParameter(format!(
                    "round {i}: tree tests a feature beyond width {}",
                    self.width
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<BoostModel, ModelError> {
        let model: BoostModel =
            serde_json::from_str(text).map_err(|e| ModelError::BadParameter(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }
}

pub fn score(model: &BoostModel, x: &[f64]) -> Result<f64, ModelError> {
    model.score(x)
}

/// Per-feature importance: stage-weighted error reduction of every split on
/// the feature, normalised to sum to one and sorted in descending order.
pub fn feature_importances(model: &BoostModel, names: &[String]) -> Vec<(String, f64)> {
    let mut totals = vec![0.0; model.width];
    for round in &model.rounds {
        round
            .tree
            .visit_splits(&mut |f, gain| totals[f] += round.alpha * gain);
    }
    let sum: f64 = totals.iter().sum();
    if sum > 0.0 {
        totals.iter_mut().for_each(|t| *t /= sum);
    }
    let mut out: Vec<(String, f64)> = totals
        .into_iter()
        .enumerate()
        .map(|(i, v)| (names.get(i).cloned().unwrap_or_else(|| format!("f{i}")), v))
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1));
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rounds: Vec<usize>,
    pub depths: Vec<usize>,
    pub shrinkages: Vec<f64>,
    pub balanced: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            rounds: vec![50, 100, 200],
            depths: vec![1, 2, 3],
            shrinkages: vec![0.5, 1.0],
            balanced: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub rounds: usize,
    pub depth: usize,
    pub shrinkage: f64,
    pub dev_f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub rows: Vec<GridRow>,
    /// Index into `rows` of the selected configuration.
    pub best: usize,
}

impl GridReport {
    pub fn to_table(&self) -> String {
        let mut out = format!("{:>6} {:>5} {:>9} {:>8}\n", "rounds", "depth", "shrinkage", "dev_f1");
        for (i, r) in self.rows.iter().enumerate() {
            let mark = if i == self.best { " *" } else { "" };
            out.push_str(&format!(
                "{:>6} {:>5} {:>9} {:>8.2}{mark}\n",
                r.rounds, r.depth, r.shrinkage, r.dev_f1
            ));
        }
        out
    }
}

/// Trains every grid configuration and keeps the one with the highest dev
/// score from `objective`. Ties prefer fewer rounds, then smaller depth, then
/// larger shrinkage.
pub fn grid_search_by<F>(
    spec: &GridSpec,
    data: &Dataset,
    labels: &[bool],
    seed: u64,
    mut objective: F,
) -> Result<(BoostModel, GridReport), ModelError>
where
    F: FnMut(&BoostModel) -> Result<f64, ModelError>,
{
    if spec.rounds.is_empty() || spec.depths.is_empty() || spec.shrinkages.is_empty() {
        return Err(ModelError::BadParameter("grid has an empty candidate list".into()));
    }
    let mut rounds = spec.rounds.clone();
    rounds.sort_unstable();
    rounds.dedup();
    let mut depths = spec.depths.clone();
    depths.sort_unstable();
    depths.dedup();
    let mut shrinkages = spec.shrinkages.clone();
    shrinkages.sort_by(|a, b| b.total_cmp(a));
    shrinkages.dedup();
    let max_rounds = *rounds.last().expect("non-empty");

    // Boosting is sequential, so a shorter run is a prefix of the longest one.
    let mut fitted = Vec::new();
    for &depth in &depths {
        for &shrinkage in &shrinkages {
            let params = BoostParams {
                rounds: max_rounds,
                depth,
                shrinkage,
                balanced: spec.balanced,
                seed,
            };
            fitted.push(((depth, shrinkage), fit_adaboost(data, labels, &params)?));
        }
    }
    let mut rows = Vec::new();
    let mut best: Option<(usize, BoostModel)> = None;
    for &r in &rounds {
        for &depth in &depths {
            for &shrinkage in &shrinkages {
                let full = &fitted
                    .iter()
                    .find(|((d, s), _)| *d == depth && *s == shrinkage)
                    .expect("fitted")
                    .1;
                let model = full.truncated(r);
                let mut model = model;
                model.params.rounds = r;
                let dev_f1 = objective(&model)?;
                let better = match &best {
                    None => true,
                    Some((i, _)) => dev_f1 > rows.get(*i).map_or(f64::MIN, |x: &GridRow| x.dev_f1) + TIE_EPS,
                };
                rows.push(GridRow {
                    rounds: r,
                    depth,
                    shrinkage,
                    dev_f1,
                });
                if better {
                    best = Some((rows.len() - 1, model));
                }
            }
        }
    }
    let (best, model) = best.expect("non-empty grid");
    Ok((model, GridReport { rows, best }))
}

/// Grid search scored by token-level F1 (threshold 0.5) on a labeled dev set.
pub fn grid_search(
    spec: &GridSpec,
    train: (&Dataset, &[bool]),
    dev: (&[Vec<f64>], &[bool]),
    seed: u64,
) -> Result<(BoostModel, GridReport), ModelError> {
    let (dev_x, dev_y) = dev;
    if dev_x.is_empty() {
        return Err(ModelError::EmptyDev);
    }
    if dev_x.len() != dev_y.len() {
        return Err(ModelError::LengthMismatch {
            features: dev_x.len(),
            labels: dev_y.len(),
        });
    }
    grid_search_by(spec, train.0, train.1, seed, |model| {
        let (mut tp, mut fp, mut fn_) = (0, 0, 0);
        for (x, &y) in dev_x.iter().zip(dev_y) {
            let predicted = model.score(x)? >= 0.5;
            match (predicted, y) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                _ => {}
            }
        }
        Ok(crate::eval::PrfScores::from_counts(tp, fp, fn_).f1)
    })
}
