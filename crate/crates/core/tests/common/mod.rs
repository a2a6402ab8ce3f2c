//! Oracles and corpus builders shared by the integration and acceptance
//! tests.
#![allow(dead_code)]

use partitive_srl::corpus::{parse_conll_str, Role, Sentence, Token};
use partitive_srl::embeddings::VectorStore;
use partitive_srl::model::{BoostModel, Tree};
use partitive_srl::pipeline::Corpus;
use partitive_srl::synth::{generate, random_vectors, SynthConfig};
use partitive_srl::features::Task;
use rand::seq::SliceRandom;
use rand::Rng;

pub const PRICE_ROSE: &str =
    "(S (NP (DT The) (NN price)) (VP (VBD rose) (NP (CD five) (NN percent))))";
pub const THEY_INCREASED: &str = "(S (NP (PRP They)) (VP (VBD increased) (NP (DT the) (NN price)) (NP (CD five) (NN percent))))";

pub const PRICE_ROSE_CONLL: &str = "The\tDT\tB-NP\t0\t\t\n\
price\tNN\tI-NP\t1\tARG1\t\n\
rose\tVBD\tB-VP\t2\tSUP\t\n\
five\tCD\tB-NP\t3\t\t\n\
percent\tNN\tI-NP\t4\tPRED\tQUANT\n";

pub const THEY_INCREASED_CONLL: &str = "They\tPRP\tB-NP\t0\t\t\n\
increased\tVBD\tB-VP\t1\tSUP\t\n\
the\tDT\tB-NP\t2\t\t\n\
price\tNN\tI-NP\t3\tARG1\t\n\
five\tCD\tB-NP\t4\t\t\n\
percent\tNN\tI-NP\t5\tPRED\tQUANT\n";

pub fn one_sentence(text: &str) -> Sentence {
    parse_conll_str(text).unwrap().remove(0)
}

/// Builds a sentence from (word, pos, bio, role) rows.
pub fn sentence(id: usize, rows: &[(&str, &str, &str, Role)]) -> Sentence {
    let tokens = rows
        .iter()
        .enumerate()
        .map(|(index, (w, p, b, r))| Token {
            word: (*w).into(),
            pos: (*p).into(),
            bio: (*b).into(),
            index,
            func: *r,
            frame: if *r == Role::Predicate { "QUANT".into() } else { String::new() },
        })
        .collect();
    Sentence::new(id, tokens).unwrap()
}

/// Random valid sentence: chunk runs, one predicate, optional support and
/// ARG1, assorted frame strings.
pub fn random_sentence<R: Rng>(rng: &mut R, id: usize) -> Sentence {
    const WORDS: &[&str] = &["price", "Exxon", "of", "5", "%", "the", "rose", ",", "said", "x-y", "\"q\""];
    const POS: &[&str] = &["NN", "NNP", "IN", "CD", "DT", "VBD", ",", "``"];
    const LABELS: &[&str] = &["NP", "VP", "PP", "ADJP"];
    const FRAMES: &[&str] = &["", "QUANT", "QUANT/NOM", "PART-OF-BODY-FURNITURE-ETC"];
    let n = rng.gen_range(1..12);
    let mut bios = Vec::with_capacity(n);
    let mut open: Option<&str> = None;
    for _ in 0..n {
        let choice = rng.gen_range(0..3);
        let bio = match (choice, open) {
            (0, Some(l)) => format!("I-{l}"),
            (1, _) | (0, None) => {
                let l = *LABELS.choose(rng).unwrap();
                open = Some(l);
                format!("B-{l}")
            }
            _ => {
                open = None;
                "O".to_owned()
            }
        };
        bios.push(bio);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let pred = order[0];
    let arg1 = order.get(1).copied().filter(|_| rng.gen_bool(0.8));
    let sup = order.get(2).copied().filter(|_| rng.gen_bool(0.5));
    let tokens = bios
        .into_iter()
        .enumerate()
        .map(|(index, bio)| {
            let func = if index == pred {
                Role::Predicate
            } else if Some(index) == arg1 {
                Role::Arg1
            } else if Some(index) == sup {
                Role::Support
            } else {
                Role::None
            };
            let frame = if func == Role::Predicate {
                FRAMES.choose(rng).unwrap().to_string()
            } else {
                String::new()
            };
            Token {
                word: WORDS.choose(rng).unwrap().to_string(),
                pos: POS.choose(rng).unwrap().to_string(),
                bio,
                index,
                func,
                frame,
            }
        })
        .collect();
    Sentence::new(id, tokens).unwrap()
}

/// A depth-one decision picked by exhaustive search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleStump {
    /// None for a constant classifier.
    pub split: Option<(usize, f64)>,
    pub left: i8,
    pub right: i8,
    pub error: f64,
}

fn majority(pos: f64, neg: f64) -> i8 {
    if pos >= neg {
        1
    } else {
        -1
    }
}

/// Every (feature, midpoint threshold) pair with majority leaves; the lowest
/// weighted error wins, ties going to the lowest feature and then the lowest
/// threshold. A split must beat the constant classifier outright.
pub fn stump_oracle(rows: &[Vec<f64>], labels: &[bool], weights: &[f64]) -> OracleStump {
    const EPS: f64 = 1e-9;
    let class_mass = |keep: &dyn Fn(usize) -> bool| {
        let (mut p, mut n) = (0.0, 0.0);
        for i in 0..rows.len() {
            if keep(i) {
                if labels[i] {
                    p += weights[i];
                } else {
                    n += weights[i];
                }
            }
        }
        (p, n)
    };
    let (p, n) = class_mass(&|_| true);
    let constant = majority(p, n);
    let mut best = OracleStump {
        split: None,
        left: constant,
        right: constant,
        error: if constant > 0 { n } else { p },
    };
    let mut best_split: Option<OracleStump> = None;
    let width = rows.first().map_or(0, Vec::len);
    for f in 0..width {
        let mut values: Vec<f64> = rows.iter().map(|r| r[f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for pair in values.windows(2) {
            let t = 0.5 * (pair[0] + pair[1]);
            let (lp, ln) = class_mass(&|i| rows[i][f] <= t);
            let (rp, rn) = class_mass(&|i| rows[i][f] > t);
            let (l, r) = (majority(lp, ln), majority(rp, rn));
            let error = (if l > 0 { ln } else { lp }) + (if r > 0 { rn } else { rp });
            if best_split.is_none_or(|b| error < b.error - EPS) {
                best_split = Some(OracleStump {
                    split: Some((f, t)),
                    left: l,
                    right: r,
                    error,
                });
            }
        }
    }
    if let Some(s) = best_split {
        if s.error < best.error - EPS {
            best = s;
        }
    }
    best
}

pub fn tree_as_stump(tree: &Tree) -> Option<OracleStump> {
    match tree {
        Tree::Leaf { value } => Some(OracleStump {
            split: None,
            left: *value,
            right: *value,
            error: f64::NAN,
        }),
        Tree::Split {
            feature,
            threshold,
            left,
            right,
            ..
        } => match (left.as_ref(), right.as_ref()) {
            (Tree::Leaf { value: l }, Tree::Leaf { value: r }) => Some(OracleStump {
                split: Some((*feature, *threshold)),
                left: *l,
                right: *r,
                error: f64::NAN,
            }),
            _ => None,
        },
    }
}

/// Σ exp(−y·F(x)) over the training rows for the first `rounds` rounds.
pub fn exp_loss(model: &BoostModel, rows: &[Vec<f64>], labels: &[bool], rounds: usize) -> f64 {
    let truncated = model.truncated(rounds);
    rows.iter()
        .zip(labels)
        .map(|(x, &y)| {
            let m = truncated.margin(x).unwrap();
            (if y { -m } else { m }).exp()
        })
        .sum()
}

/// Checks every round of a depth-one model against exhaustive search under
/// independently recomputed AdaBoost weights, and that the exponential loss
/// never increases.
pub fn check_stump_rounds(model: &BoostModel, rows: &[Vec<f64>], labels: &[bool]) -> Result<(), String> {
    let n = rows.len() as f64;
    for (t, round) in model.rounds.iter().enumerate() {
        let prefix = model.truncated(t);
        let raw: Vec<f64> = rows
            .iter()
            .zip(labels)
            .map(|(x, &y)| {
                let m = prefix.margin(x).unwrap();
                ((if y { -m } else { m }).exp()) / n
            })
            .collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let oracle = stump_oracle(rows, labels, &weights);
        let chosen = tree_as_stump(&round.tree).ok_or(format!("round {t}: not a stump"))?;
        if chosen.split != oracle.split || chosen.left != oracle.left || chosen.right != oracle.right {
            return Err(format!("round {t}: chose {chosen:?}, oracle {oracle:?}"));
        }
        if (round.error - oracle.error).abs() > 1e-9 {
            return Err(format!("round {t}: error {} vs oracle {}", round.error, oracle.error));
        }
        if round.error >= 0.5 {
            return Err(format!("round {t}: kept a round with error {}", round.error));
        }
    }
    let mut previous = f64::INFINITY;
    for t in 0..=model.rounds.len() {
        let loss = exp_loss(model, rows, labels, t);
        if loss > previous * (1.0 + 1e-12) {
            return Err(format!("exponential loss rose at round {t}: {previous} -> {loss}"));
        }
        previous = loss;
    }
    Ok(())
}

/// Small integer-valued dataset with both classes present.
pub fn random_dataset<R: Rng>(rng: &mut R) -> (Vec<Vec<f64>>, Vec<bool>) {
    loop {
        let n = rng.gen_range(2..=12);
        let d = rng.gen_range(1..=4);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-2..=3) as f64).collect())
            .collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        if labels.iter().any(|y| *y) && labels.iter().any(|y| !*y) {
            return (rows, labels);
        }
    }
}

/// Synthetic train/dev/test corpora with gold trees and shared vectors.
pub struct SynthSplits {
    pub train: Corpus,
    pub dev: Corpus,
    pub test: Corpus,
    pub vectors: VectorStore,
}

pub fn synth_splits(task: Task, train: usize, dev: usize, test: usize, seed: u64) -> SynthSplits {
    let make = |size, offset| {
        let c = generate(&SynthConfig {
            task,
            sentences: size,
            seed: seed + offset,
            ..SynthConfig::default()
        });
        let words: Vec<String> = c.words().map(str::to_owned).collect();
        (Corpus::new(c.sentences).with_trees(c.trees).unwrap(), words)
    };
    let (train, mut words) = make(train, 0);
    let (dev, w) = make(dev, 1);
    words.extend(w);
    let (test, w) = make(test, 2);
    words.extend(w);
    let vectors = random_vectors(words.iter().map(String::as_str), 16, seed);
    SynthSplits {
        train,
        dev,
        test,
        vectors,
    }
}

/// Sentences of random nouns where ARG1 sits exactly three tokens before the
/// predicate (or three after when there is no room). Only distance and chunk
/// path features can find it.
pub fn distance_corpus<R: Rng>(rng: &mut R, sentences: usize) -> Corpus {
    const POOL: &[&str] = &[
        "apple", "budget", "cost", "debt", "earnings", "fund", "gain", "harvest", "income",
        "job", "kit", "loan", "margin", "net", "output", "price", "quota", "rate", "sale", "tax",
    ];
    let out = (0..sentences)
        .map(|id| {
            let n = rng.gen_range(8..=12);
            let pred = rng.gen_range(0..n);
            let arg1 = if pred >= 3 { pred - 3 } else { pred + 3 };
            let rows: Vec<(&str, &str, &str, Role)> = (0..n)
                .map(|i| {
                    if i == pred {
                        ("percent", "NN", "B-NP", Role::Predicate)
                    } else {
                        let role = if i == arg1 { Role::Arg1 } else { Role::None };
                        (*POOL.choose(rng).unwrap(), "NN", "B-NP", role)
                    }
                })
                .collect();
            sentence(id, &rows)
        })
        .collect();
    Corpus::new(out)
}

pub fn pool_vectors(seed: u64) -> VectorStore {
    let words = [
        "apple", "budget", "cost", "debt", "earnings", "fund", "gain", "harvest", "income", "job",
        "kit", "loan", "margin", "net", "output", "price", "quota", "rate", "sale", "tax", "percent",
    ];
    random_vectors(words, 8, seed)
}
