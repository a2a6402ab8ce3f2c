mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use partitive_srl::corpus::{extract_instance, parse_conll_str, write_conll, Instance, Role};
use partitive_srl::eval::{prf, Predictions};
use partitive_srl::features::{collapse_bio_path, type2_path_flags, window_features, PAD};
use partitive_srl::model::{fit_adaboost, fit_tree, BoostParams, Dataset, Tree};
use partitive_srl::parsetree::{tree_path, ParseTree};

use common::*;

/// Random tree over `n` leaves where every internal node has at least two
/// children, labels drawn from a small inventory.
fn random_tree<R: Rng>(rng: &mut R, leaves: usize, next: &mut usize) -> ParseTree {
    const LABELS: &[&str] = &["S", "VP", "NP", "PP"];
    if leaves == 1 {
        let i = *next;
        *next += 1;
        let tag = ["NN", "VBD", "DT", "IN"][rng.gen_range(0..4)];
        let mut leaf = ParseTree::leaf(tag, format!("w{i}"));
        leaf.leaf_index = Some(i);
        return leaf;
    }
    let parts = rng.gen_range(2..=leaves.min(3));
    let mut sizes = vec![1; parts];
    for _ in 0..leaves - parts {
        sizes[rng.gen_range(0..parts)] += 1;
    }
    let children = sizes
        .into_iter()
        .map(|s| random_tree(rng, s, next))
        .collect();
    ParseTree::node(LABELS[rng.gen_range(0..LABELS.len())], children)
}

fn instance(pred: usize, support: Option<usize>) -> Instance {
    Instance {
        sentence_id: 0,
        predicate_index: pred,
        support_indices: support.into_iter().collect(),
        arg1_index: None,
        frame_classes: BTreeSet::new(),
    }
}

#[test]
fn tree_path_reverses() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let n = rng.gen_range(2..9);
        let tree = random_tree(&mut rng, n, &mut 0);
        for a in 0..n {
            for b in 0..n {
                if a == b {
                    continue;
                }
                let ab = tree_path(&tree, a, b).unwrap();
                let ba = tree_path(&tree, b, a).unwrap();
                // both walks meet at the same ancestor
                assert_eq!(ab.up_labels.last(), ba.up_labels.last());
                let mut climb = ab.up_labels[..ab.up_labels.len() - 1].to_vec();
                climb.reverse();
                assert_eq!(climb, ba.down_labels, "{tree} {a} {b}");
            }
        }
    }
}

#[test]
fn at_most_one_path_flag() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..300 {
        let n = rng.gen_range(2..9);
        let tree = random_tree(&mut rng, n, &mut 0);
        for pred in 0..n {
            let supports = std::iter::once(None).chain((0..n).filter(|s| *s != pred).map(Some));
            for sup in supports {
                let inst = instance(pred, sup);
                for idx in 0..n {
                    if idx == pred || Some(idx) == sup {
                        continue;
                    }
                    let flags = type2_path_flags(&tree, &inst, idx).unwrap();
                    assert!(
                        flags.iter().filter(|f| **f).count() <= 1,
                        "{tree} pred {pred} sup {sup:?} idx {idx}: {flags:?}"
                    );
                }
            }
        }
    }
}

#[test]
fn window_padding_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..100 {
        let s = random_sentence(&mut rng, i);
        let n = s.len();
        for idx in 0..n {
            let r = window_features(&s, idx);
            assert_eq!(r.categorical.len(), 15);
            let pads = r.categorical.iter().filter(|(k, v)| k.starts_with("word_") && *v == PAD).count();
            let expected = 2usize.saturating_sub(idx) + (idx + 3).saturating_sub(n);
            assert_eq!(pads, expected);
        }
    }
}

#[test]
fn single_chunk_collapse() {
    let rows: Vec<_> = (0..5)
        .map(|i| {
            let bio = if i == 0 { "B-NP" } else { "I-NP" };
            let role = if i == 4 { Role::Predicate } else { Role::None };
            ("w", "NNS", bio, role)
        })
        .collect();
    let s = sentence(0, &rows);
    for a in 0..5 {
        for b in 0..5 {
            if a == b {
                continue;
            }
            let path = collapse_bio_path(&s, a, b).unwrap();
            let dir = if b > a { "right" } else { "left" };
            assert_eq!(path, format!("{dir}_NP_NOUN"));
        }
    }
}

fn split_features(tree: &Tree) -> Vec<usize> {
    match tree {
        Tree::Leaf { .. } => Vec::new(),
        Tree::Split { feature, left, right, .. } => {
            let mut out = vec![*feature];
            out.extend(split_features(left));
            out.extend(split_features(right));
            out
        }
    }
}

#[test]
fn depth_two_trees_never_worse_than_stumps() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let (rows, labels) = random_dataset(&mut rng);
        let data = Dataset::from_rows(&rows).unwrap();
        let w = vec![1.0 / rows.len() as f64; rows.len()];
        let err = |pred: &[i8]| -> f64 {
            pred.iter()
                .zip(&labels)
                .zip(&w)
                .filter(|((h, y), _)| (**h > 0) != **y)
                .map(|(_, w)| w)
                .sum()
        };
        let (_, p1) = fit_tree(&data, &labels, &w, 1);
        let (t2, p2) = fit_tree(&data, &labels, &w, 2);
        assert!(err(&p2) <= err(&p1) + 1e-12);
        assert!(split_features(&t2).iter().all(|f| *f < data.width()));
        for (x, p) in rows.iter().zip(&p2) {
            assert_eq!(t2.predict(x), *p);
        }
    }
}

#[test]
fn boosting_is_deterministic_and_loss_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let (rows, labels) = random_dataset(&mut rng);
        let data = Dataset::from_rows(&rows).unwrap();
        for depth in [1, 2, 3] {
            let params = BoostParams {
                rounds: 15,
                depth,
                ..BoostParams::default()
            };
            let a = fit_adaboost(&data, &labels, &params).unwrap();
            let b = fit_adaboost(&data, &labels, &params).unwrap();
            assert_eq!(a.to_json(), b.to_json());
            let mut prev = f64::INFINITY;
            for t in 0..=a.rounds.len() {
                let loss = exp_loss(&a, &rows, &labels, t);
                assert!(loss <= prev * (1.0 + 1e-12));
                prev = loss;
            }
            assert!(a.rounds.iter().all(|r| r.error < 0.5 && r.alpha.is_finite()));
        }
    }
}

#[test]
fn leaf_only_rounds_are_constant() {
    // every feature constant: the weak learner cannot split
    let rows = vec![vec![1.0]; 4];
    let labels = [true, true, true, false];
    let data = Dataset::from_rows(&rows).unwrap();
    let model = fit_adaboost(&data, &labels, &BoostParams::default()).unwrap();
    assert!(model.rounds.iter().all(|r| matches!(r.tree, Tree::Leaf { .. })));
    assert!(model.score(&[1.0]).unwrap() > 0.5);
}

fn arb_predictions(n: usize) -> impl Strategy<Value = Vec<BTreeSet<usize>>> {
    proptest::collection::vec(proptest::collection::btree_set(0usize..12, 0..3), n)
}

proptest! {
    #[test]
    fn prf_counts_and_order(seed in 0u64..1000, preds in arb_predictions(30)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sentences: Vec<_> = (0..30).map(|i| random_sentence(&mut rng, i)).collect();
        let gold: Vec<_> = sentences.iter().map(extract_instance).collect();
        let predictions: Predictions = preds
            .into_iter()
            .enumerate()
            .map(|(i, set)| (i, set.into_iter().filter(|t| *t < sentences[i].len()).collect()))
            .collect();
        let scores = prf(&predictions, &gold, &sentences);
        let arg1s = gold.iter().filter(|g| g.arg1_index.is_some()).count();
        prop_assert_eq!(scores.tp + scores.fn_, arg1s);
        if scores.precision + scores.recall > 0.0 {
            let h = 2.0 * scores.precision * scores.recall / (scores.precision + scores.recall);
            prop_assert!((scores.f1 - h).abs() < 1e-9);
        }

        let mut order: Vec<usize> = (0..30).collect();
        order.reverse();
        let shuffled_s: Vec<_> = order.iter().map(|&i| sentences[i].clone()).collect();
        let shuffled_g: Vec<_> = order.iter().map(|&i| gold[i].clone()).collect();
        prop_assert_eq!(prf(&predictions, &shuffled_g, &shuffled_s), scores);
    }

    #[test]
    fn conll_reserialization_is_stable(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sentences: Vec<_> = (0..rng.gen_range(0..6)).map(|i| random_sentence(&mut rng, i)).collect();
        let text = write_conll(&sentences);
        let back = parse_conll_str(&text).unwrap();
        prop_assert_eq!(&back, &sentences);
        prop_assert_eq!(write_conll(&back), text);
        let instances: BTreeMap<_, _> = back.iter().map(|s| (s.sentence_id, extract_instance(s))).collect();
        prop_assert_eq!(instances.len(), back.len());
    }
}
