//! Seeded synthetic corpus: template sentences with gold trees, chunk tags
//! derived from the trees, and random word vectors.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Role, Sentence, Token};
use crate::embeddings::VectorStore;
use crate::features::Task;
use crate::parsetree::{bare_label, ParseTree};

const NOUNS: &[&str] = &[
    "price", "revenue", "profit", "output", "sales", "budget", "debt", "income", "stock",
    "market", "index", "rate", "supply", "demand", "volume", "cost", "payroll", "spending",
    "exports", "imports", "earnings", "capital", "assets", "equity", "traffic", "usage",
    "membership", "production", "inventory", "value",
];
const NUMBERS: &[&str] = &["5", "10", "20", "3.5", "12", "40", "two", "seven", "0.5"];
const MONTHS: &[&str] = &["January", "March", "May", "August", "October", "December"];
const CHANGE_VERBS: &[&str] = &["rose", "fell", "climbed", "dropped", "gained", "slipped"];
const CAUSE_VERBS: &[&str] = &["raised", "cut", "boosted", "lowered", "trimmed"];
const SPEAKERS: &[&str] = &["analysts", "officials", "economists", "traders"];
const PERCENT_WORDS: &[&str] = &["percent", "%"];
const PARTITIVES: &[(&str, &str)] = &[
    ("share", "SHARE"),
    ("half", "QUANT"),
    ("part", "PART"),
    ("portion", "PART"),
    ("group", "GROUP"),
    ("members", "GROUP/NOM"),
];

#[derive(Clone, Debug)]
pub struct SynthConfig {
    pub task: Task,
    pub sentences: usize,
    pub seed: u64,
    /// Chance of each distractor: a leading PP, a second unannotated clause
    /// and a trailing speaker clause.
    pub distractor_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            task: Task::Percent,
            sentences: 600,
            seed: 0,
            distractor_rate: 0.4,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SynthCorpus {
    pub sentences: Vec<Sentence>,
    pub trees: Vec<ParseTree>,
}

impl SynthCorpus {
    /// One tree per line.
    pub fn trees_text(&self) -> String {
        self.trees.iter().map(|t| format!("{t}\n")).collect()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.sentences.iter().flat_map(Sentence::words)
    }
}

/// Leaves in surface order with the role and frame each one carries.
struct Builder {
    words: Vec<(String, String, Role, String)>,
}

impl Builder {
    fn leaf(&mut self, tag: &str, word: &str) -> ParseTree {
        self.mark(tag, word, Role::None, "")
    }

    fn mark(&mut self, tag: &str, word: &str, role: Role, frame: &str) -> ParseTree {
        self.words
            .push((word.to_owned(), tag.to_owned(), role, frame.to_owned()));
        ParseTree::leaf(tag, word)
    }
}

fn pick<'a, R: Rng>(rng: &mut R, items: &[&'a str]) -> &'a str {
    items.choose(rng).expect("non-empty pool")
}

fn predicate<R: Rng>(rng: &mut R, task: Task) -> (&'static str, &'static str) {
    match task {
        Task::Percent => (pick(rng, PERCENT_WORDS), "QUANT"),
        Task::Partitive => *PARTITIVES.choose(rng).expect("non-empty pool"),
    }
}

/// One clause from a template. Roles are only marked when `annotated`.
fn clause<R: Rng>(rng: &mut R, task: Task, annotated: bool, b: &mut Builder) -> Vec<ParseTree> {
    let role = |r: Role| if annotated { r } else { Role::None };
    let noun = pick(rng, NOUNS);
    let number = pick(rng, NUMBERS);
    let (pred, frame) = predicate(rng, task);
    let frame = if annotated { frame } else { "" };
    let templates = if task == Task::Partitive { 4 } else { 3 };
    let mut children = Vec::new();
    match rng.gen_range(0..templates) {
        // NUM PRED of the NOUN VERB
        0 => {
            let head = ParseTree::node(
                "NP",
                vec![b.leaf("CD", number), b.mark("NN", pred, role(Role::Predicate), frame)],
            );
            let pp = ParseTree::node(
                "PP",
                vec![
                    b.leaf("IN", "of"),
                    ParseTree::node(
                        "NP",
                        vec![b.leaf("DT", "the"), b.mark("NN", noun, role(Role::Arg1), "")],
                    ),
                ],
            );
            children.push(ParseTree::node("NP-SBJ", vec![head, pp]));
            let verb = b.leaf("VBD", pick(rng, CHANGE_VERBS));
            children.push(ParseTree::node("VP", vec![verb]));
        }
        // the NOUN VERB NUM PRED
        1 => {
            children.push(ParseTree::node(
                "NP-SBJ",
                vec![b.leaf("DT", "the"), b.mark("NN", noun, role(Role::Arg1), "")],
            ));
            let verb = b.mark("VBD", pick(rng, CHANGE_VERBS), role(Role::Support), "");
            let obj = ParseTree::node(
                "NP",
                vec![b.leaf("CD", number), b.mark("NN", pred, role(Role::Predicate), frame)],
            );
            children.push(ParseTree::node("VP", vec![verb, obj]));
        }
        // They VERB the NOUN NUM PRED
        2 => {
            children.push(ParseTree::node("NP-SBJ", vec![b.leaf("PRP", "They")]));
            let verb = b.mark("VBD", pick(rng, CAUSE_VERBS), role(Role::Support), "");
            let obj = ParseTree::node(
                "NP",
                vec![b.leaf("DT", "the"), b.mark("NN", noun, role(Role::Arg1), "")],
            );
            let ext = ParseTree::node(
                "NP-EXT",
                vec![b.leaf("CD", number), b.mark("NN", pred, role(Role::Predicate), frame)],
            );
            children.push(ParseTree::node("VP", vec![verb, obj, ext]));
        }
        // the NOUN PRED VERB
        _ => {
            let inner = ParseTree::node(
                "NP",
                vec![b.leaf("DT", "the"), b.mark("NN", noun, role(Role::Arg1), "")],
            );
            let pred = b.mark("NNS", pred, role(Role::Predicate), frame);
            children.push(ParseTree::node("NP-SBJ", vec![inner, pred]));
            let verb = b.leaf("VBD", pick(rng, CHANGE_VERBS));
            children.push(ParseTree::node("VP", vec![verb]));
        }
    }
    children
}

fn sentence_tree<R: Rng>(rng: &mut R, config: &SynthConfig, b: &mut Builder) -> ParseTree {
    let mut children = Vec::new();
    if rng.gen_bool(config.distractor_rate) {
        let pp = ParseTree::node(
            "PP",
            vec![
                b.leaf("IN", "In"),
                ParseTree::node("NP", vec![b.leaf("NNP", pick(rng, MONTHS))]),
            ],
        );
        children.push(pp);
        children.push(b.leaf(",", ","));
    }
    if rng.gen_bool(config.distractor_rate) {
        // two look-alike clauses, only one of them annotated
        let first_annotated = rng.gen_bool(0.5);
        let first = clause(rng, config.task, first_annotated, b);
        children.push(ParseTree::node("S", first));
        children.push(b.leaf(",", ","));
        children.push(b.leaf("CC", "and"));
        let second = clause(rng, config.task, !first_annotated, b);
        children.push(ParseTree::node("S", second));
    } else {
        children.extend(clause(rng, config.task, true, b));
    }
    if rng.gen_bool(config.distractor_rate) {
        children.push(b.leaf(",", ","));
        children.push(ParseTree::node(
            "NP",
            vec![b.leaf("DT", "the"), b.leaf("NNS", pick(rng, SPEAKERS))],
        ));
        let said = b.leaf("VBD", "said");
        children.push(ParseTree::node("VP", vec![said]));
    }
    children.push(b.leaf(".", "."));
    ParseTree::node("S", children)
}

/// Chunk tags read off a tree: base phrases become B-X I-X…, a verb outside a
/// base phrase opens a VP chunk, a preposition heading a PP opens a PP chunk
/// and a noun directly under a larger NP opens an NP chunk.
pub fn chunk_tags(tree: &ParseTree) -> Vec<String> {
    fn walk(node: &ParseTree, out: &mut Vec<String>) {
        let label = bare_label(&node.label);
        let base = node.children.iter().all(ParseTree::is_leaf);
        for (i, child) in node.children.iter().enumerate() {
            if !child.is_leaf() {
                walk(child, out);
                continue;
            }
            let tag = child.label.as_str();
            let chunk = if base && matches!(label, "NP" | "VP" | "ADJP" | "ADVP") {
                format!("{}-{label}", if i == 0 { "B" } else { "I" })
            } else if tag.starts_with("VB") {
                "B-VP".to_owned()
            } else if label == "PP" && (tag == "IN" || tag == "TO") {
                "B-PP".to_owned()
            } else if label == "NP" && tag.starts_with("NN") {
                "B-NP".to_owned()
            } else {
                "O".to_owned()
            };
            out.push(chunk);
        }
    }
    let mut out = Vec::new();
    if tree.is_leaf() {
        out.push("O".to_owned());
    } else {
        walk(tree, &mut out);
    }
    out
}

pub fn generate(config: &SynthConfig) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut sentences = Vec::with_capacity(config.sentences);
    let mut trees = Vec::with_capacity(config.sentences);
    for id in 0..config.sentences {
        let mut b = Builder { words: Vec::new() };
        let tree = sentence_tree(&mut rng, config, &mut b);
        let tokens = b
            .words
            .into_iter()
            .zip(chunk_tags(&tree))
            .enumerate()
            .map(|(index, ((word, pos, func, frame), bio))| Token {
                word,
                pos,
                bio,
                index,
                func,
                frame,
            })
            .collect();
        let sentence = Sentence::new(id, tokens).expect("templates produce valid sentences");
        sentences.push(sentence);
        trees.push(tree);
    }
    SynthCorpus { sentences, trees }
}

/// Seeded random vectors, uniform in [-1, 1], one per distinct word in
/// first-seen order.
pub fn random_vectors<'a, I>(words: I, dimension: usize, seed: u64) -> VectorStore
where
    I: IntoIterator<Item = &'a str>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = VectorStore::new(dimension);
    for word in words {
        if !store.contains(word) {
            let v = (0..dimension).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            store.insert(word, v);
        }
    }
    store
}
