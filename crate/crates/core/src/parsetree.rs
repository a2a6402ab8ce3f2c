//! Bracketed constituency trees and up/down label paths between leaves.
//!
//! Leaves are preterminals: a node carrying a POS label and the surface word,
//! e.g. `(NN price)`.

use std::fmt;

use thiserror::Error;

use crate::corpus::Sentence;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("offset {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("tree has {leaves} leaves but the sentence has {tokens} tokens")]
    LeafCount { leaves: usize, tokens: usize },
    #[error("leaf {position}: tree word {tree:?} does not match token {token:?}")]
    WordMismatch {
        position: usize,
        tree: String,
        token: String,
    },
    #[error("leaf ordinal {0} out of range")]
    OutOfRange(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseTree {
    pub label: String,
    pub children: Vec<ParseTree>,
    pub leaf_word: Option<String>,
    pub leaf_index: Option<usize>,
}

impl ParseTree {
    pub fn leaf(label: impl Into<String>, word: impl Into<String>) -> ParseTree {
        ParseTree {
            label: label.into(),
            children: Vec::new(),
            leaf_word: Some(word.into()),
            leaf_index: None,
        }
    }

    pub fn node(label: impl Into<String>, children: Vec<ParseTree>) -> ParseTree {
        ParseTree {
            label: label.into(),
            children,
            leaf_word: None,
            leaf_index: None,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty() && self.leaf_word.is_some()
    }

    /// Leaves in left-to-right order.
    pub fn leaves(&self) -> Vec<&ParseTree> {
        let mut out = Vec::new();
        fn walk<'a>(node: &'a ParseTree, out: &mut Vec<&'a ParseTree>) {
            if node.is_leaf() {
                out.push(node);
            }
            for child in &node.children {
                walk(child, out);
            }
        }
        walk(self, &mut out);
        out
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().len()
    }

    /// For every leaf, the chain of internal nodes from the root down to the
    /// leaf's parent.
    fn ancestor_chains(&self) -> Vec<Vec<&ParseTree>> {
        let mut chains = Vec::new();
        let mut stack = Vec::new();
        fn walk<'a>(
            node: &'a ParseTree,
            stack: &mut Vec<&'a ParseTree>,
            chains: &mut Vec<Vec<&'a ParseTree>>,
        ) {
            if node.is_leaf() {
                chains.push(stack.clone());
                return;
            }
            stack.push(node);
            for child in &node.children {
                walk(child, stack, chains);
            }
            stack.pop();
        }
        walk(self, &mut stack, &mut chains);
        chains
    }

    /// Drops `-NONE-` empty elements (PTB traces) and any constituent left
    /// without children.
    pub fn without_empty_elements(&self) -> Option<ParseTree> {
        if self.is_leaf() {
            return (self.label != "-NONE-").then(|| self.clone());
        }
        let children: Vec<ParseTree> = self
            .children
            .iter()
            .filter_map(ParseTree::without_empty_elements)
            .collect();
        if children.is_empty() {
            None
        } else {
            Some(ParseTree {
                label: self.label.clone(),
                children,
                leaf_word: None,
                leaf_index: None,
            })
        }
    }
}

impl fmt::Display for ParseTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(word) = &self.leaf_word {
            return write!(f, "({} {})", self.label, word);
        }
        write!(f, "({}", self.label)?;
        for child in &self.children {
            write!(f, " {child}")?;
        }
        f.write_str(")")
    }
}

/// Strips function tags and coindexation (`NP-SBJ-1` → `NP`, `NP=2` → `NP`).
/// Labels that start with a dash (`-NONE-`, `-LRB-`) are kept as they are.
pub fn bare_label(label: &str) -> &str {
    if label.starts_with('-') {
        return label;
    }
    match label.find(['-', '=']) {
        Some(cut) => &label[..cut],
        None => label,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Lexeme<'a> {
    Open,
    Close,
    Atom(&'a str),
}

struct Lexer<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer { text, pos: 0 }
    }

    fn peek(&self) -> Option<(usize, Lexeme<'a>)> {
        let rest = &self.text[self.pos..];
        let skipped = rest.len() - rest.trim_start().len();
        let start = self.pos + skipped;
        let rest = &self.text[start..];
        let c = rest.chars().next()?;
        Some(match c {
            '(' => (start, Lexeme::Open),
            ')' => (start, Lexeme::Close),
            _ => {
                let end = rest
                    .find(|c: char| c.is_whitespace() || c == '(' || c == ')')
                    .unwrap_or(rest.len());
                (start, Lexeme::Atom(&rest[..end]))
            }
        })
    }

    fn next(&mut self) -> Option<(usize, Lexeme<'a>)> {
        let (start, lexeme) = self.peek()?;
        self.pos = start
            + match lexeme {
                Lexeme::Open | Lexeme::Close => 1,
                Lexeme::Atom(a) => a.len(),
            };
        Some((start, lexeme))
    }
}

fn error(offset: usize, message: impl Into<String>) -> TreeError {
    TreeError::Parse {
        offset,
        message: message.into(),
    }
}

fn parse_node(lexer: &mut Lexer<'_>) -> Result<ParseTree, TreeError> {
    let open = match lexer.next() {
        Some((at, Lexeme::Open)) => at,
        Some((at, _)) => return Err(error(at, "expected '('")),
        None => return Err(error(lexer.text.len(), "unexpected end of input")),
    };
    let label = match lexer.peek() {
        Some((_, Lexeme::Atom(a))) => {
            lexer.next();
            a.to_owned()
        }
        _ => String::new(),
    };
    let mut children = Vec::new();
    let mut words = Vec::new();
    loop {
        match lexer.peek() {
            Some((at, Lexeme::Close)) => {
                lexer.next();
                if children.is_empty() && words.is_empty() {
                    return Err(error(open, "empty constituent"));
                }
                if !words.is_empty() && (!children.is_empty() || words.len() > 1) {
                    return Err(error(at, "a preterminal must hold exactly one word"));
                }
                break;
            }
            Some((_, Lexeme::Open)) => children.push(parse_node(lexer)?),
            Some((_, Lexeme::Atom(word))) => {
                lexer.next();
                words.push(word.to_owned());
            }
            None => return Err(error(open, "unbalanced parentheses: missing ')'")),
        }
    }
    if let Some(word) = words.pop() {
        if label.is_empty() {
            return Err(error(open, "preterminal without a label"));
        }
        return Ok(ParseTree::leaf(label, word));
    }
    // PTB wraps each tree in an unlabeled root: "( (S ...) )".
    if label.is_empty() {
        if children.len() == 1 {
            return Ok(children.pop().expect("one child"));
        }
        return Err(error(open, "unlabeled constituent"));
    }
    Ok(ParseTree::node(label, children))
}

/// Parses exactly one bracketed tree.
pub fn parse_bracketed(text: &str) -> Result<ParseTree, TreeError> {
    let mut lexer = Lexer::new(text);
    let tree = parse_node(&mut lexer)?;
    if let Some((at, _)) = lexer.peek() {
        return Err(error(at, "trailing input after tree"));
    }
    Ok(tree)
}

/// Parses a tree file: consecutive bracketed trees, one per line or spread
/// over blank-line separated blocks.
pub fn parse_tree_file(text: &str) -> Result<Vec<ParseTree>, TreeError> {
    let mut lexer = Lexer::new(text);
    let mut trees = Vec::new();
    while let Some((at, lexeme)) = lexer.peek() {
        match lexeme {
            Lexeme::Open => trees.push(parse_node(&mut lexer)?),
            Lexeme::Close => return Err(error(at, "unbalanced parentheses: stray ')'")),
            Lexeme::Atom(_) => return Err(error(at, "expected '('")),
        }
    }
    Ok(trees)
}

/// Assigns token ordinals to leaves, checking the words line up with the
/// sentence.
pub fn align_leaves(tree: &ParseTree, sentence: &Sentence) -> Result<ParseTree, TreeError> {
    let leaves = tree.leaf_count();
    if leaves != sentence.len() {
        return Err(TreeError::LeafCount {
            leaves,
            tokens: sentence.len(),
        });
    }
    let mut aligned = tree.clone();
    let mut next = 0usize;
    fn assign(
        node: &mut ParseTree,
        next: &mut usize,
        sentence: &Sentence,
    ) -> Result<(), TreeError> {
        if node.is_leaf() {
            let token = &sentence.tokens[*next];
            let word = node.leaf_word.as_deref().unwrap_or_default();
            if word != token.word {
                return Err(TreeError::WordMismatch {
                    position: *next,
                    tree: word.to_owned(),
                    token: token.word.clone(),
                });
            }
            node.leaf_index = Some(*next);
            *next += 1;
            return Ok(());
        }
        for child in &mut node.children {
            assign(child, next, sentence)?;
        }
        Ok(())
    }
    assign(&mut aligned, &mut next, sentence)?;
    Ok(aligned)
}

/// Labels walked from one leaf to another. `up` runs from the source leaf's
/// parent to the lowest common ancestor (inclusive); `down` runs from the
/// LCA's child on the target side to the target leaf's parent.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TreePath {
    pub up_labels: Vec<String>,
    pub down_labels: Vec<String>,
}

impl TreePath {
    pub fn matches(&self, up: &[&str], down: &[&str]) -> bool {
        self.up_labels.iter().map(String::as_str).eq(up.iter().copied())
            && self.down_labels.iter().map(String::as_str).eq(down.iter().copied())
    }
}

impl fmt::Display for TreePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.up_labels {
            write!(f, "↑{l}")?;
        }
        for l in &self.down_labels {
            write!(f, "↓{l}")?;
        }
        Ok(())
    }
}

pub fn tree_path(tree: &ParseTree, source: usize, target: usize) -> Result<TreePath, TreeError> {
    let chains = tree.ancestor_chains();
    let from = chains.get(source).ok_or(TreeError::OutOfRange(source))?;
    let to = chains.get(target).ok_or(TreeError::OutOfRange(target))?;
    if source == target {
        return Ok(TreePath::default());
    }
    let shared = from
        .iter()
        .zip(to.iter())
        .take_while(|(a, b)| std::ptr::eq(**a, **b))
        .count();
    // both chains start at the root, so shared >= 1
    let lca = shared - 1;
    let label = |n: &&ParseTree| bare_label(&n.label).to_owned();
    Ok(TreePath {
        up_labels: from[lca..].iter().rev().map(label).collect(),
        down_labels: to[shared..].iter().map(label).collect(),
    })
}
