use std::fmt;

use crate::error::{Error, ParseErrorKind, Result};

/// Label of the nonterminal that wraps the subword pieces of one word.
pub const WORD_LABEL: &str = "WORD";

/// A child of a [`PhraseTree`]: either a subtree or a terminal string.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Node {
    Tree(PhraseTree),
    Leaf(String),
}

impl Node {
    pub fn as_tree(&self) -> Option<&PhraseTree> {
        match self {
            Node::Tree(t) => Some(t),
            Node::Leaf(_) => None,
        }
    }

    pub fn as_leaf(&self) -> Option<&str> {
        match self {
            Node::Leaf(s) => Some(s),
            Node::Tree(_) => None,
        }
    }
}

/// A rooted, ordered phrase-structure tree.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PhraseTree {
    pub label: String,
    pub children: Vec<Node>,
}

impl PhraseTree {
    pub fn new(label: impl Into<String>, children: Vec<Node>) -> Self {
        PhraseTree { label: label.into(), children }
    }

    /// A `WORD` node over the given pieces.
    pub fn word<S: AsRef<str>>(pieces: &[S]) -> Self {
        PhraseTree::new(WORD_LABEL, pieces.iter().map(|p| Node::Leaf(p.as_ref().to_string())).collect())
    }

    pub fn is_word(&self) -> bool {
        self.label == WORD_LABEL
    }

    /// True when the node has exactly one child and that child is a terminal.
    pub fn is_preterminal(&self) -> bool {
        matches!(self.children.as_slice(), [Node::Leaf(_)])
    }

    /// Terminals in left-to-right order.
    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a str>) {
        for child in &self.children {
            match child {
                Node::Leaf(s) => out.push(s),
                Node::Tree(t) => t.collect_leaves(out),
            }
        }
    }

    pub fn num_internal(&self) -> usize {
        1 + self.children.iter().filter_map(Node::as_tree).map(PhraseTree::num_internal).sum::<usize>()
    }

    pub fn num_leaves(&self) -> usize {
        self.children
            .iter()
            .map(|c| match c {
                Node::Leaf(_) => 1,
                Node::Tree(t) => t.num_leaves(),
            })
            .sum()
    }

    /// Height counted in nonterminal levels; a node with only terminal children has depth 1.
    pub fn depth(&self) -> usize {
        1 + self.children.iter().filter_map(Node::as_tree).map(PhraseTree::depth).max().unwrap_or(0)
    }

    /// Recursively reverses the order of children at every node.
    pub fn mirror(&self) -> PhraseTree {
        PhraseTree {
            label: self.label.clone(),
            children: self
                .children
                .iter()
                .rev()
                .map(|c| match c {
                    Node::Leaf(s) => Node::Leaf(s.clone()),
                    Node::Tree(t) => Node::Tree(t.mirror()),
                })
                .collect(),
        }
    }

    /// Labels of all internal nodes in preorder.
    pub fn labels(&self) -> Vec<&str> {
        let mut out = vec![self.label.as_str()];
        for child in &self.children {
            if let Node::Tree(t) = child {
                out.extend(t.labels());
            }
        }
        out
    }

    /// Applies `f` to every internal label.
    pub fn map_labels(&self, f: &impl Fn(&str) -> String) -> PhraseTree {
        PhraseTree {
            label: f(&self.label),
            children: self
                .children
                .iter()
                .map(|c| match c {
                    Node::Leaf(s) => Node::Leaf(s.clone()),
                    Node::Tree(t) => Node::Tree(t.map_labels(f)),
                })
                .collect(),
        }
    }

    /// Drops grammar annotations of the form `NP_s` -> `NP` from every label.
    pub fn strip_annotations(&self) -> PhraseTree {
        self.map_labels(&|l: &str| match l.split_once('_') {
            Some((head, _)) if !head.is_empty() => head.to_string(),
            _ => l.to_string(),
        })
    }

    /// Checks the WORD-augmentation invariants: every terminal sits directly
    /// under exactly one `WORD` node, `WORD` nodes hold only terminals, and
    /// every node has at least one child.
    pub fn validate_augmented(&self) -> Result<()> {
        self.validate_augmented_inner(true)
    }

    fn validate_augmented_inner(&self, root: bool) -> Result<()> {
        if self.children.is_empty() {
            return Err(Error::data(format!("node {} has no children", self.label)));
        }
        if self.is_word() {
            if root {
                return Err(Error::data("WORD node cannot be the root"));
            }
            if self.children.iter().any(|c| c.as_tree().is_some()) {
                return Err(Error::data("WORD node contains a nonterminal"));
            }
            return Ok(());
        }
        for child in &self.children {
            match child {
                Node::Leaf(s) => {
                    return Err(Error::data(format!(
                        "terminal {s:?} is not wrapped in a WORD node (parent {})",
                        self.label
                    )))
                }
                Node::Tree(t) => t.validate_augmented_inner(false)?,
            }
        }
        Ok(())
    }
}

fn escape_terminal(s: &str) -> String {
    match s {
        "(" => "-LRB-".to_string(),
        ")" => "-RRB-".to_string(),
        _ => s.replace('(', "-LRB-").replace(')', "-RRB-"),
    }
}

fn unescape_terminal(s: &str) -> String {
    s.replace("-LRB-", "(").replace("-RRB-", ")")
}

impl fmt::Display for PhraseTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.label)?;
        for child in &self.children {
            match child {
                Node::Leaf(s) => write!(f, " {}", escape_terminal(s))?,
                Node::Tree(t) => write!(f, " {t}")?,
            }
        }
        write!(f, ")")
    }
}

/// Renders a tree as a single bracketed line.
pub fn render_bracketed(tree: &PhraseTree) -> String {
    tree.to_string()
}

#[derive(Debug, PartialEq)]
enum Tok<'a> {
    Open,
    Close,
    Atom(&'a str),
}

/// Splits a line into tokens tagged with 1-based character offsets.
fn lex(line: &str) -> Vec<(usize, Tok<'_>)> {
    let mut out = Vec::new();
    let mut atom_start: Option<(usize, usize)> = None;
    let mut char_pos = 0usize;
    for (byte, ch) in line.char_indices() {
        char_pos += 1;
        let is_delim = ch == '(' || ch == ')' || ch.is_whitespace();
        if is_delim {
            if let Some((b0, c0)) = atom_start.take() {
                out.push((c0, Tok::Atom(&line[b0..byte])));
            }
            match ch {
                '(' => out.push((char_pos, Tok::Open)),
                ')' => out.push((char_pos, Tok::Close)),
                _ => {}
            }
        } else if atom_start.is_none() {
            atom_start = Some((byte, char_pos));
        }
    }
    if let Some((b0, c0)) = atom_start {
        out.push((c0, Tok::Atom(&line[b0..])));
    }
    out
}

/// Parses one bracketed tree, e.g. `(S (NP (WORD The)) (VP (WORD ba ##rk ##s)))`.
///
/// Offsets in errors are 1-based character positions; a premature end of
/// input is reported one past the last character.
pub fn parse_bracketed(line: &str) -> Result<PhraseTree> {
    let toks = lex(line);
    let end = line.chars().count() + 1;
    let err = |offset: usize, kind: ParseErrorKind| Error::Parse { offset, kind };

    // Stack of (open offset, label, children).
    let mut stack: Vec<(usize, Option<String>, Vec<Node>)> = Vec::new();
    let mut done: Option<PhraseTree> = None;

    for (offset, tok) in toks {
        match tok {
            Tok::Open => {
                if done.is_some() {
                    return Err(err(offset, ParseErrorKind::StrayToken("(".into())));
                }
                stack.push((offset, None, Vec::new()));
            }
            Tok::Atom(a) => {
                let Some(top) = stack.last_mut() else {
                    return Err(err(offset, ParseErrorKind::StrayToken(a.to_string())));
                };
                if top.1.is_none() && top.2.is_empty() {
                    top.1 = Some(a.to_string());
                } else {
                    top.2.push(Node::Leaf(unescape_terminal(a)));
                }
            }
            Tok::Close => {
                let Some((open, label, children)) = stack.pop() else {
                    return Err(err(offset, ParseErrorKind::Unbalanced));
                };
                let Some(label) = label else {
                    if children.is_empty() {
                        return Err(err(open, ParseErrorKind::EmptyConstituent));
                    }
                    return Err(err(open, ParseErrorKind::MissingLabel));
                };
                if children.is_empty() {
                    return Err(err(open, ParseErrorKind::EmptyConstituent));
                }
                let tree = PhraseTree { label, children };
                match stack.last_mut() {
                    Some(parent) => {
                        if parent.1.is_none() {
                            return Err(err(parent.0, ParseErrorKind::MissingLabel));
                        }
                        parent.2.push(Node::Tree(tree));
                    }
                    None => done = Some(tree),
                }
            }
        }
    }
    if !stack.is_empty() {
        return Err(err(end, ParseErrorKind::Unbalanced));
    }
    done.ok_or_else(|| err(end, ParseErrorKind::EmptyConstituent))
}

/// Parses a tree file: one tree per non-blank line.
pub fn parse_tree_file(text: &str) -> Result<Vec<PhraseTree>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            parse_bracketed(l).map_err(|e| match e {
                Error::Parse { offset, kind } => {
                    Error::data(format!("line {}: parse error at offset {offset}: {kind}", i + 1))
                }
                other => other,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = "(S (NP (WORD The) (WORD d ##og)) (VP (WORD ba ##rk ##s)))";

    #[test]
    fn minimal_tree() {
        let t = parse_bracketed("(S (WORD a))").unwrap();
        assert_eq!(t.label, "S");
        let word = t.children[0].as_tree().unwrap();
        assert!(word.is_word());
        assert_eq!(word.children, vec![Node::Leaf("a".into())]);
        assert_eq!(render_bracketed(&t), "(S (WORD a))");
    }

    #[test]
    fn subword_example_round_trips() {
        let t = parse_bracketed(EXAMPLE).unwrap();
        assert_eq!(t.leaves(), vec!["The", "d", "##og", "ba", "##rk", "##s"]);
        assert_eq!(t.num_internal(), 6);
        assert_eq!(render_bracketed(&t), EXAMPLE);
        t.validate_augmented().unwrap();
    }

    #[test]
    fn whitespace_is_normalized() {
        let t = parse_bracketed("  (S\t(NP   (WORD a) )\n)").unwrap();
        assert_eq!(render_bracketed(&t), "(S (NP (WORD a)))");
    }

    #[test]
    fn unbalanced_reports_end_offset() {
        match parse_bracketed("(S (NP") {
            Err(Error::Parse { offset, kind }) => {
                assert_eq!(kind, ParseErrorKind::Unbalanced);
                assert_eq!(offset, 7);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn extra_close_is_unbalanced() {
        match parse_bracketed("(S a))") {
            Err(Error::Parse { offset, kind }) => {
                assert_eq!(kind, ParseErrorKind::Unbalanced);
                assert_eq!(offset, 6);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_constituent() {
        match parse_bracketed("(S (NP) (VP a))") {
            Err(Error::Parse { offset, kind }) => {
                assert_eq!(kind, ParseErrorKind::EmptyConstituent);
                assert_eq!(offset, 4);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_bracketed("()"), Err(Error::Parse { kind: ParseErrorKind::EmptyConstituent, .. })));
    }

    #[test]
    fn stray_tokens() {
        match parse_bracketed("a (S b)") {
            Err(Error::Parse { offset, kind }) => {
                assert_eq!(kind, ParseErrorKind::StrayToken("a".into()));
                assert_eq!(offset, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
        match parse_bracketed("(S b) c") {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 7),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_bracketed("(S b) (S c)").is_err());
    }

    #[test]
    fn brackets_in_terminals_are_escaped() {
        let t = PhraseTree::new("S", vec![Node::Tree(PhraseTree::word(&["("]))]);
        let line = render_bracketed(&t);
        assert_eq!(line, "(S (WORD -LRB-))");
        assert_eq!(parse_bracketed(&line).unwrap(), t);
        let t = PhraseTree::new("S", vec![Node::Tree(PhraseTree::word(&[")"]))]);
        assert_eq!(render_bracketed(&t), "(S (WORD -RRB-))");
    }

    #[test]
    fn mirror_is_an_involution() {
        let t = parse_bracketed(EXAMPLE).unwrap();
        let m = t.mirror();
        assert_eq!(render_bracketed(&m), "(S (VP (WORD ##s ##rk ba)) (NP (WORD ##og d) (WORD The)))");
        assert_eq!(m.mirror(), t);
    }

    #[test]
    fn augmentation_violations() {
        let bare = parse_bracketed("(S a)").unwrap();
        assert!(bare.validate_augmented().is_err());
        let nested = parse_bracketed("(S (WORD (WORD a)))").unwrap();
        assert!(nested.validate_augmented().is_err());
    }

    #[test]
    fn strip_annotations_drops_suffix() {
        let t = parse_bracketed("(S (NP_s (D_s the) (N_s dog)) (VP_s (V_s barks)))").unwrap();
        assert_eq!(render_bracketed(&t.strip_annotations()), "(S (NP (D the) (N dog)) (VP (V barks)))");
    }
}
