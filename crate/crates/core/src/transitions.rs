//! The top-down generative transition system over WORD-augmented trees.

use std::fmt;
use std::str::FromStr;

use crate::corpus::tree::{Node, PhraseTree};
use crate::error::{Error, Result};

/// Reading order of a transition sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    L2R,
    R2L,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::L2R => "l2r",
            Direction::R2L => "r2l",
        }
    }

    /// Puts a left-to-right token sequence into this direction's reading order.
    pub fn orient<T: Clone>(self, tokens: &[T]) -> Vec<T> {
        match self {
            Direction::L2R => tokens.to_vec(),
            Direction::R2L => tokens.iter().rev().cloned().collect(),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l2r" => Ok(Direction::L2R),
            "r2l" => Ok(Direction::R2L),
            other => Err(Error::invalid(format!("unknown direction {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Action {
    Nt(String),
    Gen(String),
    Reduce,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActionKind {
    Nt,
    Gen,
    Reduce,
}

impl Action {
    pub fn kind(&self) -> ActionKind {
        match self {
            Action::Nt(_) => ActionKind::Nt,
            Action::Gen(_) => ActionKind::Gen,
            Action::Reduce => ActionKind::Reduce,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Nt(n) => write!(f, "NT({n})"),
            Action::Gen(w) => write!(f, "GEN({w})"),
            Action::Reduce => f.write_str("REDUCE"),
        }
    }
}

impl FromStr for Action {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "REDUCE" {
            return Ok(Action::Reduce);
        }
        let payload = |prefix: &str| {
            s.strip_prefix(prefix)
                .and_then(|r| r.strip_suffix(')'))
                .filter(|p| !p.is_empty() && !p.contains(char::is_whitespace))
                .map(str::to_string)
        };
        if let Some(n) = payload("NT(") {
            return Ok(Action::Nt(n));
        }
        if let Some(w) = payload("GEN(") {
            return Ok(Action::Gen(w));
        }
        Err(Error::data(format!("unrecognized action {s:?}")))
    }
}

/// Gold action sequence for a WORD-augmented tree.
///
/// Both directions traverse depth-first and top-down; right-to-left expands
/// the children of every node (including the pieces of a word) in reverse.
pub fn oracle(tree: &PhraseTree, dir: Direction) -> Result<Vec<Action>> {
    tree.validate_augmented()?;
    let mut out = Vec::with_capacity(2 * tree.num_internal() + tree.num_leaves());
    match dir {
        Direction::L2R => push_oracle(tree, &mut out),
        Direction::R2L => push_oracle(&tree.mirror(), &mut out),
    }
    Ok(out)
}

fn push_oracle(tree: &PhraseTree, out: &mut Vec<Action>) {
    out.push(Action::Nt(tree.label.clone()));
    for child in &tree.children {
        match child {
            Node::Leaf(w) => out.push(Action::Gen(w.clone())),
            Node::Tree(t) => push_oracle(t, out),
        }
    }
    out.push(Action::Reduce);
}

/// Limits applied while generating from a syntactic model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    /// Maximum number of simultaneously open nonterminals.
    pub max_open: usize,
    /// Optional number of terminals the derivation must stop at.
    pub max_tokens: Option<usize>,
}

impl Limits {
    pub const DEFAULT_MAX_OPEN: usize = 64;

    pub fn unbounded() -> Self {
        Limits { max_open: usize::MAX, max_tokens: None }
    }

    pub fn with_max_tokens(mut self, n: usize) -> Self {
        self.max_tokens = Some(n);
        self
    }
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_open: Self::DEFAULT_MAX_OPEN, max_tokens: None }
    }
}

/// Set of action kinds allowed in a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct KindSet {
    pub nt: bool,
    pub gen: bool,
    pub reduce: bool,
}

impl KindSet {
    pub fn contains(&self, kind: ActionKind) -> bool {
        match kind {
            ActionKind::Nt => self.nt,
            ActionKind::Gen => self.gen,
            ActionKind::Reduce => self.reduce,
        }
    }

    pub fn kinds(&self) -> Vec<ActionKind> {
        [ActionKind::Nt, ActionKind::Gen, ActionKind::Reduce].into_iter().filter(|k| self.contains(*k)).collect()
    }

    pub fn is_empty(&self) -> bool {
        !(self.nt || self.gen || self.reduce)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StackEntry {
    Open(String),
    Done(Node),
}

/// Stack machine state of the transition system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionState {
    stack: Vec<StackEntry>,
    open: usize,
    generated: usize,
    terminated: bool,
    limits: Limits,
}

impl Default for TransitionState {
    fn default() -> Self {
        TransitionState::new(Limits::default())
    }
}

impl TransitionState {
    pub fn new(limits: Limits) -> Self {
        TransitionState { stack: Vec::new(), open: 0, generated: 0, terminated: false, limits }
    }

    pub fn stack(&self) -> &[StackEntry] {
        &self.stack
    }

    pub fn open_count(&self) -> usize {
        self.open
    }

    pub fn generated(&self) -> usize {
        self.generated
    }

    pub fn is_terminated(&self) -> bool {
        self.terminated
    }

    pub fn limits(&self) -> Limits {
        self.limits
    }

    fn top_is_open(&self) -> bool {
        matches!(self.stack.last(), Some(StackEntry::Open(_)))
    }

    fn budget_left(&self) -> bool {
        self.limits.max_tokens.is_none_or(|n| self.generated < n)
    }

    /// Action kinds permitted in this state.
    pub fn legal_kinds(&self) -> KindSet {
        if self.terminated {
            return KindSet::default();
        }
        if self.stack.is_empty() {
            return KindSet { nt: self.limits.max_open > 0, gen: false, reduce: false };
        }
        let has_open = self.open > 0;
        KindSet {
            nt: has_open && self.open < self.limits.max_open && self.budget_left(),
            gen: has_open && self.budget_left(),
            reduce: has_open && !self.top_is_open() && (self.open > 1 || self.generated >= 1),
        }
    }

    fn illegal_reason(&self, action: &Action) -> Option<&'static str> {
        if self.terminated {
            return Some("derivation already terminated");
        }
        let legal = self.legal_kinds();
        if legal.contains(action.kind()) {
            return None;
        }
        Some(match action.kind() {
            ActionKind::Nt if self.stack.is_empty() => "depth cap is zero",
            ActionKind::Nt if self.open >= self.limits.max_open => "open-nonterminal cap reached",
            ActionKind::Nt | ActionKind::Gen if !self.budget_left() => "token budget exhausted",
            ActionKind::Gen if self.stack.is_empty() => "first action must be NT",
            ActionKind::Reduce if self.stack.is_empty() => "first action must be NT",
            ActionKind::Reduce if self.top_is_open() => "REDUCE on empty constituent",
            ActionKind::Reduce if self.open > 0 => "REDUCE of the root before any GEN",
            _ => "no open nonterminal",
        })
    }

    /// Applies an action in place. `step` is only used for error reporting.
    pub fn step(&mut self, action: &Action, step: usize) -> Result<()> {
        if let Some(reason) = self.illegal_reason(action) {
            return Err(Error::IllegalAction {
                step,
                action: action.to_string(),
                reason: reason.to_string(),
                state: self.summary(),
            });
        }
        match action {
            Action::Nt(n) => {
                self.stack.push(StackEntry::Open(n.clone()));
                self.open += 1;
            }
            Action::Gen(w) => {
                self.stack.push(StackEntry::Done(Node::Leaf(w.clone())));
                self.generated += 1;
            }
            Action::Reduce => {
                let mut children = Vec::new();
                let label = loop {
                    match self.stack.pop().expect("an open marker exists") {
                        StackEntry::Done(node) => children.push(node),
                        StackEntry::Open(label) => break label,
                    }
                };
                children.reverse();
                self.open -= 1;
                self.stack.push(StackEntry::Done(Node::Tree(PhraseTree::new(label, children))));
                self.terminated = self.open == 0;
            }
        }
        Ok(())
    }

    /// Functional form of [`TransitionState::step`].
    pub fn apply(&self, action: &Action) -> Result<TransitionState> {
        let mut next = self.clone();
        next.step(action, 0)?;
        Ok(next)
    }

    /// The finished tree, once terminated.
    pub fn into_tree(self) -> Option<PhraseTree> {
        if !self.terminated {
            return None;
        }
        match self.stack.into_iter().next() {
            Some(StackEntry::Done(Node::Tree(t))) => Some(t),
            _ => None,
        }
    }

    /// Stack contents with entries separated by `|`, as in `(S | (NP | (WORD The)`.
    pub fn summary(&self) -> String {
        self.stack
            .iter()
            .map(|e| match e {
                StackEntry::Open(l) => format!("({l}"),
                StackEntry::Done(Node::Leaf(w)) => w.clone(),
                StackEntry::Done(Node::Tree(t)) => t.to_string(),
            })
            .collect::<Vec<_>>()
            .join(" | ")
    }
}

/// Action kinds allowed after `state` under `limits` (overriding the state's own limits).
pub fn legal_actions(state: &TransitionState, limits: Limits) -> KindSet {
    let mut s = state.clone();
    s.limits = limits;
    s.legal_kinds()
}

/// Rebuilds the tree an action sequence describes.
///
/// Right-to-left sequences build the mirrored tree, which is mirrored back
/// before it is returned.
pub fn replay(actions: &[Action], dir: Direction) -> Result<PhraseTree> {
    let mut state = TransitionState::new(Limits::unbounded());
    for (i, a) in actions.iter().enumerate() {
        state.step(a, i)?;
    }
    let summary = state.summary();
    let built = state
        .into_tree()
        .ok_or_else(|| Error::Incomplete(format!("stack after {} actions: {summary}", actions.len())))?;
    Ok(match dir {
        Direction::L2R => built,
        Direction::R2L => built.mirror(),
    })
}

/// Renders an action file: a direction header, one action per line, and a blank line between sentences.
pub fn render_action_file(dir: Direction, sentences: &[Vec<Action>]) -> String {
    let mut out = format!("#direction={dir}\n");
    for (i, acts) in sentences.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for a in acts {
            out.push_str(&a.to_string());
            out.push('\n');
        }
    }
    out
}

pub fn parse_action_file(text: &str) -> Result<(Direction, Vec<Vec<Action>>)> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::data("empty action file"))?;
    let dir: Direction = header
        .trim()
        .strip_prefix("#direction=")
        .ok_or_else(|| Error::data("action file must start with #direction=l2r|r2l"))?
        .parse()
        .map_err(|_| Error::data(format!("bad direction header {header:?}")))?;
    let mut sentences = Vec::new();
    let mut cur = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            if !cur.is_empty() {
                sentences.push(std::mem::take(&mut cur));
            }
            continue;
        }
        let action =
            line.parse().map_err(|_| Error::data(format!("action file line {}: bad action {line:?}", i + 2)))?;
        cur.push(action);
    }
    if !cur.is_empty() {
        sentences.push(cur);
    }
    Ok((dir, sentences))
}
