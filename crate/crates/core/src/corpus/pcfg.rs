use std::collections::{BTreeMap, HashMap};

use rand::Rng as _;

use super::tree::{Node, PhraseTree};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// Largest string support `enumerate` will materialize.
pub const MAX_SUPPORT: usize = 1_000_000;

const MAX_REJECTIONS: usize = 100_000;

/// Sentences per sampling chunk. Each chunk draws from its own seed so
/// corpus generation can be split across workers without changing output.
pub const SAMPLE_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub enum Rhs {
    Terminal(String),
    Binary(String, String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub lhs: String,
    pub rhs: Rhs,
    pub prob: f64,
}

/// A probabilistic grammar in binary-or-terminal form, truncated at a depth cap.
#[derive(Debug, Clone)]
pub struct Pcfg {
    rules: Vec<Rule>,
    start: String,
    depth_cap: usize,
    by_lhs: HashMap<String, Vec<usize>>,
}

impl Pcfg {
    pub fn new(rules: Vec<Rule>, start: impl Into<String>, depth_cap: usize) -> Result<Self> {
        let start = start.into();
        if depth_cap == 0 {
            return Err(Error::invalid("depth cap must be positive"));
        }
        let mut by_lhs: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, r) in rules.iter().enumerate() {
            if !(r.prob > 0.0 && r.prob <= 1.0) {
                return Err(Error::data(format!("rule {} has probability {}", i + 1, r.prob)));
            }
            by_lhs.entry(r.lhs.clone()).or_default().push(i);
        }
        if !by_lhs.contains_key(&start) {
            return Err(Error::data(format!("start symbol {start} has no rules")));
        }
        let mut lhs_names: Vec<&String> = by_lhs.keys().collect();
        lhs_names.sort();
        for lhs in lhs_names {
            let total: f64 = by_lhs[lhs].iter().map(|&i| rules[i].prob).sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::data(format!("rules for {lhs} sum to {total}, not 1")));
            }
        }
        for r in &rules {
            if let Rhs::Binary(a, b) = &r.rhs {
                for sym in [a, b] {
                    if !by_lhs.contains_key(sym) {
                        return Err(Error::data(format!("nonterminal {sym} has no rules")));
                    }
                }
            }
        }
        Ok(Pcfg { rules, start, depth_cap, by_lhs })
    }

    /// Parses `LHS -> RHS prob` lines; terminals are double-quoted and the
    /// first rule's left-hand side is the start symbol.
    pub fn parse(text: &str, depth_cap: usize) -> Result<Self> {
        let mut rules = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: &str| Error::data(format!("grammar line {}: {msg}", lineno + 1));
            let (lhs, rest) = line.split_once("->").ok_or_else(|| bad("missing '->'"))?;
            let lhs = lhs.trim();
            if lhs.is_empty() || lhs.contains(char::is_whitespace) {
                return Err(bad("left-hand side must be one symbol"));
            }
            let rest = rest.trim();
            let (rhs_text, prob_text) =
                rest.rsplit_once(char::is_whitespace).ok_or_else(|| bad("missing probability"))?;
            let prob: f64 = prob_text.parse().map_err(|_| bad("probability is not a number"))?;
            let rhs_text = rhs_text.trim();
            let rhs = if let Some(stripped) = rhs_text.strip_prefix('"') {
                let term = stripped.strip_suffix('"').ok_or_else(|| bad("unterminated terminal"))?;
                if term.is_empty() || term.contains(char::is_whitespace) || term.contains('"') {
                    return Err(bad("terminal must be a nonempty token"));
                }
                Rhs::Terminal(term.to_string())
            } else {
                let syms: Vec<&str> = rhs_text.split_whitespace().collect();
                match syms.as_slice() {
                    [a, b] => Rhs::Binary(a.to_string(), b.to_string()),
                    [_] => return Err(bad("unary nonterminal rules are not supported")),
                    _ => return Err(bad("right-hand side must be one terminal or two nonterminals")),
                }
            };
            rules.push(Rule { lhs: lhs.to_string(), rhs, prob });
        }
        let start = rules.first().map(|r| r.lhs.clone()).ok_or_else(|| Error::data("grammar has no rules"))?;
        Pcfg::new(rules, start, depth_cap)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for r in &self.rules {
            let rhs = match &r.rhs {
                Rhs::Terminal(t) => format!("\"{t}\""),
                Rhs::Binary(a, b) => format!("{a} {b}"),
            };
            out.push_str(&format!("{} -> {} {}\n", r.lhs, rhs, r.prob));
        }
        out
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn start(&self) -> &str {
        &self.start
    }

    pub fn depth_cap(&self) -> usize {
        self.depth_cap
    }

    pub fn with_depth_cap(mut self, cap: usize) -> Result<Self> {
        if cap == 0 {
            return Err(Error::invalid("depth cap must be positive"));
        }
        self.depth_cap = cap;
        Ok(self)
    }

    /// Terminals in order of first appearance in the rule list.
    pub fn terminals(&self) -> Vec<String> {
        let mut seen = std::collections::HashSet::new();
        self.rules
            .iter()
            .filter_map(|r| match &r.rhs {
                Rhs::Terminal(t) if seen.insert(t.clone()) => Some(t.clone()),
                _ => None,
            })
            .collect()
    }

    /// Smallest derivation depth per nonterminal (`None` when no finite derivation exists).
    fn min_depths(&self) -> HashMap<&str, usize> {
        let mut best: HashMap<&str, usize> = HashMap::new();
        loop {
            let mut changed = false;
            for r in &self.rules {
                let d = match &r.rhs {
                    Rhs::Terminal(_) => Some(1),
                    Rhs::Binary(a, b) => match (best.get(a.as_str()), best.get(b.as_str())) {
                        (Some(x), Some(y)) => Some(1 + x.max(y)),
                        _ => None,
                    },
                };
                if let Some(d) = d {
                    let e = best.entry(r.lhs.as_str()).or_insert(usize::MAX);
                    if d < *e {
                        *e = d;
                        changed = true;
                    }
                }
            }
            if !changed {
                return best;
            }
        }
    }

    fn check_cap_feasible(&self) -> Result<()> {
        match self.min_depths().get(self.start.as_str()) {
            Some(&d) if d <= self.depth_cap => Ok(()),
            Some(&d) => {
                Err(Error::data(format!("depth cap {} admits no derivation (shallowest needs {d})", self.depth_cap)))
            }
            None => Err(Error::data("grammar has no finite derivation")),
        }
    }

    /// Draws one tree with the given seed.
    pub fn sample(&self, seed: u64) -> Result<PhraseTree> {
        PcfgSampler::new(self, rng::from_seed(seed))?.sample()
    }

    /// Draws `n` trees. Sentence `k` comes from chunk `k / SAMPLE_CHUNK`,
    /// whose generator is seeded by the chunk index.
    pub fn sample_corpus(&self, seed: u64, n: usize) -> Result<Vec<PhraseTree>> {
        use rayon::prelude::*;
        self.check_cap_feasible()?;
        let chunks = n.div_ceil(SAMPLE_CHUNK);
        let parts: Result<Vec<Vec<PhraseTree>>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let count = SAMPLE_CHUNK.min(n - c * SAMPLE_CHUNK);
                let mut sampler = PcfgSampler::new(self, rng::substream(seed, &format!("pcfg-chunk-{c}")))?;
                (0..count).map(|_| sampler.sample()).collect()
            })
            .collect();
        Ok(parts?.into_iter().flatten().collect())
    }

    /// All strings derivable within the depth cap with their probabilities,
    /// renormalized over the truncated support. Sorted by token sequence.
    pub fn enumerate(&self) -> Result<Vec<(Vec<String>, f64)>> {
        self.enumerate_with_limit(MAX_SUPPORT)
    }

    /// [`Pcfg::enumerate`] with a custom support limit.
    pub fn enumerate_with_limit(&self, max_support: usize) -> Result<Vec<(Vec<String>, f64)>> {
        self.check_cap_feasible()?;
        type Dist = BTreeMap<Vec<String>, f64>;
        let mut lhs_names: Vec<&str> = self.by_lhs.keys().map(String::as_str).collect();
        lhs_names.sort();

        let mut prev: HashMap<&str, Dist> = HashMap::new();
        for depth in 1..=self.depth_cap {
            let mut cur: HashMap<&str, Dist> = HashMap::new();
            for &lhs in &lhs_names {
                let mut dist = Dist::new();
                for &ri in &self.by_lhs[lhs] {
                    let rule = &self.rules[ri];
                    match &rule.rhs {
                        Rhs::Terminal(t) => {
                            *dist.entry(vec![t.clone()]).or_insert(0.0) += rule.prob;
                        }
                        Rhs::Binary(a, b) if depth > 1 => {
                            let (Some(da), Some(db)) = (prev.get(a.as_str()), prev.get(b.as_str())) else {
                                continue;
                            };
                            for (sa, pa) in da {
                                for (sb, pb) in db {
                                    let mut s = Vec::with_capacity(sa.len() + sb.len());
                                    s.extend_from_slice(sa);
                                    s.extend_from_slice(sb);
                                    *dist.entry(s).or_insert(0.0) += rule.prob * pa * pb;
                                    if dist.len() > max_support {
                                        return Err(Error::data(format!(
                                            "support of {lhs} exceeds {max_support} strings at depth {depth}"
                                        )));
                                    }
                                }
                            }
                        }
                        Rhs::Binary(..) => {}
                    }
                }
                if !dist.is_empty() {
                    cur.insert(lhs, dist);
                }
            }
            prev = cur;
        }
        let dist = prev.remove(self.start.as_str()).unwrap_or_default();
        let total: f64 = dist.values().sum();
        Ok(dist.into_iter().map(|(s, p)| (s, p / total)).collect())
    }
}

/// Draws derivation trees, rejecting any that exceed the depth cap.
pub struct PcfgSampler<'g> {
    grammar: &'g Pcfg,
    rng: Rng,
}

impl<'g> PcfgSampler<'g> {
    pub fn new(grammar: &'g Pcfg, rng: Rng) -> Result<Self> {
        grammar.check_cap_feasible()?;
        Ok(PcfgSampler { grammar, rng })
    }

    pub fn sample(&mut self) -> Result<PhraseTree> {
        for _ in 0..MAX_REJECTIONS {
            if let Some(t) = self.expand(self.grammar.start.as_str(), self.grammar.depth_cap) {
                return Ok(t);
            }
        }
        Err(Error::data(format!(
            "no derivation within depth cap {} after {MAX_REJECTIONS} attempts",
            self.grammar.depth_cap
        )))
    }

    fn choose(&mut self, lhs: &str) -> &'g Rule {
        let options = &self.grammar.by_lhs[lhs];
        let u: f64 = self.rng.gen();
        let mut acc = 0.0;
        for &ri in options {
            acc += self.grammar.rules[ri].prob;
            if u < acc {
                return &self.grammar.rules[ri];
            }
        }
        &self.grammar.rules[*options.last().expect("every lhs has a rule")]
    }

    /// Expands `sym` with at most `budget` levels; `None` signals a cap violation.
    fn expand(&mut self, sym: &str, budget: usize) -> Option<PhraseTree> {
        if budget == 0 {
            return None;
        }
        let rule = self.choose(sym);
        let children = match &rule.rhs {
            Rhs::Terminal(t) => vec![Node::Leaf(t.clone())],
            Rhs::Binary(a, b) => {
                let left = self.expand(a, budget - 1)?;
                let right = self.expand(b, budget - 1)?;
                vec![Node::Tree(left), Node::Tree(right)]
            }
        };
        Some(PhraseTree::new(sym, children))
    }
}

/// The shipped subject-verb agreement grammar with prepositional attractors.
pub const DEMO_GRAMMAR: &str = include_str!("../../data/agreement.pcfg");
pub const DEMO_DEPTH_CAP: usize = 5;

pub fn demo_grammar() -> Pcfg {
    Pcfg::parse(DEMO_GRAMMAR, DEMO_DEPTH_CAP).expect("shipped grammar is valid")
}

/// The agreement grammar with a 68-word Zipfian lexicon, for distillation and probing.
pub const LEXICON_GRAMMAR: &str = include_str!("../../data/lexicon.pcfg");

pub fn lexicon_grammar() -> Pcfg {
    Pcfg::parse(LEXICON_GRAMMAR, DEMO_DEPTH_CAP).expect("shipped grammar is valid")
}
