use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;

use super::{normalize_log, LanguageModel};
use crate::corpus::tree::WORD_LABEL;
use crate::corpus::vocab::{TokenId, Vocabulary, EOS, NUM_RESERVED, UNK};
use crate::corpus::PhraseTree;
use crate::error::{Error, Result};
use crate::nn::{
    sgd_step, Checkpoint, Embedding, Graph, Linear, Lstm, LstmState, ParamStore, Tensor, TrainConfig, Var,
};
use crate::rng;
use crate::transitions::{oracle, Action, Direction, KindSet, Limits, TransitionState};

pub const CLASS: &str = "syntactic";

#[derive(Debug, Clone, PartialEq)]
pub struct SyntacticConfig {
    pub embed: usize,
    pub hidden: usize,
    pub layers: usize,
    pub train: TrainConfig,
}

impl Default for SyntacticConfig {
    fn default() -> Self {
        SyntacticConfig {
            embed: 32,
            hidden: 64,
            layers: 1,
            train: TrainConfig { lr: 0.5, epochs: 10, ..TrainConfig::default() },
        }
    }
}

/// Action with indexed payloads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Act {
    Reduce,
    Nt(usize),
    Gen(TokenId),
}

/// Stack-LSTM generative model over transition sequences.
///
/// Stack entries are embedded (open nonterminal, generated token, or a
/// composed constituent) and fed oldest-to-newest through an LSTM whose top
/// state scores the next action. A REDUCE composes the popped children with
/// a bidirectional LSTM that starts from the nonterminal embedding.
#[derive(Debug, Clone)]
pub struct SyntacticLM {
    vocab: Vocabulary,
    direction: Direction,
    nonterminals: Vec<String>,
    nt_index: HashMap<String, usize>,
    embed: usize,
    hidden: usize,
    layers: usize,
    params: ParamStore,
    nt_emb: Embedding,
    word_emb: Embedding,
    stack: Lstm,
    comp_fwd: Lstm,
    comp_bwd: Lstm,
    merge: Linear,
    scorer: Linear,
}

#[derive(Debug, Clone)]
struct Entry {
    vec: Vec<f64>,
    open: Option<usize>,
    h: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
}

/// Inference state: transition-system state plus the stack encoder's values.
#[derive(Debug, Clone)]
pub struct SyntacticState {
    ts: TransitionState,
    entries: Vec<Entry>,
    steps: usize,
}

impl SyntacticState {
    pub fn transition_state(&self) -> &TransitionState {
        &self.ts
    }
}

struct GraphEntry {
    vec: Var,
    open: Option<usize>,
    state: LstmState,
}

impl SyntacticLM {
    pub fn new(
        vocab: Vocabulary,
        nonterminals: Vec<String>,
        direction: Direction,
        cfg: &SyntacticConfig,
    ) -> Result<Self> {
        if !nonterminals.iter().any(|n| n == WORD_LABEL) {
            return Err(Error::invalid("nonterminal inventory must contain WORD"));
        }
        let nt_index: HashMap<String, usize> = nonterminals.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        if nt_index.len() != nonterminals.len() {
            return Err(Error::invalid("duplicate nonterminal labels"));
        }
        let mut r = rng::substream(cfg.train.seed, "init");
        let mut params = ParamStore::new();
        let (e, h) = (cfg.embed, cfg.hidden);
        let n_actions = 1 + nonterminals.len() + (vocab.len() - NUM_RESERVED + 1);
        let nt_emb = Embedding::new(&mut params, "nt_emb", nonterminals.len(), e, &mut r);
        let word_emb = Embedding::new(&mut params, "word_emb", vocab.len(), e, &mut r);
        let stack = Lstm::new(&mut params, "stack", e, h, cfg.layers, &mut r);
        let comp_fwd = Lstm::new(&mut params, "comp_fwd", e, e, 1, &mut r);
        let comp_bwd = Lstm::new(&mut params, "comp_bwd", e, e, 1, &mut r);
        let merge = Linear::new(&mut params, "merge", 2 * e, e, &mut r);
        let scorer = Linear::new(&mut params, "scorer", h, n_actions, &mut r);
        Ok(SyntacticLM {
            vocab,
            direction,
            nonterminals,
            nt_index,
            embed: e,
            hidden: h,
            layers: cfg.layers.max(1),
            params,
            nt_emb,
            word_emb,
            stack,
            comp_fwd,
            comp_bwd,
            merge,
            scorer,
        })
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn nonterminals(&self) -> &[String] {
        &self.nonterminals
    }

    pub fn num_actions(&self) -> usize {
        1 + self.nonterminals.len() + self.vocab.len() - NUM_RESERVED + 1
    }

    fn gen_offset(&self) -> usize {
        1 + self.nonterminals.len()
    }

    fn act_index(&self, a: Act) -> usize {
        match a {
            Act::Reduce => 0,
            Act::Nt(n) => 1 + n,
            Act::Gen(UNK) => self.gen_offset(),
            Act::Gen(t) => self.gen_offset() + t - NUM_RESERVED + 1,
        }
    }

    fn act_at(&self, idx: usize) -> Act {
        let g = self.gen_offset();
        match idx {
            0 => Act::Reduce,
            i if i < g => Act::Nt(i - 1),
            i if i == g => Act::Gen(UNK),
            i => Act::Gen(i - g - 1 + NUM_RESERVED),
        }
    }

    /// Position of `action` in [`action_log_probs`](Self::action_log_probs).
    pub fn action_index(&self, action: &Action) -> Result<usize> {
        Ok(self.act_index(self.encode(action)?))
    }

    pub fn action_at(&self, idx: usize) -> Action {
        self.decode(self.act_at(idx))
    }

    fn encode(&self, a: &Action) -> Result<Act> {
        Ok(match a {
            Action::Reduce => Act::Reduce,
            Action::Nt(n) => Act::Nt(
                *self.nt_index.get(n).ok_or_else(|| Error::data(format!("nonterminal {n} unknown to the model")))?,
            ),
            Action::Gen(w) => Act::Gen(self.vocab.id_or_unk(w)),
        })
    }

    fn decode(&self, a: Act) -> Action {
        match a {
            Act::Reduce => Action::Reduce,
            Act::Nt(n) => Action::Nt(self.nonterminals[n].clone()),
            Act::Gen(t) => Action::Gen(self.vocab.token(t).to_string()),
        }
    }

    fn check_gen(&self, tok: TokenId) -> Result<()> {
        if tok >= self.vocab.len() || (tok < NUM_RESERVED && tok != UNK) {
            return Err(Error::data(format!("token id {tok} cannot be generated")));
        }
        Ok(())
    }

    fn legal_indices(&self, kinds: KindSet) -> Vec<usize> {
        let mut idx = Vec::new();
        if kinds.reduce {
            idx.push(0);
        }
        if kinds.nt {
            idx.extend(1..self.gen_offset());
        }
        if kinds.gen {
            idx.extend(self.gen_offset()..self.num_actions());
        }
        idx
    }

    fn compose(&self, g: &mut Graph, label: usize, children: &[Var]) -> Result<Var> {
        let l = self.nt_emb.lookup(g, label)?;
        let mut f = self.comp_fwd.initial(g);
        f = self.comp_fwd.step(g, l, &f)?;
        for &c in children {
            f = self.comp_fwd.step(g, c, &f)?;
        }
        let mut b = self.comp_bwd.initial(g);
        b = self.comp_bwd.step(g, l, &b)?;
        for &c in children.iter().rev() {
            b = self.comp_bwd.step(g, c, &b)?;
        }
        let cat = g.concat(&[f.output(), b.output()])?;
        let m = self.merge.forward(g, cat)?;
        g.tanh(m)
    }

    fn apply_graph(&self, g: &mut Graph, stack: &mut Vec<GraphEntry>, init: &LstmState, a: Act) -> Result<()> {
        let (vec, open) = match a {
            Act::Nt(n) => (self.nt_emb.lookup(g, n)?, Some(n)),
            Act::Gen(t) => (self.word_emb.lookup(g, t)?, None),
            Act::Reduce => {
                let mut children = Vec::new();
                let label = loop {
                    let e = stack.pop().ok_or_else(|| Error::invalid("REDUCE without an open nonterminal"))?;
                    match e.open {
                        Some(n) => break n,
                        None => children.push(e.vec),
                    }
                };
                children.reverse();
                (self.compose(g, label, &children)?, None)
            }
        };
        let prev = stack.last().map_or(init, |e| &e.state);
        let state = self.stack.step(g, vec, prev)?;
        stack.push(GraphEntry { vec, open, state });
        Ok(())
    }

    fn tree_acts(&self, tree: &PhraseTree) -> Result<Vec<Act>> {
        oracle(tree, self.direction)?.iter().map(|a| self.encode(a)).collect()
    }

    /// Summed action cross-entropy of a tree's oracle under legality-masked softmax.
    pub fn tree_loss(&self, g: &mut Graph, tree: &PhraseTree) -> Result<Var> {
        let acts = self.tree_acts(tree)?;
        self.acts_loss(g, &acts)
    }

    fn acts_loss(&self, g: &mut Graph, acts: &[Act]) -> Result<Var> {
        let mut ts = TransitionState::new(Limits::unbounded());
        let init = self.stack.initial(g);
        let mut stack: Vec<GraphEntry> = Vec::new();
        let mut losses = Vec::with_capacity(acts.len());
        for (step, &a) in acts.iter().enumerate() {
            let action = self.decode(a);
            let legal = self.legal_indices(ts.legal_kinds());
            ts.step(&action, step)?;
            let summary = stack.last().map_or(init.output(), |e| e.state.output());
            let scores = self.scorer.forward(g, summary)?;
            let sel = g.select(scores, &legal)?;
            let gold = self.act_index(a);
            let mut target = vec![0.0; legal.len()];
            target[legal.iter().position(|&i| i == gold).expect("legal after a successful step")] = 1.0;
            losses.push(g.softmax_cross_entropy(sel, &target)?);
            self.apply_graph(g, &mut stack, &init, a)?;
        }
        g.sum(&losses)
    }

    /// Joint negative log-likelihood of the tree's oracle sequence.
    pub fn oracle_nll(&self, tree: &PhraseTree) -> Result<f64> {
        let mut g = Graph::new(&self.params);
        let l = self.tree_loss(&mut g, tree)?;
        Ok(g.scalar(l))
    }

    /// Trains on WORD-augmented trees, one SGD step per tree. Returns the
    /// mean per-action training NLL of every epoch.
    pub fn train(
        trees: &[PhraseTree],
        vocab: &Vocabulary,
        direction: Direction,
        cfg: &SyntacticConfig,
    ) -> Result<(Self, Vec<f64>)> {
        cfg.train.validate()?;
        if trees.is_empty() {
            return Err(Error::data("cannot train on an empty treebank"));
        }
        let mut labels = BTreeSet::new();
        labels.insert(WORD_LABEL.to_string());
        for t in trees {
            t.validate_augmented()?;
            labels.extend(t.labels().into_iter().map(str::to_string));
        }
        let mut model = Self::new(vocab.clone(), labels.into_iter().collect(), direction, cfg)?;
        let oracles = trees.iter().map(|t| model.tree_acts(t)).collect::<Result<Vec<_>>>()?;
        let mut order: Vec<usize> = (0..oracles.len()).collect();
        let mut shuffle = rng::substream(cfg.train.seed, "shuffle");
        let mut history = Vec::with_capacity(cfg.train.epochs);
        for epoch in 0..cfg.train.epochs {
            order.shuffle(&mut shuffle);
            let (mut nll, mut count) = (0.0, 0usize);
            for &k in &order {
                let acts = &oracles[k];
                let grads = {
                    let mut g = Graph::new(&model.params);
                    let total = model.acts_loss(&mut g, acts)?;
                    nll += g.scalar(total);
                    count += acts.len();
                    let mean = g.scale(total, 1.0 / acts.len() as f64)?;
                    g.backward(mean)?
                };
                sgd_step(&mut model.params, &grads, &cfg.train, epoch)?;
            }
            let epoch_nll = nll / count as f64;
            if !epoch_nll.is_finite() {
                return Err(Error::numerical(format!("training diverged in epoch {}", epoch + 1)));
            }
            history.push(epoch_nll);
        }
        Ok((model, history))
    }

    pub fn initial_state(&self) -> SyntacticState {
        SyntacticState { ts: TransitionState::new(Limits::default()), entries: Vec::new(), steps: 0 }
    }

    fn lstm_vars(&self, g: &mut Graph, e: Option<&Entry>) -> Result<LstmState> {
        match e {
            None => Ok(self.stack.initial(g)),
            Some(e) => {
                let mut s = LstmState { h: Vec::with_capacity(self.layers), c: Vec::with_capacity(self.layers) };
                for (h, c) in e.h.iter().zip(&e.c) {
                    s.h.push(g.constant(Tensor::vector(h.clone()))?);
                    s.c.push(g.constant(Tensor::vector(c.clone()))?);
                }
                Ok(s)
            }
        }
    }

    fn apply_act(&self, s: &SyntacticState, a: Act) -> Result<SyntacticState> {
        let mut next = s.clone();
        next.ts.step(&self.decode(a), s.steps)?;
        next.steps += 1;
        let mut g = Graph::new(&self.params);
        let (vec, open) = match a {
            Act::Nt(n) => (self.nt_emb.lookup(&mut g, n)?, Some(n)),
            Act::Gen(t) => {
                self.check_gen(t)?;
                (self.word_emb.lookup(&mut g, t)?, None)
            }
            Act::Reduce => {
                let mut children = Vec::new();
                let label = loop {
                    let e = next.entries.pop().expect("transition state guarantees an open nonterminal");
                    match e.open {
                        Some(n) => break n,
                        None => children.push(g.constant(Tensor::vector(e.vec))?),
                    }
                };
                children.reverse();
                (self.compose(&mut g, label, &children)?, None)
            }
        };
        let prev = self.lstm_vars(&mut g, next.entries.last())?;
        let st = self.stack.step(&mut g, vec, &prev)?;
        next.entries.push(Entry {
            vec: g.value(vec).data().to_vec(),
            open,
            h: st.h.iter().map(|&v| g.value(v).data().to_vec()).collect(),
            c: st.c.iter().map(|&v| g.value(v).data().to_vec()).collect(),
        });
        Ok(next)
    }

    pub fn apply(&self, s: &SyntacticState, action: &Action) -> Result<SyntacticState> {
        self.apply_act(s, self.encode(action)?)
    }

    fn scores(&self, s: &SyntacticState) -> Result<Vec<f64>> {
        let mut g = Graph::new(&self.params);
        let top = match s.entries.last() {
            Some(e) => g.constant(Tensor::vector(e.h.last().expect("at least one layer").clone()))?,
            None => g.zeros(self.hidden),
        };
        let z = self.scorer.forward(&mut g, top)?;
        Ok(g.value(z).data().to_vec())
    }

    /// Log-probabilities over all actions; illegal actions get `-inf`.
    pub fn action_log_probs(&self, s: &SyntacticState) -> Result<Vec<f64>> {
        let scores = self.scores(s)?;
        let mut out = vec![f64::NEG_INFINITY; scores.len()];
        for i in self.legal_indices(s.ts.legal_kinds()) {
            out[i] = scores[i];
        }
        normalize_log(&mut out)?;
        Ok(out)
    }

    /// Next-token log-distribution over the vocabulary: the GEN actions'
    /// scores renormalized among themselves. `</s>` gets no mass.
    pub fn next_word_log_dist(&self, s: &SyntacticState) -> Result<Vec<f64>> {
        if !s.ts.legal_kinds().gen {
            return Err(Error::invalid("GEN is not legal in this state"));
        }
        let scores = self.scores(s)?;
        let mut out = vec![f64::NEG_INFINITY; self.vocab.len()];
        for (i, &z) in scores.iter().enumerate().skip(self.gen_offset()) {
            if let Act::Gen(t) = self.act_at(i) {
                out[t] = z;
            }
        }
        normalize_log(&mut out)?;
        Ok(out)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            class: CLASS.to_string(),
            vocab_hash: self.vocab.hash(),
            config: vec![
                ("direction".into(), self.direction.to_string()),
                ("embed".into(), self.embed.to_string()),
                ("hidden".into(), self.hidden.to_string()),
                ("layers".into(), self.layers.to_string()),
                ("nonterminals".into(), self.nonterminals.join(" ")),
            ],
            params: self.params.clone(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint, vocab: &Vocabulary) -> Result<Self> {
        ck.expect_class(CLASS)?;
        vocab.check_hash(&ck.vocab_hash)?;
        let cfg = SyntacticConfig {
            embed: ck.config_parse("embed")?,
            hidden: ck.config_parse("hidden")?,
            layers: ck.config_parse("layers")?,
            train: TrainConfig::default(),
        };
        let nts = ck.config_value("nonterminals")?.split_whitespace().map(str::to_string).collect();
        let mut m = Self::new(vocab.clone(), nts, ck.config_parse("direction")?, &cfg)?;
        ck.restore_into(&mut m.params)?;
        Ok(m)
    }
}

/// A syntactic model bound to one sentence's tree. Between tokens it
/// replays the tree's oracle, so its next-token distribution is the model's
/// GEN distribution under the forced tree prefix. After the last token it
/// emits `</s>` with probability one.
///
/// Advancing with a token other than the tree's leaf substitutes that
/// token and keeps the skeleton.
#[derive(Debug, Clone)]
pub struct ForcedTreeLM<'a> {
    model: &'a SyntacticLM,
    template: Vec<Act>,
    leaves: Vec<TokenId>,
}

#[derive(Debug, Clone)]
pub struct ForcedTreeState {
    syn: SyntacticState,
    cursor: usize,
}

impl<'a> ForcedTreeLM<'a> {
    pub fn new(model: &'a SyntacticLM, tree: &PhraseTree) -> Result<Self> {
        let template = model.tree_acts(tree)?;
        let leaves = template
            .iter()
            .filter_map(|a| match a {
                Act::Gen(t) => Some(*t),
                _ => None,
            })
            .collect();
        Ok(ForcedTreeLM { model, template, leaves })
    }

    /// Tree leaves in the model's reading order.
    pub fn leaves(&self) -> &[TokenId] {
        &self.leaves
    }

    fn run_to_gen(&self, mut s: ForcedTreeState) -> Result<ForcedTreeState> {
        while let Some(&a) = self.template.get(s.cursor) {
            if matches!(a, Act::Gen(_)) {
                break;
            }
            s.syn = self.model.apply_act(&s.syn, a)?;
            s.cursor += 1;
        }
        Ok(s)
    }
}

impl LanguageModel for ForcedTreeLM<'_> {
    type State = ForcedTreeState;

    fn vocab_size(&self) -> usize {
        self.model.vocab.len()
    }

    fn direction(&self) -> Direction {
        self.model.direction
    }

    fn initial(&self) -> Result<ForcedTreeState> {
        self.run_to_gen(ForcedTreeState { syn: self.model.initial_state(), cursor: 0 })
    }

    fn advance(&self, s: &ForcedTreeState, token: TokenId) -> Result<ForcedTreeState> {
        if !matches!(self.template.get(s.cursor), Some(Act::Gen(_))) {
            return Err(Error::data("sequence is longer than the forced tree's yield"));
        }
        let syn = self.model.apply_act(&s.syn, Act::Gen(token))?;
        self.run_to_gen(ForcedTreeState { syn, cursor: s.cursor + 1 })
    }

    fn log_dist(&self, s: &ForcedTreeState) -> Result<Vec<f64>> {
        if s.cursor == self.template.len() {
            let mut out = vec![f64::NEG_INFINITY; self.vocab_size()];
            out[EOS] = 0.0;
            return Ok(out);
        }
        self.model.next_word_log_dist(&s.syn)
    }
}

/// Distribution of token `i` of a left-to-right sentence given its context
/// on the model's reading side and the forced tree's prefix up to that
/// token's GEN action.
pub fn syntactic_next_word_dist(m: &SyntacticLM, tokens: &[TokenId], tree: &PhraseTree, i: usize) -> Result<Vec<f64>> {
    let forced = ForcedTreeLM::new(m, tree)?;
    let n = forced.leaves.len();
    if i >= n {
        return Err(Error::invalid(format!("position {i} outside a tree of {n} tokens")));
    }
    let yield_l2r = m.direction.orient(&forced.leaves);
    let context: Vec<TokenId> = match m.direction {
        Direction::L2R => tokens.get(..i).map(<[TokenId]>::to_vec),
        Direction::R2L => tokens.get(i + 1..).map(|s| s.iter().rev().copied().collect()),
    }
    .ok_or_else(|| Error::invalid(format!("position {i} outside a sentence of {} tokens", tokens.len())))?;
    let offset = if m.direction == Direction::L2R { 0 } else { i + 1 };
    for (j, &t) in tokens.iter().enumerate().skip(offset).take(context.len()) {
        if yield_l2r.get(j) != Some(&t) {
            return Err(Error::data(format!("tree yield disagrees with the sentence at position {j}")));
        }
    }
    forced.next_dist(&context)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tree::parse_bracketed;
    use crate::nn::gradcheck::{check_gradients, DEFAULT_EPSILON};

    fn example() -> (PhraseTree, Vocabulary) {
        let t = parse_bracketed("(S (NP (WORD The) (WORD d ##og)) (VP (WORD ba ##rk ##s)))").unwrap();
        let v = Vocabulary::new(["The", "d", "##og", "ba", "##rk", "##s"]).unwrap();
        (t, v)
    }

    fn tiny(seed: u64) -> SyntacticConfig {
        SyntacticConfig { embed: 3, hidden: 4, layers: 1, train: TrainConfig { seed, ..TrainConfig::default() } }
    }

    fn labels() -> Vec<String> {
        ["NP", "S", "VP", "WORD"].map(String::from).to_vec()
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (t, v) = example();
        for dir in [Direction::L2R, Direction::R2L] {
            let m = SyntacticLM::new(v.clone(), labels(), dir, &tiny(3)).unwrap();
            let report = check_gradients(m.params(), DEFAULT_EPSILON, |g| m.tree_loss(g, &t)).unwrap();
            assert!(report.max_rel_error < 1e-4, "{dir}: {report:?}");
        }
    }

    #[test]
    fn reduce_after_nt_has_zero_probability() {
        let (_, v) = example();
        let m = SyntacticLM::new(v, labels(), Direction::L2R, &tiny(1)).unwrap();
        let s = m.apply(&m.initial_state(), &Action::Nt("S".into())).unwrap();
        let lp = m.action_log_probs(&s).unwrap();
        assert_eq!(lp[m.action_index(&Action::Reduce).unwrap()], f64::NEG_INFINITY);
        let total: f64 = lp.iter().map(|l| l.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn forced_tree_mismatch_is_an_error() {
        let (t, v) = example();
        let m = SyntacticLM::new(v.clone(), labels(), Direction::L2R, &tiny(1)).unwrap();
        let wrong = v.encode(&["d", "d", "##og", "ba", "##rk", "##s"]);
        assert!(matches!(syntactic_next_word_dist(&m, &wrong, &t, 1), Err(Error::Data(_))));
        let p = syntactic_next_word_dist(&m, &wrong, &t, 0).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(p[..NUM_RESERVED].iter().enumerate().all(|(i, &x)| i == UNK || x == 0.0));
    }

    #[test]
    fn forced_lm_ends_with_eos() {
        let (t, v) = example();
        let m = SyntacticLM::new(v.clone(), labels(), Direction::R2L, &tiny(1)).unwrap();
        let f = ForcedTreeLM::new(&m, &t).unwrap();
        let toks = v.encode(&["The", "d", "##og", "ba", "##rk", "##s"]);
        let p = f.next_dist(&Direction::R2L.orient(&toks)).unwrap();
        assert_eq!(p[EOS], 1.0);
        assert!(f.next_dist(&[5; 7]).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let (t, v) = example();
        let cfg = SyntacticConfig { train: TrainConfig { epochs: 2, ..tiny(2).train }, ..tiny(2) };
        let (m, _) = SyntacticLM::train(std::slice::from_ref(&t), &v, Direction::L2R, &cfg).unwrap();
        let back = SyntacticLM::from_checkpoint(&m.to_checkpoint(), &v).unwrap();
        assert_eq!(back.params(), m.params());
        assert_eq!(back.oracle_nll(&t).unwrap(), m.oracle_nll(&t).unwrap());
    }
}
