use rand::seq::SliceRandom;

use super::{normalize_log, predictable_ids, LanguageModel};
use crate::corpus::vocab::{TokenId, BOS, EOS, NUM_RESERVED, UNK};
use crate::error::{Error, Result};
use crate::nn::{
    sgd_step, Checkpoint, Embedding, Graph, Linear, Lstm, LstmState, ParamStore, Tensor, TrainConfig, Var,
};
use crate::rng::{self, Rng};
use crate::transitions::Direction;

pub const CLASS: &str = "recurrent";

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentConfig {
    pub embed: usize,
    pub hidden: usize,
    pub layers: usize,
    pub train: TrainConfig,
}

impl Default for RecurrentConfig {
    fn default() -> Self {
        RecurrentConfig {
            embed: 32,
            hidden: 64,
            layers: 1,
            train: TrainConfig { lr: 0.5, epochs: 15, ..TrainConfig::default() },
        }
    }
}

/// Position of a token in the output layer: `<unk>`, `</s>`, then ids from 5 on.
fn output_index(tok: TokenId) -> Result<usize> {
    match tok {
        UNK => Ok(0),
        EOS => Ok(1),
        t if t >= NUM_RESERVED => Ok(t - NUM_RESERVED + 2),
        t => Err(Error::data(format!("reserved token {t} is not a prediction target"))),
    }
}

/// LSTM language model over token ids.
#[derive(Debug, Clone)]
pub struct RecurrentLM {
    direction: Direction,
    vocab_size: usize,
    embed: usize,
    hidden: usize,
    layers: usize,
    params: ParamStore,
    emb: Embedding,
    lstm: Lstm,
    out: Linear,
    outputs: Vec<TokenId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentState {
    h: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
}

impl RecurrentLM {
    /// Randomly initialized model; the draw depends on the seed only, not the direction.
    pub fn new(vocab_size: usize, direction: Direction, cfg: &RecurrentConfig) -> Result<Self> {
        if vocab_size <= NUM_RESERVED {
            return Err(Error::data("vocabulary has no non-reserved tokens"));
        }
        let mut r = rng::substream(cfg.train.seed, "init");
        let mut params = ParamStore::new();
        let outputs = predictable_ids(vocab_size);
        let emb = Embedding::new(&mut params, "emb", vocab_size, cfg.embed, &mut r);
        let lstm = Lstm::new(&mut params, "lstm", cfg.embed, cfg.hidden, cfg.layers, &mut r);
        let out = Linear::new(&mut params, "out", cfg.hidden, outputs.len(), &mut r);
        Ok(RecurrentLM {
            direction,
            vocab_size,
            embed: cfg.embed,
            hidden: cfg.hidden,
            layers: cfg.layers.max(1),
            params,
            emb,
            lstm,
            out,
            outputs,
        })
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    /// Summed next-token cross-entropy of one sentence given in reading order, `</s>` included.
    pub fn sentence_loss(
        &self,
        g: &mut Graph,
        tokens: &[TokenId],
        mut dropout: Option<(f64, &mut Rng)>,
    ) -> Result<Var> {
        let mut state = self.lstm.initial(g);
        let mut losses = Vec::with_capacity(tokens.len() + 1);
        let n_out = self.outputs.len();
        let inputs = std::iter::once(BOS).chain(tokens.iter().copied());
        let targets = tokens.iter().copied().chain(std::iter::once(EOS));
        for (inp, tgt) in inputs.zip(targets) {
            if inp >= self.vocab_size {
                return Err(Error::data(format!("token id {inp} outside vocabulary")));
            }
            let mut x = self.emb.lookup(g, inp)?;
            if let Some((rate, r)) = dropout.as_mut() {
                x = g.dropout(x, *rate, r)?;
            }
            state = self.lstm.step(g, x, &state)?;
            let mut h = state.output();
            if let Some((rate, r)) = dropout.as_mut() {
                h = g.dropout(h, *rate, r)?;
            }
            let logits = self.out.forward(g, h)?;
            let mut onehot = vec![0.0; n_out];
            onehot[output_index(tgt)?] = 1.0;
            losses.push(g.softmax_cross_entropy(logits, &onehot)?);
        }
        g.sum(&losses)
    }

    /// Trains on `corpus` (left-to-right sentences), one SGD step per sentence.
    /// Returns the model and the mean per-token training NLL of every epoch.
    pub fn train(
        corpus: &[Vec<TokenId>],
        vocab_size: usize,
        direction: Direction,
        cfg: &RecurrentConfig,
    ) -> Result<(Self, Vec<f64>)> {
        cfg.train.validate()?;
        if corpus.is_empty() {
            return Err(Error::data("cannot train on an empty corpus"));
        }
        let mut model = Self::new(vocab_size, direction, cfg)?;
        let oriented: Vec<Vec<TokenId>> = corpus.iter().map(|s| direction.orient(s)).collect();
        let mut order: Vec<usize> = (0..oriented.len()).collect();
        let mut shuffle = rng::substream(cfg.train.seed, "shuffle");
        let mut drop = rng::substream(cfg.train.seed, "dropout");
        let mut history = Vec::with_capacity(cfg.train.epochs);
        for epoch in 0..cfg.train.epochs {
            order.shuffle(&mut shuffle);
            let (mut nll, mut count) = (0.0, 0usize);
            for &k in &order {
                let sent = &oriented[k];
                let grads = {
                    let mut g = Graph::new(&model.params);
                    let dropout = (cfg.train.dropout > 0.0).then_some((cfg.train.dropout, &mut drop));
                    let total = model.sentence_loss(&mut g, sent, dropout)?;
                    nll += g.scalar(total);
                    count += sent.len() + 1;
                    let mean = g.scale(total, 1.0 / (sent.len() + 1) as f64)?;
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

    pub fn to_checkpoint(&self, vocab_hash: &str) -> Checkpoint {
        Checkpoint {
            class: CLASS.to_string(),
            vocab_hash: vocab_hash.to_string(),
            config: vec![
                ("direction".into(), self.direction.to_string()),
                ("vocab_size".into(), self.vocab_size.to_string()),
                ("embed".into(), self.embed.to_string()),
                ("hidden".into(), self.hidden.to_string()),
                ("layers".into(), self.layers.to_string()),
            ],
            params: self.params.clone(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        ck.expect_class(CLASS)?;
        let cfg = RecurrentConfig {
            embed: ck.config_parse("embed")?,
            hidden: ck.config_parse("hidden")?,
            layers: ck.config_parse("layers")?,
            train: TrainConfig::default(),
        };
        let mut m = Self::new(ck.config_parse("vocab_size")?, ck.config_parse("direction")?, &cfg)?;
        ck.restore_into(&mut m.params)?;
        Ok(m)
    }

    fn to_vars(&self, g: &mut Graph, s: &RecurrentState) -> Result<LstmState> {
        let mut h = Vec::with_capacity(s.h.len());
        let mut c = Vec::with_capacity(s.c.len());
        for (hv, cv) in s.h.iter().zip(&s.c) {
            h.push(g.constant(Tensor::vector(hv.clone()))?);
            c.push(g.constant(Tensor::vector(cv.clone()))?);
        }
        Ok(LstmState { h, c })
    }
}

impl LanguageModel for RecurrentLM {
    type State = RecurrentState;

    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn direction(&self) -> Direction {
        self.direction
    }

    fn initial(&self) -> Result<RecurrentState> {
        let zero = RecurrentState {
            h: vec![vec![0.0; self.hidden]; self.layers],
            c: vec![vec![0.0; self.hidden]; self.layers],
        };
        self.advance(&zero, BOS)
    }

    fn advance(&self, state: &RecurrentState, token: TokenId) -> Result<RecurrentState> {
        if token >= self.vocab_size {
            return Err(Error::data(format!("token id {token} outside vocabulary")));
        }
        let mut g = Graph::new(&self.params);
        let prev = self.to_vars(&mut g, state)?;
        let x = self.emb.lookup(&mut g, token)?;
        let next = self.lstm.step(&mut g, x, &prev)?;
        Ok(RecurrentState {
            h: next.h.iter().map(|&v| g.value(v).data().to_vec()).collect(),
            c: next.c.iter().map(|&v| g.value(v).data().to_vec()).collect(),
        })
    }

    fn log_dist(&self, state: &RecurrentState) -> Result<Vec<f64>> {
        let mut g = Graph::new(&self.params);
        let h = g.constant(Tensor::vector(state.h.last().expect("at least one layer").clone()))?;
        let logits = self.out.forward(&mut g, h)?;
        let mut out = vec![f64::NEG_INFINITY; self.vocab_size];
        for (&tok, &z) in self.outputs.iter().zip(g.value(logits).data()) {
            out[tok] = z;
        }
        normalize_log(&mut out)?;
        Ok(out)
    }
}
