//! Bidirectional recurrent masked-LM student.

use rand::seq::SliceRandom;

use crate::corpus::vocab::{TokenId, NUM_RESERVED};
use crate::distill::{mixed_target, KdDataset};
use crate::error::{Error, Result};
use crate::nn::{sgd_step, softmax, Checkpoint, Embedding, Graph, Linear, Lstm, ParamStore, TrainConfig, Var};
use crate::rng::{self, Rng};

pub const CLASS: &str = "student";

#[derive(Debug, Clone, PartialEq)]
pub struct StudentConfig {
    pub embed: usize,
    pub hidden: usize,
    pub layers: usize,
    pub train: TrainConfig,
}

impl Default for StudentConfig {
    fn default() -> Self {
        StudentConfig {
            embed: 32,
            hidden: 64,
            layers: 1,
            train: TrainConfig { lr: 0.5, epochs: 10, ..TrainConfig::default() },
        }
    }
}

/// Embedding, forward and backward LSTM stacks, and a projection of the
/// concatenated states onto the non-reserved vocabulary.
#[derive(Debug, Clone)]
pub struct StudentModel {
    vocab_size: usize,
    embed: usize,
    hidden: usize,
    layers: usize,
    params: ParamStore,
    emb: Embedding,
    fwd: Lstm,
    bwd: Lstm,
    out: Linear,
}

impl StudentModel {
    pub fn new(vocab_size: usize, cfg: &StudentConfig) -> Result<Self> {
        if vocab_size <= NUM_RESERVED {
            return Err(Error::data("vocabulary has no non-reserved tokens"));
        }
        let layers = cfg.layers.max(1);
        let mut r = rng::substream(cfg.train.seed, "init");
        let mut params = ParamStore::new();
        let emb = Embedding::new(&mut params, "emb", vocab_size, cfg.embed, &mut r);
        let fwd = Lstm::new(&mut params, "fwd", cfg.embed, cfg.hidden, layers, &mut r);
        let bwd = Lstm::new(&mut params, "bwd", cfg.embed, cfg.hidden, layers, &mut r);
        let out = Linear::new(&mut params, "out", 2 * cfg.hidden, vocab_size - NUM_RESERVED, &mut r);
        Ok(StudentModel { vocab_size, embed: cfg.embed, hidden: cfg.hidden, layers, params, emb, fwd, bwd, out })
    }

    /// A model whose weights are all zero.
    pub fn zeroed(vocab_size: usize, cfg: &StudentConfig) -> Result<Self> {
        let mut m = Self::new(vocab_size, cfg)?;
        m.params.zero_all();
        Ok(m)
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn encoding_width(&self) -> usize {
        2 * self.hidden
    }

    /// Per-position concatenated forward and backward states.
    fn states(&self, g: &mut Graph, tokens: &[TokenId], mut dropout: Option<(f64, &mut Rng)>) -> Result<Vec<Var>> {
        let mut xs = Vec::with_capacity(tokens.len());
        for &t in tokens {
            if t >= self.vocab_size {
                return Err(Error::data(format!("token id {t} outside vocabulary")));
            }
            let mut x = self.emb.lookup(g, t)?;
            if let Some((rate, r)) = dropout.as_mut() {
                x = g.dropout(x, *rate, r)?;
            }
            xs.push(x);
        }
        let mut fwd = Vec::with_capacity(xs.len());
        let mut s = self.fwd.initial(g);
        for &x in &xs {
            s = self.fwd.step(g, x, &s)?;
            fwd.push(s.output());
        }
        let mut bwd = Vec::with_capacity(xs.len());
        let mut s = self.bwd.initial(g);
        for &x in xs.iter().rev() {
            s = self.bwd.step(g, x, &s)?;
            bwd.push(s.output());
        }
        bwd.reverse();
        fwd.iter().zip(&bwd).map(|(&f, &b)| g.concat(&[f, b])).collect()
    }

    /// Mean interpolated loss over the masked positions of one corrupted sentence.
    pub fn loss(
        &self,
        g: &mut Graph,
        corrupted: &[TokenId],
        masked: &[usize],
        targets: &[Vec<f64>],
        dropout: Option<(f64, &mut Rng)>,
    ) -> Result<Var> {
        if masked.is_empty() || masked.len() != targets.len() {
            return Err(Error::invalid("loss needs one target per masked position"));
        }
        let states = self.states(g, corrupted, dropout)?;
        let mut losses = Vec::with_capacity(masked.len());
        for (&i, t) in masked.iter().zip(targets) {
            let h = *states.get(i).ok_or_else(|| Error::invalid(format!("masked position {i} out of range")))?;
            let logits = self.out.forward(g, h)?;
            losses.push(g.softmax_cross_entropy(logits, t)?);
        }
        let total = g.sum(&losses)?;
        g.scale(total, 1.0 / masked.len() as f64)
    }

    /// Distribution over the full vocabulary at `i`; reserved ids are zero.
    pub fn predict_masked(&self, corrupted: &[TokenId], i: usize) -> Result<Vec<f64>> {
        if i >= corrupted.len() {
            return Err(Error::invalid(format!("position {i} outside a sentence of {} tokens", corrupted.len())));
        }
        let mut g = Graph::new(&self.params);
        let states = self.states(&mut g, corrupted, None)?;
        let logits = self.out.forward(&mut g, states[i])?;
        let mut dist = vec![0.0; NUM_RESERVED];
        dist.extend(softmax(g.value(logits).data()));
        Ok(dist)
    }

    /// One vector of width `2 * hidden` per token.
    pub fn encode(&self, tokens: &[TokenId]) -> Result<Vec<Vec<f64>>> {
        let mut g = Graph::new(&self.params);
        let states = self.states(&mut g, tokens, None)?;
        Ok(states.iter().map(|&v| g.value(v).data().to_vec()).collect())
    }

    pub fn to_checkpoint(&self, vocab_hash: &str) -> Checkpoint {
        Checkpoint {
            class: CLASS.to_string(),
            vocab_hash: vocab_hash.to_string(),
            config: vec![
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
        let cfg = StudentConfig {
            embed: ck.config_parse("embed")?,
            hidden: ck.config_parse("hidden")?,
            layers: ck.config_parse("layers")?,
            train: TrainConfig::default(),
        };
        let mut m = Self::new(ck.config_parse("vocab_size")?, &cfg)?;
        ck.restore_into(&mut m.params)?;
        Ok(m)
    }
}

/// Trains on a distillation dataset with interpolation weight `alpha`, one
/// SGD step per sentence with at least one masked position. Returns the
/// model and the mean training loss of every epoch.
pub fn train_student(
    data: &KdDataset,
    vocab_size: usize,
    alpha: f64,
    cfg: &StudentConfig,
) -> Result<(StudentModel, Vec<f64>)> {
    cfg.train.validate()?;
    let mut model = StudentModel::new(vocab_size, cfg)?;
    let mut items = Vec::new();
    for rec in data.records.iter().filter(|r| !r.masked.is_empty()) {
        let targets = rec
            .masked
            .iter()
            .zip(&rec.targets)
            .map(|(&i, t)| mixed_target(t, rec.tokens[i], alpha, vocab_size))
            .collect::<Result<Vec<_>>>()?;
        items.push((rec, targets));
    }
    if items.is_empty() {
        return Err(Error::data("dataset has no masked positions"));
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    let mut shuffle = rng::substream(cfg.train.seed, "shuffle");
    let mut drop = rng::substream(cfg.train.seed, "dropout");
    let mut history = Vec::with_capacity(cfg.train.epochs);
    for epoch in 0..cfg.train.epochs {
        order.shuffle(&mut shuffle);
        let mut total = 0.0;
        for &k in &order {
            let (rec, targets) = &items[k];
            let grads = {
                let mut g = Graph::new(&model.params);
                let dropout = (cfg.train.dropout > 0.0).then_some((cfg.train.dropout, &mut drop));
                let loss = model.loss(&mut g, &rec.corrupted, &rec.masked, targets, dropout)?;
                total += g.scalar(loss);
                g.backward(loss)?
            };
            sgd_step(&mut model.params, &grads, &cfg.train, epoch)?;
        }
        let mean = total / items.len() as f64;
        if !mean.is_finite() {
            return Err(Error::numerical(format!("student training diverged in epoch {}", epoch + 1)));
        }
        history.push(mean);
    }
    Ok((model, history))
}

/// Fraction of masked positions whose argmax prediction is the true token.
pub fn masked_accuracy(model: &StudentModel, data: &KdDataset) -> Result<f64> {
    let (mut hit, mut n) = (0usize, 0usize);
    for rec in &data.records {
        for &i in &rec.masked {
            let p = model.predict_masked(&rec.corrupted, i)?;
            let best = crate::posterior::top_k(&p, 1)[0].0;
            hit += usize::from(best == rec.tokens[i]);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::data("no masked positions"));
    }
    Ok(hit as f64 / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::vocab::MASK;
    use crate::nn::gradcheck::{check_gradients, DEFAULT_EPSILON};

    fn tiny() -> StudentConfig {
        StudentConfig { embed: 3, hidden: 4, layers: 1, train: TrainConfig { seed: 9, ..TrainConfig::default() } }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let m = StudentModel::new(9, &tiny()).unwrap();
        let targets = vec![vec![0.1, 0.2, 0.3, 0.4], vec![0.0, 1.0, 0.0, 0.0]];
        let report =
            check_gradients(m.params(), DEFAULT_EPSILON, |g| m.loss(g, &[5, MASK, 7, MASK], &[1, 3], &targets, None))
                .unwrap();
        assert!(report.max_rel_error < 1e-4, "{report:?}");
    }

    #[test]
    fn zero_model_is_uniform_and_silent() {
        let m = StudentModel::zeroed(9, &tiny()).unwrap();
        let p = m.predict_masked(&[5, MASK, 6], 1).unwrap();
        assert_eq!(&p[..5], &[0.0; 5]);
        assert!(p[5..].iter().all(|&x| (x - 0.25).abs() < 1e-15));
        let enc = m.encode(&[5, 6, 7]).unwrap();
        assert_eq!(enc.len(), 3);
        assert!(enc.iter().all(|v| v.len() == 8 && v.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = StudentModel::new(9, &tiny()).unwrap();
        let back =
            StudentModel::from_checkpoint(&Checkpoint::from_bytes(&m.to_checkpoint("v").to_bytes()).unwrap()).unwrap();
        assert_eq!(back.encode(&[5, 8]).unwrap(), m.encode(&[5, 8]).unwrap());
    }
}
