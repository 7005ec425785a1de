use super::graph::{Graph, ParamId, ParamStore, Var};
use crate::error::Result;
use crate::rng::Rng;

/// Scale of the uniform initializer.
pub const INIT_SCALE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Embedding {
    pub table: ParamId,
    pub dim: usize,
}

impl Embedding {
    pub fn new(store: &mut ParamStore, name: &str, rows: usize, dim: usize, rng: &mut Rng) -> Self {
        let table = store.add_uniform(format!("{name}.table"), &[rows, dim], INIT_SCALE, rng);
        Embedding { table, dim }
    }

    pub fn lookup(&self, g: &mut Graph, row: usize) -> Result<Var> {
        g.lookup(Var::Param(self.table), row)
    }
}

/// Affine map `W x + b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, output: usize, rng: &mut Rng) -> Self {
        let w = store.add_uniform(format!("{name}.w"), &[output, input], INIT_SCALE, rng);
        let b = store.add_uniform(format!("{name}.b"), &[output], INIT_SCALE, rng);
        Linear { w, b }
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let y = g.matmul(Var::Param(self.w), x)?;
        g.add(y, Var::Param(self.b))
    }
}

/// Stacked LSTM; layer `k` feeds its hidden state to layer `k + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lstm {
    pub layers: Vec<(ParamId, ParamId)>,
    pub input: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LstmState {
    pub h: Vec<Var>,
    pub c: Vec<Var>,
}

impl LstmState {
    /// Hidden state of the top layer.
    pub fn output(&self) -> Var {
        *self.h.last().expect("lstm has at least one layer")
    }
}

impl Lstm {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, hidden: usize, layers: usize, rng: &mut Rng) -> Self {
        let layers = (0..layers.max(1))
            .map(|k| {
                let fan_in = if k == 0 { input } else { hidden };
                let w = store.add_uniform(format!("{name}.l{k}.w"), &[4 * hidden, fan_in + hidden], INIT_SCALE, rng);
                let b = store.add_uniform(format!("{name}.l{k}.b"), &[4 * hidden], INIT_SCALE, rng);
                (w, b)
            })
            .collect();
        Lstm { layers, input, hidden }
    }

    pub fn initial(&self, g: &mut Graph) -> LstmState {
        let n = self.layers.len();
        LstmState {
            h: (0..n).map(|_| g.zeros(self.hidden)).collect(),
            c: (0..n).map(|_| g.zeros(self.hidden)).collect(),
        }
    }

    pub fn step(&self, g: &mut Graph, x: Var, state: &LstmState) -> Result<LstmState> {
        let mut input = x;
        let mut next = LstmState { h: Vec::with_capacity(self.layers.len()), c: Vec::with_capacity(self.layers.len()) };
        for (k, &(w, b)) in self.layers.iter().enumerate() {
            let (h, c) = g.lstm_cell(input, state.h[k], state.c[k], Var::Param(w), Var::Param(b))?;
            next.h.push(h);
            next.c.push(c);
            input = h;
        }
        Ok(next)
    }
}
