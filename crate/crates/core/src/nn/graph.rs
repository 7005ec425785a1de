use rand::Rng as _;

use super::tensor::{log_softmax, Tensor};
use crate::error::{Error, Result};
use crate::rng::Rng;

pub type ParamId = usize;

/// Named parameters in declaration order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a parameter initialized uniformly in `[-scale, scale)`.
    pub fn add_uniform(&mut self, name: impl Into<String>, shape: &[usize], scale: f64, rng: &mut Rng) -> ParamId {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
        self.add(name, Tensor::new(shape.to_vec(), data).expect("shape matches data"))
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> ParamId {
        self.names.push(name.into());
        self.tensors.push(tensor);
        self.tensors.len() - 1
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(self.tensors.iter())
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    /// Sets every value to zero.
    pub fn zero_all(&mut self) {
        for t in &mut self.tensors {
            t.data_mut().fill(0.0);
        }
    }
}

/// A value in a [`Graph`]: either a parameter or a recorded node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    Param(ParamId),
    Node(usize),
}

#[derive(Debug)]
enum Op {
    Const,
    MatMul(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Concat(Vec<Var>),
    Lookup(Var, usize),
    Tanh(Var),
    Sigmoid(Var),
    Slice(Var, usize),
    Select(Var, Vec<usize>),
    Sum(Vec<Var>),
    Scale(Var, f64),
    SoftmaxCe { logits: Var, target: Vec<f64>, probs: Vec<f64>, target_mass: f64 },
}

/// Per-parameter gradients, aligned with the [`ParamStore`] they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Tensor>,
}

impl Gradients {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Gradients { tensors: store.tensors.iter().map(|t| Tensor::zeros(t.shape())).collect() }
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors.iter().map(Tensor::norm_sq).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        for t in &mut self.tensors {
            t.data_mut().iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.data_mut().iter_mut().zip(b.data()).for_each(|(x, y)| *x += y);
        }
    }
}

/// Records operations in execution order for reverse-mode differentiation.
/// Parameters are read from the borrowed store without copying.
pub struct Graph<'p> {
    params: &'p ParamStore,
    nodes: Vec<(Tensor, Op)>,
}

fn check_finite(op: &str, t: &Tensor) -> Result<()> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(Error::numerical(format!("{op} produced a non-finite value")))
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Graph { params, nodes: Vec::new() }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn param(&self, id: ParamId) -> Var {
        Var::Param(id)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        match v {
            Var::Param(id) => self.params.get(id),
            Var::Node(i) => &self.nodes[i].0,
        }
    }

    /// First element of a value; intended for scalar losses.
    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v).data()[0]
    }

    fn push(&mut self, op_name: &str, value: Tensor, op: Op) -> Result<Var> {
        check_finite(op_name, &value)?;
        self.nodes.push((value, op));
        Ok(Var::Node(self.nodes.len() - 1))
    }

    pub fn constant(&mut self, t: Tensor) -> Result<Var> {
        self.push("constant", t, Op::Const)
    }

    pub fn zeros(&mut self, n: usize) -> Var {
        self.nodes.push((Tensor::zeros(&[n]), Op::Const));
        Var::Node(self.nodes.len() - 1)
    }

    /// Matrix `[m, n]` times vector `[n]`.
    pub fn matmul(&mut self, a: Var, x: Var) -> Result<Var> {
        let (av, xv) = (self.value(a), self.value(x));
        if av.shape().len() != 2 || xv.shape().len() != 1 || av.cols() != xv.len() {
            return Err(Error::Shape(format!("matmul {:?} x {:?}", av.shape(), xv.shape())));
        }
        let xd = xv.data();
        let out: Vec<f64> = (0..av.rows()).map(|r| av.row(r).iter().zip(xd).map(|(w, x)| w * x).sum()).collect();
        self.push("matmul", Tensor::vector(out), Op::MatMul(a, x))
    }

    fn same_len(&self, op: &str, a: Var, b: Var) -> Result<()> {
        let (la, lb) = (self.value(a).len(), self.value(b).len());
        if la != lb {
            return Err(Error::Shape(format!("{op}: lengths {la} and {lb}")));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_len("add", a, b)?;
        let out = self.value(a).data().iter().zip(self.value(b).data()).map(|(x, y)| x + y).collect();
        self.push("add", Tensor::vector(out), Op::Add(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_len("mul", a, b)?;
        let out = self.value(a).data().iter().zip(self.value(b).data()).map(|(x, y)| x * y).collect();
        self.push("mul", Tensor::vector(out), Op::Mul(a, b))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let mut out = Vec::new();
        for &p in parts {
            out.extend_from_slice(self.value(p).data());
        }
        self.push("concat", Tensor::vector(out), Op::Concat(parts.to_vec()))
    }

    /// Row `row` of a matrix, as used for embedding tables.
    pub fn lookup(&mut self, table: Var, row: usize) -> Result<Var> {
        let t = self.value(table);
        if t.shape().len() != 2 || row >= t.rows() {
            return Err(Error::Shape(format!("lookup row {row} in {:?}", t.shape())));
        }
        let out = t.row(row).to_vec();
        self.push("lookup", Tensor::vector(out), Op::Lookup(table, row))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).data().iter().map(|x| x.tanh()).collect();
        self.push("tanh", Tensor::vector(out), Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).data().iter().map(|&x| sigmoid(x)).collect();
        self.push("sigmoid", Tensor::vector(out), Op::Sigmoid(a))
    }

    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let v = self.value(a);
        if start + len > v.len() {
            return Err(Error::Shape(format!("slice {start}..{} of length {}", start + len, v.len())));
        }
        let out = v.data()[start..start + len].to_vec();
        self.push("slice", Tensor::vector(out), Op::Slice(a, start))
    }

    /// Gathers the given entries of a vector.
    pub fn select(&mut self, a: Var, indices: &[usize]) -> Result<Var> {
        let v = self.value(a);
        if let Some(&bad) = indices.iter().find(|&&i| i >= v.len()) {
            return Err(Error::Shape(format!("select index {bad} of length {}", v.len())));
        }
        let out = indices.iter().map(|&i| v.data()[i]).collect();
        self.push("select", Tensor::vector(out), Op::Select(a, indices.to_vec()))
    }

    /// Sum of scalars.
    pub fn sum(&mut self, parts: &[Var]) -> Result<Var> {
        let mut total = 0.0;
        for &p in parts {
            let v = self.value(p);
            if v.len() != 1 {
                return Err(Error::Shape(format!("sum expects scalars, got {:?}", v.shape())));
            }
            total += v.data()[0];
        }
        self.push("sum", Tensor::scalar(total), Op::Sum(parts.to_vec()))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        let out = self.value(a).data().iter().map(|x| x * s).collect();
        self.push("scale", Tensor::vector(out), Op::Scale(a, s))
    }

    /// Elementwise product with a fixed inverted-dropout mask.
    pub fn dropout(&mut self, a: Var, rate: f64, rng: &mut Rng) -> Result<Var> {
        if rate <= 0.0 {
            return Ok(a);
        }
        let keep = 1.0 - rate;
        let mask: Vec<f64> =
            (0..self.value(a).len()).map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 }).collect();
        let m = self.constant(Tensor::vector(mask))?;
        self.mul(a, m)
    }

    /// Cross-entropy `-sum_j target_j * log softmax(logits)_j` against an arbitrary target distribution.
    pub fn softmax_cross_entropy(&mut self, logits: Var, target: &[f64]) -> Result<Var> {
        let z = self.value(logits);
        if z.len() != target.len() {
            return Err(Error::Shape(format!("softmax_cross_entropy: {} logits, {} targets", z.len(), target.len())));
        }
        let logp = log_softmax(z.data());
        let loss: f64 = -target.iter().zip(&logp).map(|(&t, &lp)| if t == 0.0 { 0.0 } else { t * lp }).sum::<f64>();
        let probs = logp.iter().map(|x| x.exp()).collect();
        let target_mass = target.iter().sum();
        self.push(
            "softmax_cross_entropy",
            Tensor::scalar(loss),
            Op::SoftmaxCe { logits, target: target.to_vec(), probs, target_mass },
        )
    }

    /// One LSTM step with gates ordered input, forget, cell, output.
    /// `w` is `[4h, in + h]`, `b` is `[4h]`.
    pub fn lstm_cell(&mut self, x: Var, h: Var, c: Var, w: Var, b: Var) -> Result<(Var, Var)> {
        let hidden = self.value(h).len();
        let xh = self.concat(&[x, h])?;
        let z = self.matmul(w, xh)?;
        let z = self.add(z, b)?;
        if self.value(z).len() != 4 * hidden {
            return Err(Error::Shape(format!("lstm gates {} for hidden {hidden}", self.value(z).len())));
        }
        let i = self.slice(z, 0, hidden)?;
        let f = self.slice(z, hidden, hidden)?;
        let g = self.slice(z, 2 * hidden, hidden)?;
        let o = self.slice(z, 3 * hidden, hidden)?;
        let i = self.sigmoid(i)?;
        let f = self.sigmoid(f)?;
        let g = self.tanh(g)?;
        let o = self.sigmoid(o)?;
        let fc = self.mul(f, c)?;
        let ig = self.mul(i, g)?;
        let c_new = self.add(fc, ig)?;
        let tc = self.tanh(c_new)?;
        let h_new = self.mul(o, tc)?;
        Ok((h_new, c_new))
    }

    /// Gradients of a scalar `loss` with respect to every parameter.
    /// Parameters the loss does not reach get zero gradients.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let Var::Node(last) = loss else {
            return Err(Error::invalid("loss must be a recorded node"));
        };
        if self.nodes[last].0.len() != 1 {
            return Err(Error::Shape(format!("loss must be scalar, got {:?}", self.nodes[last].0.shape())));
        }
        let mut node_grads: Vec<Option<Vec<f64>>> = vec![None; last + 1];
        let mut param_grads = Gradients::zeros_like(self.params);
        node_grads[last] = Some(vec![1.0]);

        for idx in (0..=last).rev() {
            let Some(g) = node_grads[idx].take() else { continue };
            let (out, op) = &self.nodes[idx];
            let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| match v {
                Var::Param(id) => f(param_grads.tensors[id].data_mut()),
                Var::Node(j) => {
                    let buf = node_grads[j].get_or_insert_with(|| vec![0.0; self.nodes[j].0.len()]);
                    f(buf)
                }
            };
            match op {
                Op::Const => {}
                Op::MatMul(a, x) => {
                    let av = self.value(*a);
                    let xv = self.value(*x).data();
                    let cols = av.cols();
                    acc(*a, &mut |ga| {
                        for (r, gr) in g.iter().enumerate() {
                            if *gr != 0.0 {
                                ga[r * cols..(r + 1) * cols].iter_mut().zip(xv).for_each(|(d, x)| *d += gr * x);
                            }
                        }
                    });
                    acc(*x, &mut |gx| {
                        for (r, gr) in g.iter().enumerate() {
                            if *gr != 0.0 {
                                gx.iter_mut().zip(av.row(r)).for_each(|(d, w)| *d += gr * w);
                            }
                        }
                    });
                }
                Op::Add(a, b) => {
                    for v in [*a, *b] {
                        acc(v, &mut |ga| ga.iter_mut().zip(&g).for_each(|(d, x)| *d += x));
                    }
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                    acc(*a, &mut |ga| ga.iter_mut().zip(g.iter().zip(bv)).for_each(|(d, (x, y))| *d += x * y));
                    acc(*b, &mut |gb| gb.iter_mut().zip(g.iter().zip(av)).for_each(|(d, (x, y))| *d += x * y));
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let n = self.value(p).len();
                        let seg = &g[off..off + n];
                        acc(p, &mut |gp| gp.iter_mut().zip(seg).for_each(|(d, x)| *d += x));
                        off += n;
                    }
                }
                Op::Lookup(table, row) => {
                    let cols = self.value(*table).cols();
                    acc(*table, &mut |gt| {
                        gt[row * cols..(row + 1) * cols].iter_mut().zip(&g).for_each(|(d, x)| *d += x)
                    });
                }
                Op::Tanh(a) => {
                    let y = out.data();
                    acc(*a, &mut |ga| {
                        ga.iter_mut().zip(g.iter().zip(y)).for_each(|(d, (x, y))| *d += x * (1.0 - y * y))
                    });
                }
                Op::Sigmoid(a) => {
                    let y = out.data();
                    acc(*a, &mut |ga| {
                        ga.iter_mut().zip(g.iter().zip(y)).for_each(|(d, (x, y))| *d += x * y * (1.0 - y))
                    });
                }
                Op::Slice(a, start) => {
                    let start = *start;
                    acc(*a, &mut |ga| ga[start..start + g.len()].iter_mut().zip(&g).for_each(|(d, x)| *d += x));
                }
                Op::Select(a, indices) => {
                    acc(*a, &mut |ga| indices.iter().zip(&g).for_each(|(&i, x)| ga[i] += x));
                }
                Op::Sum(parts) => {
                    for &p in parts {
                        acc(p, &mut |gp| gp[0] += g[0]);
                    }
                }
                Op::Scale(a, s) => {
                    acc(*a, &mut |ga| ga.iter_mut().zip(&g).for_each(|(d, x)| *d += s * x));
                }
                Op::SoftmaxCe { logits, target, probs, target_mass } => {
                    let gl = g[0];
                    acc(*logits, &mut |gz| {
                        for ((d, p), t) in gz.iter_mut().zip(probs).zip(target) {
                            *d += gl * (target_mass * p - t);
                        }
                    });
                }
            }
        }
        if param_grads.tensors.iter().any(|t| !t.is_finite()) {
            return Err(Error::numerical("non-finite gradient"));
        }
        Ok(param_grads)
    }
}
