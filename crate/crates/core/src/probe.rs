//! Linear probes over student encodings, with type-level control tasks.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;

use crate::corpus::{Node, PhraseTree, TokenId};
use crate::error::{Error, Result};
use crate::nn::softmax;
use crate::rng;

pub const PROBE_FORMAT_VERSION: u32 = 1;
pub const CONTROL_FORMAT_VERSION: u32 = 1;

/// Tokens with one label each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeDataset {
    pub sentences: Vec<Vec<String>>,
    pub labels: Vec<Vec<String>>,
}

/// `preterminal/parent` for every leaf of a derivation tree.
pub fn supertags(tree: &PhraseTree) -> Result<Vec<String>> {
    fn walk(t: &PhraseTree, parent: Option<&str>, out: &mut Vec<String>) -> Result<()> {
        if t.is_preterminal() {
            let parent = parent.ok_or_else(|| Error::data(format!("preterminal {} has no parent", t.label)))?;
            out.push(format!("{}/{}", t.label, parent));
            return Ok(());
        }
        for c in &t.children {
            match c {
                Node::Tree(sub) => walk(sub, Some(&t.label), out)?,
                Node::Leaf(w) => return Err(Error::data(format!("terminal {w:?} is not under a preterminal"))),
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(tree, None, &mut out)?;
    Ok(out)
}

impl ProbeDataset {
    pub fn new(sentences: Vec<Vec<String>>, labels: Vec<Vec<String>>) -> Result<Self> {
        if sentences.len() != labels.len() || sentences.iter().zip(&labels).any(|(s, l)| s.len() != l.len()) {
            return Err(Error::data("every token needs exactly one label"));
        }
        Ok(ProbeDataset { sentences, labels })
    }

    /// Leaves labeled by [`supertags`].
    pub fn from_trees(trees: &[PhraseTree]) -> Result<Self> {
        let sentences = trees.iter().map(|t| t.leaves().into_iter().map(str::to_string).collect()).collect();
        let labels = trees.iter().map(supertags).collect::<Result<_>>()?;
        Self::new(sentences, labels)
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn num_tokens(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }

    pub fn tag_set(&self) -> BTreeSet<&str> {
        self.labels.iter().flatten().map(String::as_str).collect()
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        ProbeDataset { sentences: self.sentences[range.clone()].to_vec(), labels: self.labels[range].to_vec() }
    }

    /// One sentence per line as space-separated `token/LABEL` pairs.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (s, l) in self.sentences.iter().zip(&self.labels) {
            let pairs: Vec<String> = s.iter().zip(l).map(|(w, t)| format!("{w}/{t}")).collect();
            out.push_str(&pairs.join(" "));
            out.push('\n');
        }
        out
    }

    /// Inverse of [`render`](Self::render). The label is everything after the first `/`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut sentences = Vec::new();
        let mut labels = Vec::new();
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let mut s = Vec::new();
            let mut l = Vec::new();
            for pair in line.split_whitespace() {
                let (w, t) = pair
                    .split_once('/')
                    .filter(|(w, t)| !w.is_empty() && !t.is_empty())
                    .ok_or_else(|| Error::data(format!("line {}: {pair:?} is not token/LABEL", n + 1)))?;
                s.push(w.to_string());
                l.push(t.to_string());
            }
            sentences.push(s);
            labels.push(l);
        }
        Self::new(sentences, labels)
    }
}

/// Word type to random control label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlMap {
    pub seed: u64,
    pub map: BTreeMap<String, String>,
}

/// Maps each word type, in sorted order, to a uniform draw from `|T|` control labels.
pub fn make_control(data: &ProbeDataset, seed: u64) -> Result<ControlMap> {
    let n_tags = data.tag_set().len();
    if data.num_tokens() == 0 {
        return Err(Error::data("control task needs a nonempty dataset"));
    }
    let types: BTreeSet<&str> = data.sentences.iter().flatten().map(String::as_str).collect();
    let mut r = rng::substream(seed, "control");
    let map = types.into_iter().map(|w| (w.to_string(), format!("C{}", r.gen_range(0..n_tags)))).collect();
    Ok(ControlMap { seed, map })
}

impl ControlMap {
    pub fn apply(&self, data: &ProbeDataset) -> Result<ProbeDataset> {
        let labels = data
            .sentences
            .iter()
            .map(|s| {
                s.iter()
                    .map(|w| {
                        self.map.get(w).cloned().ok_or_else(|| Error::data(format!("word {w:?} has no control label")))
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        ProbeDataset::new(data.sentences.clone(), labels)
    }

    pub fn render(&self) -> String {
        let mut out = format!("# control version={CONTROL_FORMAT_VERSION} seed={}\n", self.seed);
        for (w, l) in &self.map {
            out.push_str(&format!("{w}\t{l}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeConfig {
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig { lr: 0.1, epochs: 50, seed: 1 }
    }
}

/// Softmax regression from encodings to labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProbe {
    pub classes: Vec<String>,
    /// One row per class: weights followed by the bias.
    pub weights: Vec<Vec<f64>>,
}

impl LinearProbe {
    fn scores(&self, x: &[f64]) -> Vec<f64> {
        self.weights.iter().map(|w| w[..x.len()].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[x.len()]).collect()
    }

    /// Most probable label; ties go to the class sorted first.
    pub fn predict(&self, x: &[f64]) -> &str {
        let s = self.scores(x);
        let best = (0..s.len()).fold(0, |b, k| if s[k] > s[b] { k } else { b });
        &self.classes[best]
    }
}

/// Zero-initialized softmax regression trained by per-example SGD in shuffled order.
pub fn train_linear_probe(vectors: &[Vec<f64>], labels: &[String], cfg: &ProbeConfig) -> Result<LinearProbe> {
    if vectors.len() != labels.len() || vectors.is_empty() {
        return Err(Error::invalid("probe needs one label per vector and at least one vector"));
    }
    let dim = vectors[0].len();
    if vectors.iter().any(|v| v.len() != dim) {
        return Err(Error::Shape("probe vectors differ in width".into()));
    }
    let classes: Vec<String> = labels.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let index: BTreeMap<&str, usize> = classes.iter().enumerate().map(|(k, c)| (c.as_str(), k)).collect();
    let ys: Vec<usize> = labels.iter().map(|l| index[l.as_str()]).collect();
    let mut probe = LinearProbe { weights: vec![vec![0.0; dim + 1]; classes.len()], classes };
    let mut order: Vec<usize> = (0..vectors.len()).collect();
    let mut r = rng::substream(cfg.seed, "probe");
    for _ in 0..cfg.epochs {
        order.shuffle(&mut r);
        for &n in &order {
            let x = &vectors[n];
            let p = softmax(&probe.scores(x));
            for (k, w) in probe.weights.iter_mut().enumerate() {
                let d = p[k] - f64::from(u8::from(k == ys[n]));
                for (wi, xi) in w.iter_mut().zip(x) {
                    *wi -= cfg.lr * d * xi;
                }
                w[dim] -= cfg.lr * d;
            }
        }
        if probe.weights.iter().flatten().any(|w| !w.is_finite()) {
            return Err(Error::numerical("probe training diverged"));
        }
    }
    Ok(probe)
}

/// Token-level accuracy in [0, 1].
pub fn evaluate_probe(probe: &LinearProbe, vectors: &[Vec<f64>], labels: &[String]) -> Result<f64> {
    if vectors.len() != labels.len() || vectors.is_empty() {
        return Err(Error::invalid("evaluation needs one label per vector and at least one vector"));
    }
    let hits = vectors.iter().zip(labels).filter(|(v, l)| probe.predict(v) == l.as_str()).count();
    Ok(hits as f64 / vectors.len() as f64)
}

pub fn selectivity(probe_acc: f64, control_acc: f64) -> f64 {
    probe_acc - control_acc
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    pub model: String,
    pub seed: u64,
    pub probe_acc: f64,
    pub control_acc: f64,
    pub selectivity: f64,
}

impl ProbeResult {
    pub const TSV_HEADER: &'static str = "model\tprobe_acc\tcontrol_acc\tselectivity\tseed\n";

    /// Report row with accuracies in percent.
    pub fn tsv_row(&self) -> String {
        format!(
            "{}\t{:.2}\t{:.2}\t{:.2}\t{}\n",
            self.model,
            100.0 * self.probe_acc,
            100.0 * self.control_acc,
            100.0 * self.selectivity,
            self.seed
        )
    }
}

/// Flattens per-sentence encodings and labels into aligned token lists.
fn flatten(encodings: Vec<Vec<Vec<f64>>>, labels: &[Vec<String>]) -> (Vec<Vec<f64>>, Vec<String>) {
    (encodings.into_iter().flatten().collect(), labels.iter().flatten().cloned().collect())
}

/// Trains probes on `train` and scores them on `test`, once with the real
/// labels and once with control labels drawn over both splits' word types.
/// `encode` maps a sentence to one vector per token.
pub fn run_probe<E>(
    model: &str,
    encode: E,
    train: &ProbeDataset,
    test: &ProbeDataset,
    control_seed: u64,
    cfg: &ProbeConfig,
) -> Result<ProbeResult>
where
    E: Fn(&[String]) -> Result<Vec<Vec<f64>>> + Sync,
{
    let both = ProbeDataset::new(
        train.sentences.iter().chain(&test.sentences).cloned().collect(),
        train.labels.iter().chain(&test.labels).cloned().collect(),
    )?;
    let control = make_control(&both, control_seed)?;
    let encode_all =
        |d: &ProbeDataset| -> Result<Vec<Vec<Vec<f64>>>> { d.sentences.par_iter().map(|s| encode(s)).collect() };
    let (train_enc, test_enc) = (encode_all(train)?, encode_all(test)?);
    let (ctrl_train, ctrl_test) = (control.apply(train)?, control.apply(test)?);
    let (xs, ys) = flatten(train_enc.clone(), &train.labels);
    let (xt, yt) = flatten(test_enc.clone(), &test.labels);
    let probe_acc = evaluate_probe(&train_linear_probe(&xs, &ys, cfg)?, &xt, &yt)?;
    let (xs, ys) = flatten(train_enc, &ctrl_train.labels);
    let (xt, yt) = flatten(test_enc, &ctrl_test.labels);
    let control_acc = evaluate_probe(&train_linear_probe(&xs, &ys, cfg)?, &xt, &yt)?;
    Ok(ProbeResult {
        model: model.to_string(),
        seed: control_seed,
        probe_acc,
        control_acc,
        selectivity: selectivity(probe_acc, control_acc),
    })
}

/// Maps probe tokens to vocabulary ids, unknown words to `<unk>`.
pub fn token_ids(vocab: &crate::corpus::Vocabulary, sentence: &[String]) -> Vec<TokenId> {
    sentence.iter().map(|w| vocab.id_or_unk(w)).collect()
}
