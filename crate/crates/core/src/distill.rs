//! Masked-token corruption, teacher targets and the interpolated distillation loss.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rayon::prelude::*;

use crate::corpus::vocab::{TokenId, MASK, NUM_RESERVED};
use crate::corpus::PhraseTree;
use crate::error::{Error, Result};
use crate::nn::log_softmax;
use crate::posterior::{estimate, top_k, Method, Teachers};
use crate::rng::{self, Rng};
use crate::teachers::TeacherModel;

pub const KD_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_TOP_K: usize = 64;
pub const DEFAULT_ALPHA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorruptionConfig {
    pub rate: f64,
    pub mask: f64,
    pub random: f64,
}

impl Default for CorruptionConfig {
    fn default() -> Self {
        CorruptionConfig { rate: 0.15, mask: 0.8, random: 0.1 }
    }
}

impl CorruptionConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.rate) {
            return Err(Error::invalid(format!("corruption rate must lie in [0, 1], got {}", self.rate)));
        }
        if !unit(self.mask) || !unit(self.random) || self.mask + self.random > 1.0 {
            return Err(Error::invalid("mask and random shares must be probabilities summing to at most 1"));
        }
        Ok(())
    }
}

/// A sentence, its corrupted copy and the selected positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorruptionRecord {
    pub tokens: Vec<TokenId>,
    pub corrupted: Vec<TokenId>,
    pub masked: Vec<usize>,
}

/// Corrupts one sentence with the `corruption` substream of `seed`.
pub fn corrupt(tokens: &[TokenId], vocab_size: usize, seed: u64, cfg: &CorruptionConfig) -> Result<CorruptionRecord> {
    corrupt_with(tokens, vocab_size, &mut rng::substream(seed, "corruption"), cfg)
}

pub fn corrupt_with(
    tokens: &[TokenId],
    vocab_size: usize,
    r: &mut Rng,
    cfg: &CorruptionConfig,
) -> Result<CorruptionRecord> {
    cfg.validate()?;
    if vocab_size <= NUM_RESERVED {
        return Err(Error::data("vocabulary has no non-reserved tokens"));
    }
    if let Some(&t) = tokens.iter().find(|&&t| t < NUM_RESERVED || t >= vocab_size) {
        return Err(Error::data(format!("token id {t} cannot be corrupted")));
    }
    let mut corrupted = tokens.to_vec();
    let mut masked = Vec::new();
    for (i, slot) in corrupted.iter_mut().enumerate() {
        if r.gen::<f64>() >= cfg.rate {
            continue;
        }
        masked.push(i);
        let u = r.gen::<f64>();
        if u < cfg.mask {
            *slot = MASK;
        } else if u < cfg.mask + cfg.random {
            *slot = r.gen_range(NUM_RESERVED..vocab_size);
        }
    }
    Ok(CorruptionRecord { tokens: tokens.to_vec(), corrupted, masked })
}

/// Corrupts every sentence from one stream, in corpus order.
pub fn corrupt_corpus(
    corpus: &[Vec<TokenId>],
    vocab_size: usize,
    seed: u64,
    cfg: &CorruptionConfig,
) -> Result<Vec<CorruptionRecord>> {
    let mut r = rng::substream(seed, "corruption");
    corpus.iter().map(|s| corrupt_with(s, vocab_size, &mut r, cfg)).collect()
}

pub const CORRUPTION_FORMAT_VERSION: u32 = 1;

/// Header line, then `tokens TAB corrupted TAB masked positions` per sentence.
pub fn render_corruptions(records: &[CorruptionRecord], vocab_hash: &str) -> String {
    let mut out = format!("# corruption version={CORRUPTION_FORMAT_VERSION} vocab={vocab_hash}\n");
    for r in records {
        out.push_str(&format!("{}\t{}\t{}\n", join_ids(&r.tokens), join_ids(&r.corrupted), join_ids(&r.masked)));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KdMode {
    L2R,
    R2L,
    Uf,
    Ug,
    /// Unigram-prior product of two recurrent teachers.
    Seq,
    /// One-hot targets on the true token.
    None,
}

impl KdMode {
    pub const ALL: [KdMode; 6] = [KdMode::L2R, KdMode::R2L, KdMode::Uf, KdMode::Ug, KdMode::Seq, KdMode::None];

    pub fn as_str(self) -> &'static str {
        match self {
            KdMode::L2R => "l2r",
            KdMode::R2L => "r2l",
            KdMode::Uf => "uf",
            KdMode::Ug => "ug",
            KdMode::Seq => "seq",
            KdMode::None => "none",
        }
    }

    fn method(self) -> Option<Method> {
        match self {
            KdMode::L2R => Some(Method::L2R),
            KdMode::R2L => Some(Method::R2L),
            KdMode::Uf => Some(Method::Uf),
            KdMode::Ug | KdMode::Seq => Some(Method::Ug),
            KdMode::None => None,
        }
    }
}

impl fmt::Display for KdMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KdMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        KdMode::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown distillation mode {s:?}")))
    }
}

/// Sparse distribution: `(id, prob)` pairs in descending probability.
pub type SparseDist = Vec<(TokenId, f64)>;

/// Keeps the `k` most probable ids and renormalizes if anything was dropped.
pub fn truncate_top_k(dist: &[f64], k: usize) -> Result<SparseDist> {
    if k == 0 {
        return Err(Error::invalid("top-K must be at least 1"));
    }
    let support = dist.iter().filter(|&&p| p > 0.0).count();
    let kept: SparseDist = top_k(dist, k.min(support));
    if kept.len() == support {
        return Ok(kept);
    }
    let z: f64 = kept.iter().map(|&(_, p)| p).sum();
    Ok(kept.into_iter().map(|(w, p)| (w, p / z)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdTarget {
    pub position: usize,
    pub dist: SparseDist,
    pub true_token: TokenId,
    pub mode: KdMode,
}

fn check_mode(mode: KdMode, teachers: &Teachers<'_>) -> Result<()> {
    let missing = |what: &str| Err(Error::invalid(format!("mode {mode} needs {what}")));
    match mode {
        KdMode::L2R if teachers.fwd.is_none() => missing("a left-to-right teacher"),
        KdMode::R2L if teachers.rev.is_none() => missing("a right-to-left teacher"),
        KdMode::Uf | KdMode::Ug | KdMode::Seq if teachers.fwd.is_none() || teachers.rev.is_none() => {
            missing("teachers in both directions")
        }
        KdMode::Ug | KdMode::Seq if teachers.unigram.is_none() => missing("a unigram prior"),
        KdMode::Seq => {
            let recurrent = |t: Option<&TeacherModel>| matches!(t, Some(TeacherModel::Recurrent(_)));
            if recurrent(teachers.fwd) && recurrent(teachers.rev) {
                Ok(())
            } else {
                missing("recurrent teachers")
            }
        }
        _ => Ok(()),
    }
}

/// Targets for every masked position of one clean sentence.
pub fn build_targets(
    mode: KdMode,
    teachers: &Teachers<'_>,
    tokens: &[TokenId],
    tree: Option<&PhraseTree>,
    masked: &[usize],
    k: usize,
) -> Result<Vec<KdTarget>> {
    check_mode(mode, teachers)?;
    masked
        .iter()
        .map(|&i| {
            let true_token =
                *tokens.get(i).ok_or_else(|| Error::invalid(format!("masked position {i} out of range")))?;
            let dist = match mode.method() {
                Some(m) => truncate_top_k(&estimate(m, teachers, tokens, tree, i)?.dist, k)?,
                None => vec![(true_token, 1.0)],
            };
            Ok(KdTarget { position: i, dist, true_token, mode })
        })
        .collect()
}

/// Dense `alpha * target + (1 - alpha) * onehot(true)` over the candidates.
pub fn mixed_target(target: &[(TokenId, f64)], true_token: TokenId, alpha: f64, vocab_size: usize) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    if true_token < NUM_RESERVED || true_token >= vocab_size {
        return Err(Error::data(format!("true token {true_token} is not a candidate")));
    }
    let mut mixed = vec![0.0; vocab_size - NUM_RESERVED];
    for &(w, p) in target {
        if w < NUM_RESERVED || w >= vocab_size {
            return Err(Error::data(format!("target id {w} is not a candidate")));
        }
        mixed[w - NUM_RESERVED] += alpha * p;
    }
    mixed[true_token - NUM_RESERVED] += 1.0 - alpha;
    Ok(mixed)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    Ok(())
}

/// Interpolated loss over masked positions, given student logits over the
/// candidates (index `w - 5`). Returns the mean loss and the gradient of that
/// mean with respect to every logit row.
pub fn kd_loss(
    logits: &[Vec<f64>],
    targets: &[SparseDist],
    true_tokens: &[TokenId],
    alpha: f64,
) -> Result<(f64, Vec<Vec<f64>>)> {
    check_alpha(alpha)?;
    if logits.len() != targets.len() || logits.len() != true_tokens.len() {
        return Err(Error::Shape("logits, targets and true tokens differ in length".into()));
    }
    if logits.is_empty() {
        return Err(Error::invalid("no masked positions"));
    }
    let n = logits.len() as f64;
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(logits.len());
    for ((z, t), &y) in logits.iter().zip(targets).zip(true_tokens) {
        let vocab_size = z.len() + NUM_RESERVED;
        let logp = log_softmax(z);
        let hard = -logp[y
            .checked_sub(NUM_RESERVED)
            .filter(|&k| k < z.len())
            .ok_or_else(|| Error::data(format!("true token {y} is not a candidate")))?];
        let soft = if alpha > 0.0 { -t.iter().map(|&(w, p)| p * logp[w - NUM_RESERVED]).sum::<f64>() } else { 0.0 };
        loss += alpha * soft + (1.0 - alpha) * hard;
        let mixed = mixed_target(t, y, alpha, vocab_size)?;
        grads.push(logp.iter().zip(&mixed).map(|(lp, m)| (lp.exp() - m) / n).collect());
    }
    let loss = loss / n;
    if !loss.is_finite() {
        return Err(Error::numerical("distillation loss is not finite"));
    }
    Ok((loss, grads))
}

/// One sentence of a distillation dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct KdRecord {
    pub tokens: Vec<TokenId>,
    pub corrupted: Vec<TokenId>,
    pub masked: Vec<usize>,
    /// One sparse target per masked position, in the same order.
    pub targets: Vec<SparseDist>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdDataset {
    pub vocab_hash: String,
    pub k: usize,
    pub alpha: f64,
    pub mode: KdMode,
    pub records: Vec<KdRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KdBuildConfig {
    pub mode: KdMode,
    pub k: usize,
    pub alpha: f64,
    pub seed: u64,
    pub corruption: CorruptionConfig,
}

impl Default for KdBuildConfig {
    fn default() -> Self {
        KdBuildConfig {
            mode: KdMode::Ug,
            k: DEFAULT_TOP_K,
            alpha: DEFAULT_ALPHA,
            seed: 1,
            corruption: CorruptionConfig::default(),
        }
    }
}

/// Corrupts the corpus and scores every masked position on the clean sentence.
pub fn build_dataset(
    cfg: &KdBuildConfig,
    teachers: &Teachers<'_>,
    corpus: &[Vec<TokenId>],
    trees: Option<&[PhraseTree]>,
    vocab_size: usize,
    vocab_hash: &str,
) -> Result<KdDataset> {
    check_alpha(cfg.alpha)?;
    check_mode(cfg.mode, teachers)?;
    if let Some(trees) = trees {
        if trees.len() != corpus.len() {
            return Err(Error::data(format!("{} trees for {} sentences", trees.len(), corpus.len())));
        }
    }
    let corrupted = corrupt_corpus(corpus, vocab_size, cfg.seed, &cfg.corruption)?;
    let records = corrupted
        .into_par_iter()
        .enumerate()
        .map(|(s, rec)| {
            let tree = trees.map(|t| &t[s]);
            let targets = build_targets(cfg.mode, teachers, &rec.tokens, tree, &rec.masked, cfg.k)?;
            Ok(KdRecord {
                tokens: rec.tokens,
                corrupted: rec.corrupted,
                masked: rec.masked,
                targets: targets.into_iter().map(|t| t.dist).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(KdDataset { vocab_hash: vocab_hash.to_string(), k: cfg.k, alpha: cfg.alpha, mode: cfg.mode, records })
}

fn join_ids(ids: &[usize]) -> String {
    ids.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}

impl KdDataset {
    pub fn num_targets(&self) -> usize {
        self.records.iter().map(|r| r.targets.len()).sum()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!(
            "# kd version={KD_FORMAT_VERSION} vocab={} k={} alpha={} mode={}\n",
            self.vocab_hash, self.k, self.alpha, self.mode
        );
        for r in &self.records {
            let targets: Vec<String> = r
                .targets
                .iter()
                .map(|t| t.iter().map(|(w, p)| format!("{w}:{p}")).collect::<Vec<_>>().join(" "))
                .collect();
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                join_ids(&r.tokens),
                join_ids(&r.corrupted),
                join_ids(&r.masked),
                targets.join("|")
            ));
        }
        out
    }

    /// Parses a dataset and checks it was built with the vocabulary hashing to `vocab_hash`.
    pub fn from_tsv(text: &str, vocab_hash: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .and_then(|l| l.strip_prefix("# kd "))
            .ok_or_else(|| Error::data("not a distillation dataset"))?;
        let mut fields = std::collections::BTreeMap::new();
        for f in header.split_whitespace() {
            let (k, v) = f.split_once('=').ok_or_else(|| Error::data(format!("bad header field {f:?}")))?;
            fields.insert(k, v);
        }
        let field = |k: &str| fields.get(k).copied().ok_or_else(|| Error::data(format!("dataset header lacks {k}")));
        let version = field("version")?;
        if version != KD_FORMAT_VERSION.to_string() {
            return Err(Error::data(format!("unsupported dataset version {version}")));
        }
        let found = field("vocab")?;
        if found != vocab_hash {
            return Err(Error::VocabMismatch { expected: vocab_hash.to_string(), found: found.to_string() });
        }
        let bad_header = |k: &str| Error::data(format!("bad dataset header value for {k}"));
        let k = field("k")?.parse().map_err(|_| bad_header("k"))?;
        let alpha = field("alpha")?.parse().map_err(|_| bad_header("alpha"))?;
        check_alpha(alpha)?;
        let mode = field("mode")?.parse()?;
        let mut records = Vec::new();
        for (n, line) in lines.enumerate() {
            let bad = || Error::data(format!("malformed dataset line {}", n + 2));
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(bad());
            }
            let ids = |s: &str| {
                s.split_whitespace().map(|x| x.parse::<usize>().map_err(|_| bad())).collect::<Result<Vec<_>>>()
            };
            let targets: Vec<SparseDist> = if cols[3].is_empty() {
                Vec::new()
            } else {
                cols[3]
                    .split('|')
                    .map(|t| {
                        t.split_whitespace()
                            .map(|pair| {
                                let (w, p) = pair.split_once(':').ok_or_else(bad)?;
                                Ok((w.parse().map_err(|_| bad())?, p.parse().map_err(|_| bad())?))
                            })
                            .collect()
                    })
                    .collect::<Result<_>>()?
            };
            let rec = KdRecord { tokens: ids(cols[0])?, corrupted: ids(cols[1])?, masked: ids(cols[2])?, targets };
            if rec.tokens.len() != rec.corrupted.len()
                || rec.masked.len() != rec.targets.len()
                || rec.masked.iter().any(|&i| i >= rec.tokens.len())
            {
                return Err(bad());
            }
            records.push(rec);
        }
        Ok(KdDataset { vocab_hash: found.to_string(), k, alpha, mode, records })
    }

    pub fn write(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_tsv())?;
        Ok(())
    }

    pub fn read(path: &std::path::Path, vocab_hash: &str) -> Result<Self> {
        Self::from_tsv(&std::fs::read_to_string(path)?, vocab_hash)
    }
}

/// Plain masked-token data for the teacher-free baseline: one-hot targets
/// on the true token, same corruption stream as [`build_dataset`].
pub fn onehot_dataset(
    corpus: &[Vec<TokenId>],
    vocab_size: usize,
    vocab_hash: &str,
    seed: u64,
    cfg: &CorruptionConfig,
) -> Result<KdDataset> {
    let records = corrupt_corpus(corpus, vocab_size, seed, cfg)?
        .into_iter()
        .map(|r| {
            let targets = r.masked.iter().map(|&i| vec![(r.tokens[i], 1.0)]).collect();
            KdRecord { tokens: r.tokens, corrupted: r.corrupted, masked: r.masked, targets }
        })
        .collect();
    Ok(KdDataset { vocab_hash: vocab_hash.to_string(), k: 1, alpha: 0.0, mode: KdMode::None, records })
}
