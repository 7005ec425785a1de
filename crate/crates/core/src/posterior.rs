//! Distributions over the token at a masked position given both sides.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng as _;
use rayon::prelude::*;

use crate::corpus::vocab::{TokenId, EOS, NUM_RESERVED};
use crate::corpus::PhraseTree;
use crate::error::{Error, Result};
use crate::nn::log_sum_exp;
use crate::rng;
use crate::teachers::{LanguageModel, TeacherModel, UnigramModel};
use crate::transitions::Direction;

pub const DUMP_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_DUMP_K: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Exact,
    /// Product of experts with a uniform prior.
    Uf,
    /// Product of experts divided by the unigram prior.
    Ug,
    Moe,
    L2R,
    R2L,
}

impl Method {
    pub const ALL: [Method; 6] = [Method::Exact, Method::Uf, Method::Ug, Method::Moe, Method::L2R, Method::R2L];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Uf => "uf",
            Method::Ug => "ug",
            Method::Moe => "moe",
            Method::L2R => "l2r",
            Method::R2L => "r2l",
        }
    }

    /// Row label in the posterior-quality report.
    pub fn report_name(self) -> &'static str {
        match self {
            Method::Exact => "Exact",
            Method::Uf => "Uniform",
            Method::Ug => "Unigram",
            Method::Moe => "MoE",
            Method::L2R => "L2R",
            Method::R2L => "R2L",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s) || m.report_name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown posterior method {s:?}")))
    }
}

/// A normalized distribution over the vocabulary at one position; reserved ids are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorEstimate {
    pub position: usize,
    pub method: Method,
    pub dist: Vec<f64>,
}

impl PosteriorEstimate {
    pub fn prob(&self, w: TokenId) -> f64 {
        self.dist[w]
    }

    pub fn argmax(&self) -> TokenId {
        top_k(&self.dist, 1)[0].0
    }
}

/// The `k` most probable ids, ties broken toward the lower id.
pub fn top_k(dist: &[f64], k: usize) -> Vec<(TokenId, f64)> {
    let mut idx: Vec<(TokenId, f64)> = dist.iter().copied().enumerate().collect();
    idx.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    idx.truncate(k);
    idx
}

/// Prior divided out of the product of experts.
#[derive(Debug, Clone, Copy)]
pub enum Prior<'a> {
    Uniform,
    Unigram(&'a UnigramModel),
}

/// Turns per-candidate log-scores (indexed from id 5) into a full-vocabulary distribution.
fn finish(scores: &[f64], vocab_size: usize) -> Result<Vec<f64>> {
    let lse = log_sum_exp(scores);
    if lse == f64::NEG_INFINITY {
        return Err(Error::numerical("every candidate has zero probability"));
    }
    if !lse.is_finite() {
        return Err(Error::numerical("non-finite posterior normalizer"));
    }
    let mut dist = vec![0.0; vocab_size];
    for (k, s) in scores.iter().enumerate() {
        dist[NUM_RESERVED + k] = (s - lse).exp();
    }
    Ok(dist)
}

fn check_direction<T: LanguageModel + ?Sized>(t: &T, want: Direction, role: &str) -> Result<()> {
    if t.direction() != want {
        return Err(Error::invalid(format!("{role} teacher must read {want}, it reads {}", t.direction())));
    }
    Ok(())
}

fn check_position(tokens: &[TokenId], i: usize) -> Result<()> {
    if i >= tokens.len() {
        return Err(Error::invalid(format!("position {i} outside a sentence of {} tokens", tokens.len())));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactOptions {
    /// Include the `</s>` factor after the last token.
    pub score_terminator: bool,
}

impl Default for ExactOptions {
    fn default() -> Self {
        ExactOptions { score_terminator: true }
    }
}

/// Brute-force posterior: every candidate is substituted at `i` and the
/// whole suffix is rescored by the left-to-right teacher.
pub fn exact_posterior<T: LanguageModel>(t: &T, tokens: &[TokenId], i: usize) -> Result<PosteriorEstimate> {
    exact_posterior_with(t, tokens, i, ExactOptions::default())
}

pub fn exact_posterior_with<T: LanguageModel>(
    t: &T,
    tokens: &[TokenId],
    i: usize,
    opts: ExactOptions,
) -> Result<PosteriorEstimate> {
    check_direction(t, Direction::L2R, "exact-posterior")?;
    check_position(tokens, i)?;
    let v = t.vocab_size();
    let start = t.state_after(&tokens[..i])?;
    let base = t.log_dist(&start)?;
    let suffix = &tokens[i + 1..];
    let scores = (NUM_RESERVED..v)
        .into_par_iter()
        .map(|w| -> Result<f64> {
            let mut total = base[w];
            if total == f64::NEG_INFINITY {
                return Ok(total);
            }
            let mut st = t.advance(&start, w)?;
            for &x in suffix {
                total += t.log_dist(&st)?[x];
                if total == f64::NEG_INFINITY {
                    return Ok(total);
                }
                st = t.advance(&st, x)?;
            }
            if opts.score_terminator {
                total += t.log_dist(&st)?[EOS];
            }
            Ok(total)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(PosteriorEstimate { position: i, method: Method::Exact, dist: finish(&scores, v)? })
}

/// Forward log-distribution at `i` given `tokens[..i]`.
fn forward_log<F: LanguageModel>(fwd: &F, tokens: &[TokenId], i: usize) -> Result<Vec<f64>> {
    check_direction(fwd, Direction::L2R, "forward")?;
    fwd.log_dist(&fwd.state_after(&tokens[..i])?)
}

/// Reverse log-distribution at `i` given `tokens[i + 1..]` read right to left.
fn reverse_log<R: LanguageModel>(rev: &R, tokens: &[TokenId], i: usize) -> Result<Vec<f64>> {
    check_direction(rev, Direction::R2L, "reverse")?;
    let ctx: Vec<TokenId> = tokens[i + 1..].iter().rev().copied().collect();
    rev.log_dist(&rev.state_after(&ctx)?)
}

/// `fwd(w | left) * rev(w | right) / q(w)`, normalized over the candidates.
pub fn approx_posterior<F: LanguageModel, R: LanguageModel>(
    fwd: &F,
    rev: &R,
    q: Prior<'_>,
    tokens: &[TokenId],
    i: usize,
) -> Result<PosteriorEstimate> {
    check_position(tokens, i)?;
    let lf = forward_log(fwd, tokens, i)?;
    let lr = reverse_log(rev, tokens, i)?;
    let v = fwd.vocab_size();
    if rev.vocab_size() != v {
        return Err(Error::invalid("forward and reverse teachers use different vocabularies"));
    }
    let mut scores = Vec::with_capacity(v - NUM_RESERVED);
    for w in NUM_RESERVED..v {
        let product = lf[w] + lr[w];
        let s = match q {
            Prior::Uniform => product,
            Prior::Unigram(u) => {
                let qw = u.prob(w);
                if qw > 0.0 {
                    product - qw.ln()
                } else if product == f64::NEG_INFINITY {
                    product
                } else {
                    return Err(Error::numerical(format!(
                        "unigram prior is zero for candidate {w} with nonzero product"
                    )));
                }
            }
        };
        scores.push(s);
    }
    let method = match q {
        Prior::Uniform => Method::Uf,
        Prior::Unigram(_) => Method::Ug,
    };
    Ok(PosteriorEstimate { position: i, method, dist: finish(&scores, v)? })
}

fn restricted(logp: &[f64]) -> Result<Vec<f64>> {
    finish(&logp[NUM_RESERVED..], logp.len())
}

/// Equal-weight mixture of the two directional distributions, each first
/// restricted to the candidates.
pub fn moe_posterior<F: LanguageModel, R: LanguageModel>(
    fwd: &F,
    rev: &R,
    tokens: &[TokenId],
    i: usize,
) -> Result<PosteriorEstimate> {
    check_position(tokens, i)?;
    let pf = restricted(&forward_log(fwd, tokens, i)?)?;
    let pr = restricted(&reverse_log(rev, tokens, i)?)?;
    let dist = pf.iter().zip(&pr).map(|(a, b)| 0.5 * a + 0.5 * b).collect();
    Ok(PosteriorEstimate { position: i, method: Method::Moe, dist })
}

/// A single directional teacher's distribution restricted to the candidates.
pub fn directional_posterior<T: LanguageModel>(t: &T, tokens: &[TokenId], i: usize) -> Result<PosteriorEstimate> {
    check_position(tokens, i)?;
    let (logp, method) = match t.direction() {
        Direction::L2R => (forward_log(t, tokens, i)?, Method::L2R),
        Direction::R2L => (reverse_log(t, tokens, i)?, Method::R2L),
    };
    Ok(PosteriorEstimate { position: i, method, dist: restricted(&logp)? })
}

/// Teachers available to the generic dispatcher.
#[derive(Debug, Clone, Copy)]
pub struct Teachers<'a> {
    pub fwd: Option<&'a TeacherModel>,
    pub rev: Option<&'a TeacherModel>,
    pub unigram: Option<&'a UnigramModel>,
}

impl<'a> Teachers<'a> {
    fn fwd(&self) -> Result<&'a TeacherModel> {
        self.fwd.ok_or_else(|| Error::invalid("method needs a left-to-right teacher"))
    }

    fn rev(&self) -> Result<&'a TeacherModel> {
        self.rev.ok_or_else(|| Error::invalid("method needs a right-to-left teacher"))
    }
}

/// Posterior at `i` by `method`. `tree` is required when a teacher is syntactic.
pub fn estimate(
    method: Method,
    teachers: &Teachers<'_>,
    tokens: &[TokenId],
    tree: Option<&PhraseTree>,
    i: usize,
) -> Result<PosteriorEstimate> {
    match method {
        Method::Exact => exact_posterior(&teachers.fwd()?.bind(tree)?, tokens, i),
        Method::L2R => directional_posterior(&teachers.fwd()?.bind(tree)?, tokens, i),
        Method::R2L => directional_posterior(&teachers.rev()?.bind(tree)?, tokens, i),
        Method::Moe => moe_posterior(&teachers.fwd()?.bind(tree)?, &teachers.rev()?.bind(tree)?, tokens, i),
        Method::Uf => {
            approx_posterior(&teachers.fwd()?.bind(tree)?, &teachers.rev()?.bind(tree)?, Prior::Uniform, tokens, i)
        }
        Method::Ug => {
            let q = teachers.unigram.ok_or_else(|| Error::invalid("method ug needs a unigram prior"))?;
            approx_posterior(&teachers.fwd()?.bind(tree)?, &teachers.rev()?.bind(tree)?, Prior::Unigram(q), tokens, i)
        }
    }
}

/// Which positions a report scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Positions {
    /// Every token position.
    AllInterior,
    /// Each position kept independently with probability `rate`.
    Sampled { rate: f64, seed: u64 },
}

impl Positions {
    pub fn select(&self, sent_id: usize, len: usize) -> Vec<usize> {
        match *self {
            Positions::AllInterior => (0..len).collect(),
            Positions::Sampled { rate, seed } => {
                let mut r = rng::substream(seed, &format!("positions-{sent_id}"));
                (0..len).filter(|_| r.gen::<f64>() < rate).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: Method,
    pub nll: f64,
    pub perplexity: f64,
    pub count: usize,
}

/// Average posterior NLL of the true token per method.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorReport {
    pub rows: Vec<ReportRow>,
}

impl PosteriorReport {
    pub fn row(&self, method: Method) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("method\tnll\tperplexity\tpositions\n");
        for r in &self.rows {
            out.push_str(&format!("{}\t{:.6}\t{:.6}\t{}\n", r.method.report_name(), r.nll, r.perplexity, r.count));
        }
        out
    }
}

/// Scores every selected position with every method. Positions holding a
/// reserved token (e.g. `<unk>`) are skipped since no method can predict them.
pub fn posterior_report(
    methods: &[Method],
    teachers: &Teachers<'_>,
    corpus: &[Vec<TokenId>],
    trees: Option<&[PhraseTree]>,
    positions: Positions,
) -> Result<PosteriorReport> {
    if let Some(trees) = trees {
        if trees.len() != corpus.len() {
            return Err(Error::data(format!("{} trees for {} sentences", trees.len(), corpus.len())));
        }
    }
    let per_sentence = corpus
        .par_iter()
        .enumerate()
        .map(|(s, tokens)| -> Result<Vec<(f64, usize)>> {
            let tree = trees.map(|t| &t[s]);
            let pos: Vec<usize> =
                positions.select(s, tokens.len()).into_iter().filter(|&i| tokens[i] >= NUM_RESERVED).collect();
            methods
                .iter()
                .map(|&m| {
                    let mut nll = 0.0;
                    for &i in &pos {
                        let p = estimate(m, teachers, tokens, tree, i)?.prob(tokens[i]);
                        nll -= p.ln();
                    }
                    Ok((nll, pos.len()))
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(methods.len());
    for (k, &method) in methods.iter().enumerate() {
        let (mut nll, mut count) = (0.0, 0usize);
        for sent in &per_sentence {
            nll += sent[k].0;
            count += sent[k].1;
        }
        if count == 0 {
            return Err(Error::data("no positions to score"));
        }
        let nll = nll / count as f64;
        rows.push(ReportRow { method, nll, perplexity: nll.exp(), count });
    }
    Ok(PosteriorReport { rows })
}

/// One dumped estimate: sentence index plus the estimate.
pub type DumpRecord = (usize, PosteriorEstimate);

pub fn render_dump(records: &[DumpRecord], k: usize, vocab_hash: &str) -> String {
    let mut out =
        format!("# posterior version={DUMP_FORMAT_VERSION} k={k} vocab={vocab_hash}\nsent_id\tposition\tmethod\ttop\n");
    for (sid, est) in records {
        let pairs: Vec<String> = top_k(&est.dist, k)
            .into_iter()
            .filter(|&(_, p)| p > 0.0)
            .map(|(id, p)| format!("{id}:{}", p.ln()))
            .collect();
        out.push_str(&format!("{sid}\t{}\t{}\t{}\n", est.position, est.method, pairs.join(" ")));
    }
    out
}

/// A dumped row: sentence, position, method and its top-K `(id, logprob)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct DumpRow {
    pub sent_id: usize,
    pub position: usize,
    pub method: Method,
    pub top: Vec<(TokenId, f64)>,
}

/// Parses a dump, checking its vocabulary hash. Returns `k` and the rows.
pub fn parse_dump(text: &str, vocab_hash: &str) -> Result<(usize, Vec<DumpRow>)> {
    let mut lines = text.lines();
    let header =
        lines.next().and_then(|l| l.strip_prefix("# posterior ")).ok_or_else(|| Error::data("not a posterior dump"))?;
    let mut k = None;
    for field in header.split_whitespace() {
        match field.split_once('=') {
            Some(("k", v)) => k = v.parse().ok(),
            Some(("vocab", v)) if v != vocab_hash => {
                return Err(Error::VocabMismatch { expected: vocab_hash.to_string(), found: v.to_string() })
            }
            _ => {}
        }
    }
    let k = k.ok_or_else(|| Error::data("posterior dump header lacks k"))?;
    lines.next();
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let bad = || Error::data(format!("malformed posterior dump line {}", n + 3));
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(bad());
        }
        let top = cols[3]
            .split_whitespace()
            .map(|p| {
                let (id, lp) = p.split_once(':').ok_or_else(bad)?;
                Ok((id.parse().map_err(|_| bad())?, lp.parse().map_err(|_| bad())?))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(DumpRow {
            sent_id: cols[0].parse().map_err(|_| bad())?,
            position: cols[1].parse().map_err(|_| bad())?,
            method: cols[2].parse()?,
            top,
        });
    }
    Ok((k, rows))
}

/// Wall-clock comparison of exact and approximate posteriors over every position.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub positions: usize,
    pub exact_secs: f64,
    pub approx_secs: f64,
}

impl BenchReport {
    pub fn speedup(&self) -> f64 {
        self.exact_secs / self.approx_secs
    }
}

pub fn bench<F: LanguageModel, R: LanguageModel>(
    fwd: &F,
    rev: &R,
    q: Prior<'_>,
    corpus: &[Vec<TokenId>],
) -> Result<BenchReport> {
    let positions: usize = corpus.iter().map(Vec::len).sum();
    let t0 = Instant::now();
    for s in corpus {
        for i in 0..s.len() {
            exact_posterior(fwd, s, i)?;
        }
    }
    let exact_secs = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    for s in corpus {
        for i in 0..s.len() {
            approx_posterior(fwd, rev, q, s, i)?;
        }
    }
    let approx_secs = t1.elapsed().as_secs_f64().max(1e-9);
    Ok(BenchReport { positions, exact_secs, approx_secs })
}
