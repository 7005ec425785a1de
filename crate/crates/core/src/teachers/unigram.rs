use super::ngram::{parse_count_tsv, render_count_tsv, CountTable};
use super::LanguageModel;
use crate::corpus::vocab::{TokenId, EOS, NUM_RESERVED, UNK};
use crate::error::{Error, Result};
use crate::transitions::Direction;

/// Add-k smoothed unigram distribution `q` over the non-reserved vocabulary.
///
/// Used as a teacher, it emits `</s>` with the corpus stop rate and scales
/// `q` by the remaining mass, so it is context-free.
#[derive(Debug, Clone, PartialEq)]
pub struct UnigramModel {
    counts: Vec<u64>,
    sentences: u64,
    k: f64,
    q: Vec<f64>,
    stop: f64,
    direction: Direction,
}

impl UnigramModel {
    pub const DEFAULT_K: f64 = 1.0;

    pub fn train(corpus: &[Vec<TokenId>], vocab_size: usize, k: f64) -> Result<Self> {
        let mut counts = vec![0u64; vocab_size];
        for sent in corpus {
            for &t in sent {
                if t >= vocab_size {
                    return Err(Error::data(format!("token id {t} outside vocabulary of {vocab_size}")));
                }
                if t < NUM_RESERVED && t != UNK {
                    return Err(Error::data(format!("reserved token id {t} inside a training sentence")));
                }
                counts[t] += 1;
            }
        }
        Self::from_counts(counts, corpus.len() as u64, k)
    }

    fn from_counts(counts: Vec<u64>, sentences: u64, k: f64) -> Result<Self> {
        if !(k >= 0.0 && k.is_finite()) {
            return Err(Error::invalid(format!("smoothing constant must be non-negative, got {k}")));
        }
        let vocab_size = counts.len();
        if vocab_size <= NUM_RESERVED {
            return Err(Error::data("vocabulary has no non-reserved tokens"));
        }
        let n: u64 = counts[NUM_RESERVED..].iter().sum();
        if n == 0 || sentences == 0 {
            return Err(Error::data("cannot train a unigram model on an empty corpus"));
        }
        let denom = n as f64 + k * (vocab_size - NUM_RESERVED) as f64;
        let mut q = vec![0.0; vocab_size];
        for w in NUM_RESERVED..vocab_size {
            q[w] = (counts[w] as f64 + k) / denom;
        }
        let stop = sentences as f64 / (n + sentences) as f64;
        Ok(UnigramModel { counts, sentences, k, q, stop, direction: Direction::L2R })
    }

    /// Labels the model as reading in `direction`. A context-free model
    /// scores identically either way.
    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    /// `q` over the full vocabulary; reserved ids are zero.
    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn prob(&self, w: TokenId) -> f64 {
        self.q[w]
    }

    pub fn stop_prob(&self) -> f64 {
        self.stop
    }

    pub fn smoothing(&self) -> f64 {
        self.k
    }

    pub fn to_tsv(&self, vocab_hash: &str) -> String {
        let mut table = CountTable::new();
        for (w, &c) in self.counts.iter().enumerate() {
            if c > 0 {
                table.insert((Vec::new(), w), c);
            }
        }
        let header = [
            ("model", "unigram".to_string()),
            ("vocab", vocab_hash.to_string()),
            ("vocab_size", self.counts.len().to_string()),
            ("k", self.k.to_string()),
            ("sentences", self.sentences.to_string()),
            ("direction", self.direction.to_string()),
        ];
        render_count_tsv(&header, &table)
    }

    /// Parses a model written by [`to_tsv`](Self::to_tsv); returns it with its vocabulary hash.
    pub fn from_tsv(text: &str) -> Result<(Self, String)> {
        let (header, table) = parse_count_tsv(text)?;
        header.expect("model", "unigram")?;
        let vocab_size: usize = header.parse("vocab_size")?;
        let mut counts = vec![0u64; vocab_size];
        for ((hist, w), c) in table {
            if !hist.is_empty() || w >= vocab_size {
                return Err(Error::data(format!("bad unigram entry for token {w}")));
            }
            counts[w] = c;
        }
        let model = Self::from_counts(counts, header.parse("sentences")?, header.parse("k")?)?
            .with_direction(header.parse("direction")?);
        Ok((model, header.get("vocab")?.to_string()))
    }
}

impl LanguageModel for UnigramModel {
    type State = ();

    fn vocab_size(&self) -> usize {
        self.q.len()
    }

    fn direction(&self) -> Direction {
        self.direction
    }

    fn initial(&self) -> Result<()> {
        Ok(())
    }

    fn advance(&self, _state: &(), _token: TokenId) -> Result<()> {
        Ok(())
    }

    fn log_dist(&self, _state: &()) -> Result<Vec<f64>> {
        let go = (1.0 - self.stop).ln();
        let mut out: Vec<f64> = self.q.iter().map(|&p| if p > 0.0 { p.ln() + go } else { f64::NEG_INFINITY }).collect();
        for r in out.iter_mut().take(NUM_RESERVED) {
            *r = f64::NEG_INFINITY;
        }
        out[EOS] = self.stop.ln();
        Ok(out)
    }
}
