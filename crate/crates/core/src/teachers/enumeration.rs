use std::collections::HashMap;

use super::LanguageModel;
use crate::corpus::vocab::{TokenId, Vocabulary, EOS};
use crate::error::{Error, Result};
use crate::transitions::Direction;

/// Exact left-to-right factorization of a finite distribution over strings.
///
/// Conditionals come from prefix masses; a prefix with no mass yields an
/// all-`-inf` distribution.
/// Sorted continuations of a prefix with their total mass.
type Continuations = (Vec<(TokenId, f64)>, f64);

#[derive(Debug, Clone)]
pub struct EnumerationLM {
    vocab_size: usize,
    next: HashMap<Vec<TokenId>, Continuations>,
}

impl EnumerationLM {
    pub fn new(support: &[(Vec<TokenId>, f64)], vocab_size: usize) -> Result<Self> {
        let mut next: HashMap<Vec<TokenId>, HashMap<TokenId, f64>> = HashMap::new();
        for (seq, p) in support {
            if !(*p >= 0.0 && p.is_finite()) {
                return Err(Error::data(format!("invalid probability {p}")));
            }
            if let Some(&bad) = seq.iter().find(|&&t| t >= vocab_size) {
                return Err(Error::data(format!("token id {bad} outside vocabulary")));
            }
            for j in 0..=seq.len() {
                let tok = seq.get(j).copied().unwrap_or(EOS);
                *next.entry(seq[..j].to_vec()).or_default().entry(tok).or_insert(0.0) += p;
            }
        }
        if next.is_empty() {
            return Err(Error::data("empty support"));
        }
        let next = next
            .into_iter()
            .map(|(k, m)| {
                let mut v: Vec<(TokenId, f64)> = m.into_iter().collect();
                v.sort_by_key(|&(t, _)| t);
                let total = v.iter().map(|&(_, p)| p).sum();
                (k, (v, total))
            })
            .collect();
        Ok(EnumerationLM { vocab_size, next })
    }

    /// Encodes an enumerated string distribution with `vocab`.
    pub fn from_strings(support: &[(Vec<String>, f64)], vocab: &Vocabulary) -> Result<Self> {
        let encoded: Vec<(Vec<TokenId>, f64)> = support.iter().map(|(s, p)| (vocab.encode(s), *p)).collect();
        Self::new(&encoded, vocab.len())
    }
}

impl LanguageModel for EnumerationLM {
    type State = Vec<TokenId>;

    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn direction(&self) -> Direction {
        Direction::L2R
    }

    fn initial(&self) -> Result<Vec<TokenId>> {
        Ok(Vec::new())
    }

    fn advance(&self, state: &Vec<TokenId>, token: TokenId) -> Result<Vec<TokenId>> {
        let mut s = state.clone();
        s.push(token);
        Ok(s)
    }

    fn log_dist(&self, state: &Vec<TokenId>) -> Result<Vec<f64>> {
        let mut out = vec![f64::NEG_INFINITY; self.vocab_size];
        if let Some((entries, total)) = self.next.get(state) {
            for &(t, p) in entries {
                out[t] = (p / total).ln();
            }
        }
        Ok(out)
    }
}
