//! Autoregressive teacher language models.
//!
//! Every teacher reads tokens in its own direction: an R2L teacher's prefix
//! is the right context, reversed. Distributions always span the full
//! vocabulary; `<pad>`, `<mask>` and `<s>` carry zero mass.

mod enumeration;
mod ngram;
mod recurrent;
mod syntactic;
mod unigram;

pub use enumeration::EnumerationLM;
pub use ngram::NGramModel;
pub use recurrent::{RecurrentConfig, RecurrentLM};
pub use syntactic::{
    syntactic_next_word_dist, ForcedTreeLM, ForcedTreeState, SyntacticConfig, SyntacticLM, SyntacticState,
};
pub use unigram::UnigramModel;

use crate::corpus::vocab::{TokenId, BOS, EOS, MASK, PAD, UNK};
use crate::error::{Error, Result};
use crate::nn::log_sum_exp;
use crate::transitions::Direction;

/// Tokens a teacher can emit: `<unk>`, `</s>` and every non-reserved id.
pub fn predictable_ids(vocab_size: usize) -> Vec<TokenId> {
    let mut ids = vec![UNK, EOS];
    ids.extend(crate::corpus::vocab::NUM_RESERVED..vocab_size);
    ids
}

/// True for ids no teacher may ever predict.
pub fn is_unpredictable(id: TokenId) -> bool {
    matches!(id, PAD | MASK | BOS)
}

/// A left-to-right factorization in the model's own reading order.
pub trait LanguageModel: Sync {
    type State: Clone + Send + Sync;

    fn vocab_size(&self) -> usize;

    fn direction(&self) -> Direction;

    /// State after the implicit `<s>`.
    fn initial(&self) -> Result<Self::State>;

    fn advance(&self, state: &Self::State, token: TokenId) -> Result<Self::State>;

    /// Log-probabilities of the next token over the full vocabulary.
    fn log_dist(&self, state: &Self::State) -> Result<Vec<f64>>;

    fn state_after(&self, prefix: &[TokenId]) -> Result<Self::State> {
        let mut s = self.initial()?;
        for &t in prefix {
            s = self.advance(&s, t)?;
        }
        Ok(s)
    }

    /// Next-token distribution after `prefix`, in probability space.
    fn next_dist(&self, prefix: &[TokenId]) -> Result<Vec<f64>> {
        let logp = self.log_dist(&self.state_after(prefix)?)?;
        let p: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::numerical(format!("next-token distribution sums to {total} after prefix {prefix:?}")));
        }
        Ok(p)
    }
}

/// Log-probability of a left-to-right sentence, read in the teacher's
/// direction, including the terminating `</s>`.
pub fn sequence_logprob<T: LanguageModel + ?Sized>(t: &T, tokens: &[TokenId]) -> Result<f64> {
    let oriented = t.direction().orient(tokens);
    let mut state = t.initial()?;
    let mut total = 0.0;
    for (j, &tok) in oriented.iter().chain(std::iter::once(&EOS)).enumerate() {
        let lp = t.log_dist(&state)?[tok];
        if lp == f64::NEG_INFINITY {
            return Err(Error::numerical(format!("token {tok} at position {j} has zero probability")));
        }
        total += lp;
        if j < oriented.len() {
            state = t.advance(&state, tok)?;
        }
    }
    Ok(total)
}

/// `exp` of the mean per-token negative log-likelihood, `</s>` counted as a token.
pub fn perplexity<T: LanguageModel + ?Sized>(t: &T, corpus: &[Vec<TokenId>]) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::data("perplexity of an empty corpus"));
    }
    let mut nll = 0.0;
    let mut count = 0usize;
    for sent in corpus {
        nll -= sequence_logprob(t, sent)?;
        count += sent.len() + 1;
    }
    Ok((nll / count as f64).exp())
}

/// Normalizes log-scores over the predictable set, leaving the rest at `-inf`.
pub(crate) fn normalize_log(scores: &mut [f64]) -> Result<()> {
    let lse = log_sum_exp(scores);
    if !lse.is_finite() {
        return Err(Error::numerical("distribution has no finite mass"));
    }
    scores.iter_mut().for_each(|s| *s -= lse);
    Ok(())
}

/// A teacher loaded from disk, without any per-sentence binding.
#[derive(Debug, Clone)]
pub enum TeacherModel {
    Unigram(UnigramModel),
    NGram(NGramModel),
    Recurrent(Box<RecurrentLM>),
    Syntactic(Box<SyntacticLM>),
}

impl TeacherModel {
    pub fn kind(&self) -> &'static str {
        match self {
            TeacherModel::Unigram(_) => "unigram",
            TeacherModel::NGram(_) => "ngram",
            TeacherModel::Recurrent(_) => "recurrent",
            TeacherModel::Syntactic(_) => "syntactic",
        }
    }

    pub fn direction(&self) -> Direction {
        match self {
            TeacherModel::Unigram(m) => m.direction(),
            TeacherModel::NGram(m) => m.direction(),
            TeacherModel::Recurrent(m) => m.direction(),
            TeacherModel::Syntactic(m) => m.direction(),
        }
    }

    pub fn needs_tree(&self) -> bool {
        matches!(self, TeacherModel::Syntactic(_))
    }

    /// Binds the teacher to one sentence. Syntactic teachers need that sentence's tree.
    pub fn bind<'a>(&'a self, tree: Option<&crate::corpus::PhraseTree>) -> Result<BoundTeacher<'a>> {
        Ok(match self {
            TeacherModel::Unigram(m) => BoundTeacher::Unigram(m),
            TeacherModel::NGram(m) => BoundTeacher::NGram(m),
            TeacherModel::Recurrent(m) => BoundTeacher::Recurrent(m),
            TeacherModel::Syntactic(m) => {
                let tree = tree.ok_or_else(|| Error::invalid("syntactic teacher needs a tree for every sentence"))?;
                BoundTeacher::Forced(ForcedTreeLM::new(m, tree)?)
            }
        })
    }
}

/// A teacher ready to score one sentence.
#[derive(Debug, Clone)]
pub enum BoundTeacher<'a> {
    Unigram(&'a UnigramModel),
    NGram(&'a NGramModel),
    Recurrent(&'a RecurrentLM),
    Forced(ForcedTreeLM<'a>),
}

#[derive(Debug, Clone)]
pub enum BoundState {
    Unigram(()),
    NGram(<NGramModel as LanguageModel>::State),
    Recurrent(<RecurrentLM as LanguageModel>::State),
    Forced(ForcedTreeState),
}

macro_rules! dispatch {
    ($self:expr, $m:ident => $body:expr) => {
        match $self {
            BoundTeacher::Unigram($m) => $body,
            BoundTeacher::NGram($m) => $body,
            BoundTeacher::Recurrent($m) => $body,
            BoundTeacher::Forced($m) => $body,
        }
    };
}

fn state_mismatch() -> Error {
    Error::invalid("state belongs to a different teacher")
}

impl LanguageModel for BoundTeacher<'_> {
    type State = BoundState;

    fn vocab_size(&self) -> usize {
        dispatch!(self, m => m.vocab_size())
    }

    fn direction(&self) -> Direction {
        dispatch!(self, m => m.direction())
    }

    fn initial(&self) -> Result<BoundState> {
        Ok(match self {
            BoundTeacher::Unigram(m) => BoundState::Unigram(m.initial()?),
            BoundTeacher::NGram(m) => BoundState::NGram(m.initial()?),
            BoundTeacher::Recurrent(m) => BoundState::Recurrent(m.initial()?),
            BoundTeacher::Forced(m) => BoundState::Forced(m.initial()?),
        })
    }

    fn advance(&self, state: &BoundState, token: TokenId) -> Result<BoundState> {
        Ok(match (self, state) {
            (BoundTeacher::Unigram(m), BoundState::Unigram(s)) => BoundState::Unigram(m.advance(s, token)?),
            (BoundTeacher::NGram(m), BoundState::NGram(s)) => BoundState::NGram(m.advance(s, token)?),
            (BoundTeacher::Recurrent(m), BoundState::Recurrent(s)) => BoundState::Recurrent(m.advance(s, token)?),
            (BoundTeacher::Forced(m), BoundState::Forced(s)) => BoundState::Forced(m.advance(s, token)?),
            _ => return Err(state_mismatch()),
        })
    }

    fn log_dist(&self, state: &BoundState) -> Result<Vec<f64>> {
        match (self, state) {
            (BoundTeacher::Unigram(m), BoundState::Unigram(s)) => m.log_dist(s),
            (BoundTeacher::NGram(m), BoundState::NGram(s)) => m.log_dist(s),
            (BoundTeacher::Recurrent(m), BoundState::Recurrent(s)) => m.log_dist(s),
            (BoundTeacher::Forced(m), BoundState::Forced(s)) => m.log_dist(s),
            _ => Err(state_mismatch()),
        }
    }
}
