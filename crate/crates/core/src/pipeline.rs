//! Glue shared by the command line and end-to-end runs.

use crate::corpus::{demo_grammar, lexicon_grammar, PhraseTree, TokenId, Tokenizer, Vocabulary};
use crate::error::Result;

/// Every terminal of the shipped grammar, in rule order.
pub fn demo_vocabulary() -> Result<Vocabulary> {
    Vocabulary::new(demo_grammar().terminals())
}

pub fn lexicon_vocabulary() -> Result<Vocabulary> {
    Vocabulary::new(lexicon_grammar().terminals())
}

/// A sampled corpus in the three views the pipeline needs.
#[derive(Debug, Clone)]
pub struct Prepared {
    /// Derivations with grammar annotations, used for probe labels.
    pub derivations: Vec<PhraseTree>,
    /// Token ids of every sentence.
    pub sentences: Vec<Vec<TokenId>>,
    /// Annotation-free, WORD-augmented trees for syntactic teachers.
    pub syntax: Vec<PhraseTree>,
}

impl Prepared {
    pub fn new(derivations: Vec<PhraseTree>, vocab: &Vocabulary) -> Result<Self> {
        let tok = Tokenizer::new(vocab);
        let sentences = derivations.iter().map(|t| vocab.encode(&t.leaves())).collect();
        let syntax = derivations.iter().map(|t| tok.subwordify(&t.strip_annotations())).collect::<Result<_>>()?;
        Ok(Prepared { derivations, sentences, syntax })
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// First `n` sentences and the rest.
    pub fn split(&self, n: usize) -> (Prepared, Prepared) {
        let n = n.min(self.len());
        let part = |r: std::ops::Range<usize>| Prepared {
            derivations: self.derivations[r.clone()].to_vec(),
            sentences: self.sentences[r.clone()].to_vec(),
            syntax: self.syntax[r].to_vec(),
        };
        (part(0..n), part(n..self.len()))
    }
}
