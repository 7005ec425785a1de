use std::collections::HashMap;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type TokenId = usize;

pub const PAD: TokenId = 0;
pub const UNK: TokenId = 1;
pub const MASK: TokenId = 2;
pub const BOS: TokenId = 3;
pub const EOS: TokenId = 4;
/// Number of reserved ids at the start of every vocabulary.
pub const NUM_RESERVED: usize = 5;

pub const RESERVED: [&str; NUM_RESERVED] = ["<pad>", "<unk>", "<mask>", "<s>", "</s>"];

/// Prefix marking a word-internal continuation piece.
pub const CONTINUATION: &str = "##";

/// An ordered token inventory. Ids are positions; the first five are reserved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    entries: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Vocabulary {
    /// Builds a vocabulary from non-reserved entries, keeping their order.
    pub fn new<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut entries: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        entries.extend(tokens.into_iter().map(Into::into));
        Self::from_entries(entries)
    }

    /// Builds a vocabulary from the full entry list, reserved prefix included.
    pub fn from_entries(entries: Vec<String>) -> Result<Self> {
        if entries.len() < NUM_RESERVED {
            return Err(Error::data("vocabulary is missing the reserved prefix"));
        }
        for (id, expected) in RESERVED.iter().enumerate() {
            if entries[id] != *expected {
                return Err(Error::data(format!(
                    "vocabulary line {} must be {expected}, found {:?}",
                    id + 1,
                    entries[id]
                )));
            }
        }
        let mut index = HashMap::with_capacity(entries.len());
        for (id, tok) in entries.iter().enumerate() {
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(Error::data(format!("invalid vocabulary entry {tok:?} at id {id}")));
            }
            if index.insert(tok.clone(), id).is_some() {
                return Err(Error::data(format!("duplicate vocabulary entry {tok:?}")));
            }
        }
        Ok(Vocabulary { entries, index })
    }

    /// Collects token types in order of first appearance.
    pub fn from_corpus<'a, I>(sentences: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut seen = std::collections::HashSet::new();
        let mut order = Vec::new();
        for sent in sentences {
            for tok in sent {
                if RESERVED.contains(&tok.as_str()) {
                    continue;
                }
                if seen.insert(tok.clone()) {
                    order.push(tok.clone());
                }
            }
        }
        Self::new(order)
    }

    /// Parses a vocabulary file: one token per line, id = line index.
    pub fn parse(text: &str) -> Result<Self> {
        let entries = text.lines().map(|l| l.trim_end_matches('\r').to_string()).filter(|l| !l.is_empty()).collect();
        Self::from_entries(entries)
    }

    pub fn render(&self) -> String {
        let mut out = self.entries.join("\n");
        out.push('\n');
        out
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.len() == NUM_RESERVED
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn id_or_unk(&self, token: &str) -> TokenId {
        self.id(token).unwrap_or(UNK)
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.entries[id]
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn is_reserved(id: TokenId) -> bool {
        id < NUM_RESERVED
    }

    /// Ids of all non-reserved tokens: the candidate set for posteriors and the student's output space.
    pub fn candidates(&self) -> std::ops::Range<TokenId> {
        NUM_RESERVED..self.entries.len()
    }

    pub fn num_candidates(&self) -> usize {
        self.entries.len() - NUM_RESERVED
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<TokenId> {
        tokens.iter().map(|t| self.id_or_unk(t.as_ref())).collect()
    }

    pub fn decode(&self, ids: &[TokenId]) -> Vec<String> {
        ids.iter().map(|&i| self.entries[i].clone()).collect()
    }

    /// Short content hash used to tie data files to the vocabulary they were built with.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        for e in &self.entries {
            hasher.update(e.as_bytes());
            hasher.update(b"\n");
        }
        hex::encode(hasher.finalize())[..16].to_string()
    }

    pub fn check_hash(&self, found: &str) -> Result<()> {
        let expected = self.hash();
        if expected != found {
            return Err(Error::VocabMismatch { expected, found: found.to_string() });
        }
        Ok(())
    }
}
