use super::tree::{Node, PhraseTree};
use super::vocab::{Vocabulary, CONTINUATION, RESERVED, UNK};
use crate::error::{Error, Result};

/// Greedy longest-match subword tokenizer over a fixed vocabulary.
#[derive(Debug, Clone)]
pub struct Tokenizer<'v> {
    vocab: &'v Vocabulary,
    max_piece_len: usize,
}

impl<'v> Tokenizer<'v> {
    pub const DEFAULT_MAX_PIECE_LEN: usize = 100;

    pub fn new(vocab: &'v Vocabulary) -> Self {
        Tokenizer { vocab, max_piece_len: Self::DEFAULT_MAX_PIECE_LEN }
    }

    pub fn with_max_piece_len(mut self, max: usize) -> Self {
        self.max_piece_len = max.max(1);
        self
    }

    pub fn vocab(&self) -> &'v Vocabulary {
        self.vocab
    }

    fn lookup(&self, piece: &str) -> bool {
        matches!(self.vocab.id(piece), Some(id) if !Vocabulary::is_reserved(id))
    }

    /// Splits a word into pieces. The first piece is bare, later ones carry
    /// the `##` prefix. Falls back to a single `<unk>` when no segmentation exists.
    pub fn tokenize_word(&self, word: &str) -> Vec<String> {
        let unk = || vec![RESERVED[UNK].to_string()];
        let chars: Vec<char> = word.chars().collect();
        if chars.is_empty() {
            return Vec::new();
        }
        let mut pieces = Vec::new();
        let mut start = 0;
        while start < chars.len() {
            let longest = (start + self.max_piece_len).min(chars.len());
            let found = (start + 1..=longest).rev().find_map(|end| {
                let body: String = chars[start..end].iter().collect();
                let piece = if start == 0 { body } else { format!("{CONTINUATION}{body}") };
                self.lookup(&piece).then_some((end, piece))
            });
            match found {
                Some((end, piece)) => {
                    pieces.push(piece);
                    start = end;
                }
                None => return unk(),
            }
        }
        pieces
    }

    /// Removes POS preterminals and wraps every word in a `WORD` node over its pieces.
    ///
    /// Existing `WORD` nodes are kept as they are, so the operation is idempotent.
    pub fn subwordify(&self, tree: &PhraseTree) -> Result<PhraseTree> {
        let mut children = Vec::with_capacity(tree.children.len());
        for child in &tree.children {
            let new = match child {
                Node::Leaf(word) => Node::Tree(self.word_node(word)?),
                Node::Tree(t) if t.is_word() => Node::Tree(t.clone()),
                Node::Tree(t) if t.is_preterminal() => {
                    let word = t.children[0].as_leaf().expect("preterminal child is a leaf");
                    Node::Tree(self.word_node(word)?)
                }
                Node::Tree(t) => Node::Tree(self.subwordify(t)?),
            };
            children.push(new);
        }
        Ok(PhraseTree::new(tree.label.clone(), children))
    }

    fn word_node(&self, word: &str) -> Result<PhraseTree> {
        let pieces = self.tokenize_word(word);
        if pieces.is_empty() {
            return Err(Error::data(format!("word {word:?} tokenized to an empty sequence")));
        }
        Ok(PhraseTree::word(&pieces))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tree::{parse_bracketed, render_bracketed};

    fn vocab() -> Vocabulary {
        Vocabulary::new(["the", "The", "d", "##og", "ba", "##rk", "##s", "a"]).unwrap()
    }

    #[test]
    fn greedy_match_does_not_backtrack() {
        let v = Vocabulary::new(["ba", "bar", "##rk", "##s"]).unwrap();
        assert_eq!(Tokenizer::new(&v).tokenize_word("barks"), vec!["<unk>"]);
    }

    #[test]
    fn wordpiece_splits() {
        let v = vocab();
        let tok = Tokenizer::new(&v);
        assert_eq!(tok.tokenize_word("barks"), vec!["ba", "##rk", "##s"]);
        assert_eq!(tok.tokenize_word("dog"), vec!["d", "##og"]);
        assert_eq!(tok.tokenize_word("qzx"), vec!["<unk>"]);
        // partial match followed by a dead end falls back entirely
        assert_eq!(tok.tokenize_word("dox"), vec!["<unk>"]);
    }

    #[test]
    fn max_piece_len_limits_matches() {
        let v = Vocabulary::new(["abc", "a", "##b", "##c"]).unwrap();
        assert_eq!(Tokenizer::new(&v).tokenize_word("abc"), vec!["abc"]);
        let tok = Tokenizer::new(&v).with_max_piece_len(1);
        assert_eq!(tok.tokenize_word("abc"), vec!["a", "##b", "##c"]);
    }

    #[test]
    fn reserved_entries_never_match() {
        let v = vocab();
        assert_eq!(Tokenizer::new(&v).tokenize_word("<s>"), vec!["<unk>"]);
    }

    #[test]
    fn subwordify_drops_pos() {
        let v = vocab();
        let tok = Tokenizer::new(&v);
        let t = parse_bracketed("(S (NP (DT the) (NN dog)) (VP (VBZ barks)))").unwrap();
        let out = tok.subwordify(&t).unwrap();
        assert_eq!(render_bracketed(&out), "(S (NP (WORD the) (WORD d ##og)) (VP (WORD ba ##rk ##s)))");
        out.validate_augmented().unwrap();
        assert_eq!(tok.subwordify(&out).unwrap(), out);
    }

    #[test]
    fn subwordify_single_word_and_bare_leaves() {
        let v = vocab();
        let tok = Tokenizer::new(&v);
        let t = parse_bracketed("(S (NN dog))").unwrap();
        assert_eq!(render_bracketed(&tok.subwordify(&t).unwrap()), "(S (WORD d ##og))");
        let t = parse_bracketed("(S a)").unwrap();
        assert_eq!(render_bracketed(&tok.subwordify(&t).unwrap()), "(S (WORD a))");
    }
}
