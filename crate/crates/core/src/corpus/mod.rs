//! Treebank and corpus ingestion.

pub mod pcfg;
pub mod tokenizer;
pub mod tree;
pub mod vocab;

pub use pcfg::{demo_grammar, lexicon_grammar, Pcfg, PcfgSampler, Rhs, Rule};
pub use tokenizer::Tokenizer;
pub use tree::{parse_bracketed, parse_tree_file, render_bracketed, Node, PhraseTree, WORD_LABEL};
pub use vocab::{TokenId, Vocabulary, BOS, EOS, MASK, NUM_RESERVED, PAD, UNK};
