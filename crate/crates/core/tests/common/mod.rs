//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use structdistill::corpus::{demo_grammar, PhraseTree};
use structdistill::pipeline::{demo_vocabulary, Prepared};

pub const EXAMPLE_TREE: &str = "(S (NP (WORD The) (WORD d ##og)) (VP (WORD ba ##rk ##s)))";

pub fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

/// Compares against a recorded file. Set `UPDATE_GOLDEN=1` to re-record.
pub fn check_golden(name: &str, actual: &str) {
    let path = golden_path(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("missing golden {}: {e}", path.display()));
    assert_eq!(actual, expected, "golden file {name} differs");
}

pub fn demo_tree() -> PhraseTree {
    demo_grammar().sample(42).unwrap()
}

pub fn demo_prepared(seed: u64, n: usize) -> Prepared {
    Prepared::new(demo_grammar().sample_corpus(seed, n).unwrap(), &demo_vocabulary().unwrap()).unwrap()
}
