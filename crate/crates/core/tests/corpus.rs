mod common;

use std::collections::HashMap;

use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use common::{check_golden, demo_tree, EXAMPLE_TREE};
use structdistill::corpus::vocab::CONTINUATION;
use structdistill::corpus::{
    demo_grammar, lexicon_grammar, parse_bracketed, parse_tree_file, render_bracketed, Node, Pcfg, PhraseTree,
    Tokenizer, Vocabulary, UNK, WORD_LABEL,
};
use structdistill::pipeline::demo_vocabulary;
use structdistill::Error;

#[test]
fn example_tree_parses_and_renders_verbatim() {
    let t = parse_bracketed(EXAMPLE_TREE).unwrap();
    assert_eq!(t.leaves(), ["The", "d", "##og", "ba", "##rk", "##s"]);
    assert_eq!(t.children.len(), 2);
    assert_eq!(render_bracketed(&t), EXAMPLE_TREE);
    t.validate_augmented().unwrap();
}

#[test]
fn unbalanced_input_reports_offset() {
    match parse_bracketed("(S (NP") {
        Err(Error::Parse { offset, .. }) => assert_eq!(offset, 7),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn sampled_corpora_round_trip_through_text() {
    for grammar in [demo_grammar(), lexicon_grammar()] {
        let trees = grammar.sample_corpus(5, 500).unwrap();
        let text: String = trees.iter().map(|t| render_bracketed(t) + "\n").collect();
        assert_eq!(parse_tree_file(&text).unwrap(), trees);
    }
}

fn labels_above_words(t: &PhraseTree, out: &mut Vec<String>) {
    if t.is_word() || t.is_preterminal() {
        return;
    }
    out.push(t.label.clone());
    for c in &t.children {
        if let Node::Tree(sub) = c {
            labels_above_words(sub, out);
        }
    }
}

#[test]
fn subwordify_keeps_phrase_labels_and_word_order() {
    let vocab = demo_vocabulary().unwrap();
    let tok = Tokenizer::new(&vocab);
    for t in demo_grammar().sample_corpus(6, 300).unwrap() {
        let t = t.strip_annotations();
        let aug = tok.subwordify(&t).unwrap();
        aug.validate_augmented().unwrap();
        let (mut before, mut after) = (Vec::new(), Vec::new());
        labels_above_words(&t, &mut before);
        labels_above_words(&aug, &mut after);
        before.sort();
        after.sort();
        assert_eq!(before, after);
        let words: Vec<String> = collect_words(&aug);
        assert_eq!(words, t.leaves());
        assert_eq!(tok.subwordify(&aug).unwrap(), aug, "augmentation is idempotent");
    }
}

fn collect_words(t: &PhraseTree) -> Vec<String> {
    if t.label == WORD_LABEL {
        return vec![t.leaves().iter().map(|p| p.trim_start_matches(CONTINUATION)).collect()];
    }
    t.children.iter().filter_map(Node::as_tree).flat_map(collect_words).collect()
}

#[test]
fn pos_layer_is_replaced_by_word_nodes() {
    let vocab = Vocabulary::new(["the", "d", "##og", "ba", "##rk", "##s"]).unwrap();
    let tok = Tokenizer::new(&vocab);
    let t = parse_bracketed("(S (NP (DT the) (NN dog)) (VP (VBZ barks)))").unwrap();
    let want = "(S (NP (WORD the) (WORD d ##og)) (VP (WORD ba ##rk ##s)))";
    assert_eq!(render_bracketed(&tok.subwordify(&t).unwrap()), want);
    let single = parse_bracketed("(S (NN dog))").unwrap();
    assert_eq!(render_bracketed(&tok.subwordify(&single).unwrap()), "(S (WORD d ##og))");
}

fn fuzz_vocab() -> Vocabulary {
    Vocabulary::new(["a", "b", "ab", "##a", "##b", "##ba", "c", "##c"]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn tokenized_pieces_concatenate_to_the_word(word in "[abcd]{1,8}") {
        let vocab = fuzz_vocab();
        let tok = Tokenizer::new(&vocab);
        let pieces = tok.tokenize_word(&word);
        if !pieces.iter().any(|p| vocab.id_or_unk(p) == UNK) {
            let joined: String = pieces.iter().map(|p| p.trim_start_matches(CONTINUATION)).collect();
            prop_assert_eq!(joined, word);
            prop_assert!(pieces[1..].iter().all(|p| p.starts_with(CONTINUATION)));
        }
    }
}

#[test]
fn seed_42_demo_tree_is_stable() {
    let t = demo_tree();
    assert_eq!(t, demo_tree());
    check_golden("demo_seed42.tree", &(render_bracketed(&t) + "\n"));
}

#[test]
fn enumeration_is_a_distribution() {
    let support = demo_grammar().enumerate().unwrap();
    let total: f64 = support.iter().map(|s| s.1).sum();
    assert!((total - 1.0).abs() < 1e-12, "total {total}");
    for (words, p) in &support {
        assert!(*p > 0.0);
        assert!(words.iter().all(|w| w != "<s>" && w != "</s>"));
    }
}

#[test]
fn toy_grammar_frequencies() {
    let g = Pcfg::parse("S -> A B 1\nA -> \"a\" 0.5\nA -> \"b\" 0.5\nB -> \"c\" 1\n", 5).unwrap();
    let trees = g.sample_corpus(3, 10_000).unwrap();
    let ac = trees.iter().filter(|t| t.leaves() == ["a", "c"]).count() as f64 / 1e4;
    assert!((0.48..=0.52).contains(&ac), "frequency {ac}");
}

#[test]
fn sampler_matches_enumeration_chi_square() {
    let grammar = demo_grammar();
    let support = grammar.enumerate().unwrap();
    let mut expected: HashMap<Vec<String>, f64> = HashMap::new();
    for (w, p) in support {
        *expected.entry(w).or_insert(0.0) += p;
    }
    let n = 100_000;
    let mut observed: HashMap<Vec<String>, f64> = HashMap::new();
    for t in grammar.sample_corpus(11, n).unwrap() {
        *observed.entry(t.leaves().iter().map(|s| s.to_string()).collect()).or_insert(0.0) += 1.0;
    }
    assert!(observed.keys().all(|k| expected.contains_key(k)), "sampled a string outside the support");
    // Cells with small expected counts are pooled.
    let (mut stat, mut cells, mut pooled_o, mut pooled_e) = (0.0, 0usize, 0.0, 0.0);
    for (k, p) in &expected {
        let e = p * n as f64;
        let o = observed.get(k).copied().unwrap_or(0.0);
        if e < 5.0 {
            pooled_o += o;
            pooled_e += e;
        } else {
            stat += (o - e).powi(2) / e;
            cells += 1;
        }
    }
    if pooled_e > 0.0 {
        stat += (pooled_o - pooled_e).powi(2) / pooled_e;
        cells += 1;
    }
    let p_value = 1.0 - ChiSquared::new((cells - 1) as f64).unwrap().cdf(stat);
    assert!(p_value > 0.001, "chi-square {stat:.1} over {cells} cells, p = {p_value:.2e}");
}
