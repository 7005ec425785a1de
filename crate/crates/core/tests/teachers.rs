mod common;

use std::collections::HashMap;

use common::{demo_prepared, EXAMPLE_TREE};
use structdistill::corpus::{parse_bracketed, TokenId, Vocabulary, BOS, EOS, MASK, PAD};
use structdistill::nn::TrainConfig;
use structdistill::pipeline::demo_vocabulary;
use structdistill::rng;
use structdistill::teachers::{
    perplexity, sequence_logprob, syntactic_next_word_dist, ForcedTreeLM, LanguageModel, NGramModel, RecurrentConfig,
    RecurrentLM, SyntacticConfig, SyntacticLM, UnigramModel,
};
use structdistill::transitions::{oracle, Direction};

use rand::Rng as _;

// With the vocabulary "a b", a = 5 and b = 6.
const A: TokenId = 5;
const B: TokenId = 6;

#[test]
fn unigram_smoothing() {
    let corpus = vec![vec![A, A, B]];
    let add_one = UnigramModel::train(&corpus, 7, 1.0).unwrap();
    assert!((add_one.prob(A) - 0.6).abs() < 1e-15 && (add_one.prob(B) - 0.4).abs() < 1e-15);
    let mle = UnigramModel::train(&corpus, 7, 0.0).unwrap();
    assert!((mle.prob(A) - 2.0 / 3.0).abs() < 1e-15 && (mle.prob(B) - 1.0 / 3.0).abs() < 1e-15);
    let unseen = UnigramModel::train(&corpus, 8, 0.0).unwrap();
    assert_eq!(unseen.prob(7), 0.0);
}

#[test]
fn unigram_sentence_probability_includes_the_stop() {
    let m = UnigramModel::train(&[vec![A, A, B]], 7, 1.0).unwrap();
    let go = 1.0 - m.stop_prob();
    let want = 2.0 * (0.6 * go).ln() + m.stop_prob().ln();
    assert!((sequence_logprob(&m, &[A, A]).unwrap() - want).abs() < 1e-12);
}

#[test]
fn bigram_maximum_likelihood() {
    let m = NGramModel::train(&[vec![A, B, B, A]], 7, 2, 0.0, Direction::L2R).unwrap();
    let after_a = m.dist(&[BOS, A]);
    let after_b = m.dist(&[BOS, B]);
    assert_eq!((after_a[B], after_a[EOS]), (0.5, 0.5));
    assert_eq!((after_b[B], after_b[A]), (0.5, 0.5));
    assert_eq!(m.dist(&[BOS])[A], 1.0);
}

#[test]
fn order_one_matches_the_unigram_teacher() {
    let data = demo_prepared(31, 200);
    let v = demo_vocabulary().unwrap().len();
    let n1 = NGramModel::train(&data.sentences, v, 1, 0.0, Direction::L2R).unwrap();
    let uni = UnigramModel::train(&data.sentences, v, 0.0).unwrap();
    let a = n1.next_dist(&data.sentences[0][..2]).unwrap();
    let b = uni.next_dist(&[]).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn deterministic_bigram_has_unit_perplexity() {
    let m = NGramModel::train(&[vec![A]], 6, 2, 0.0, Direction::L2R).unwrap();
    assert!((perplexity(&m, &[vec![A]]).unwrap() - 1.0).abs() < 1e-15);
}

#[test]
fn bigram_perplexity_matches_direct_counts() {
    let data = demo_prepared(32, 500);
    let v = demo_vocabulary().unwrap().len();
    let m = NGramModel::train(&data.sentences, v, 2, 0.0, Direction::L2R).unwrap();
    let mut pair: HashMap<(TokenId, TokenId), f64> = HashMap::new();
    let mut hist: HashMap<TokenId, f64> = HashMap::new();
    let padded = |s: &Vec<TokenId>| [&[BOS][..], s, &[EOS]].concat();
    for s in &data.sentences {
        for w in padded(s).windows(2) {
            *pair.entry((w[0], w[1])).or_default() += 1.0;
            *hist.entry(w[0]).or_default() += 1.0;
        }
    }
    let (mut nll, mut count) = (0.0, 0.0);
    for s in &data.sentences {
        for w in padded(s).windows(2) {
            nll -= (pair[&(w[0], w[1])] / hist[&w[0]]).ln();
            count += 1.0;
        }
    }
    let got = perplexity(&m, &data.sentences).unwrap();
    assert!((got - (nll / count).exp()).abs() < 1e-9 * got);
}

fn tiny_recurrent(epochs: usize, seed: u64) -> RecurrentConfig {
    RecurrentConfig {
        embed: 8,
        hidden: 16,
        layers: 1,
        train: TrainConfig { lr: 0.5, epochs, seed, ..Default::default() },
    }
}

#[test]
fn recurrent_overfits_one_sentence() {
    let sent = vec![vec![5, 8, 6, 7, 5]];
    let mut cfg = RecurrentConfig::default();
    cfg.train = TrainConfig { lr: 1.0, decay: 1.0, epochs: 200, ..cfg.train };
    let (_, history) = RecurrentLM::train(&sent, 9, Direction::L2R, &cfg).unwrap();
    assert!(*history.last().unwrap() < 0.05, "final nll {:?}", history.last());
}

#[test]
fn reverse_teacher_equals_forward_teacher_on_reversed_corpus() {
    let corpus = vec![vec![5, 6, 7], vec![7, 8], vec![6, 6, 5, 8]];
    let reversed: Vec<Vec<TokenId>> = corpus.iter().map(|s| s.iter().rev().copied().collect()).collect();
    let cfg = tiny_recurrent(3, 4);
    let (r2l, _) = RecurrentLM::train(&corpus, 9, Direction::R2L, &cfg).unwrap();
    let (l2r, _) = RecurrentLM::train(&reversed, 9, Direction::L2R, &cfg).unwrap();
    for ((na, ta), (nb, tb)) in r2l.params().iter().zip(l2r.params().iter()) {
        assert_eq!(na, nb);
        assert_eq!(ta.data(), tb.data());
    }
    assert_eq!(r2l.next_dist(&[8, 7]).unwrap(), l2r.next_dist(&[8, 7]).unwrap());
}

#[test]
fn recurrent_teacher_beats_unigram_on_held_out_demo_data() {
    let data = demo_prepared(33, 600);
    let (train, test) = data.split(500);
    let v = demo_vocabulary().unwrap().len();
    let (m, _) = RecurrentLM::train(&train.sentences, v, Direction::L2R, &RecurrentConfig::default()).unwrap();
    let uni = UnigramModel::train(&train.sentences, v, 1.0).unwrap();
    let (pm, pu) = (perplexity(&m, &test.sentences).unwrap(), perplexity(&uni, &test.sentences).unwrap());
    assert!(pm < pu, "recurrent {pm} vs unigram {pu}");
}

fn example_vocab() -> Vocabulary {
    Vocabulary::new(["The", "d", "##og", "ba", "##rk", "##s"]).unwrap()
}

#[test]
fn syntactic_teacher_overfits_the_example_tree() {
    let tree = parse_bracketed(EXAMPLE_TREE).unwrap();
    let vocab = example_vocab();
    let mut cfg = SyntacticConfig::default();
    cfg.train = TrainConfig { lr: 4.0, decay: 1.0, epochs: 400, ..cfg.train };
    let (m, _) = SyntacticLM::train(std::slice::from_ref(&tree), &vocab, Direction::L2R, &cfg).unwrap();
    let nll = m.oracle_nll(&tree).unwrap();
    assert!(nll < 0.1, "joint nll {nll}");
    let tokens = vocab.encode(&tree.leaves());
    let dist = syntactic_next_word_dist(&m, &tokens, &tree, 2).unwrap();
    let best = (0..dist.len()).max_by(|&a, &b| dist[a].total_cmp(&dist[b])).unwrap();
    assert_eq!(vocab.token(best), "##og");
}

#[test]
fn syntactic_teacher_never_scores_illegal_actions() {
    let data = demo_prepared(34, 20);
    let vocab = demo_vocabulary().unwrap();
    let cfg =
        SyntacticConfig { embed: 6, hidden: 8, layers: 1, train: TrainConfig { epochs: 1, ..Default::default() } };
    for dir in [Direction::L2R, Direction::R2L] {
        let (m, _) = SyntacticLM::train(&data.syntax, &vocab, dir, &cfg).unwrap();
        for tree in &data.syntax {
            let mut s = m.initial_state();
            for action in oracle(tree, dir).unwrap() {
                let logp = m.action_log_probs(&s).unwrap();
                let legal = s.transition_state().legal_kinds();
                for (k, lp) in logp.iter().enumerate() {
                    if !legal.contains(m.action_at(k).kind()) {
                        assert_eq!(*lp, f64::NEG_INFINITY);
                    }
                }
                let total: f64 = logp.iter().map(|l| l.exp()).sum();
                assert!((total - 1.0).abs() < 1e-9);
                s = m.apply(&s, &action).unwrap();
            }
        }
    }
}

fn check_dist(p: &[f64]) {
    let total: f64 = p.iter().sum();
    assert!((total - 1.0).abs() < 1e-9, "sums to {total}");
    assert!(p[PAD] == 0.0 && p[MASK] == 0.0 && p[BOS] == 0.0);
    assert!(p.iter().all(|x| *x >= 0.0));
}

#[test]
fn next_token_distributions_are_normalized() {
    let data = demo_prepared(35, 300);
    let vocab = demo_vocabulary().unwrap();
    let v = vocab.len();
    let uni = UnigramModel::train(&data.sentences, v, 1.0).unwrap();
    let ngram = NGramModel::train(&data.sentences, v, 3, 0.75, Direction::R2L).unwrap();
    let rec = RecurrentLM::new(v, Direction::L2R, &tiny_recurrent(1, 5)).unwrap();
    let mut r = rng::from_seed(35);
    for _ in 0..1000 {
        let prefix: Vec<TokenId> = (0..r.gen_range(0..8)).map(|_| r.gen_range(5..v)).collect();
        check_dist(&uni.next_dist(&prefix).unwrap());
        check_dist(&ngram.next_dist(&prefix).unwrap());
        check_dist(&rec.next_dist(&prefix).unwrap());
    }
    let cfg =
        SyntacticConfig { embed: 6, hidden: 8, layers: 1, train: TrainConfig { epochs: 1, ..Default::default() } };
    let (syn, _) = SyntacticLM::train(&data.syntax[..50], &vocab, Direction::L2R, &cfg).unwrap();
    for tree in &data.syntax[..50] {
        let forced = ForcedTreeLM::new(&syn, tree).unwrap();
        let leaves = forced.leaves().to_vec();
        for j in 0..=leaves.len() {
            check_dist(&forced.next_dist(&leaves[..j]).unwrap());
        }
    }
}
