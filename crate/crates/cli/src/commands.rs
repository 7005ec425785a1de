use std::path::Path;

use anyhow::{Context, Result};
use rand::Rng as _;

use structdistill::corpus::{
    demo_grammar, lexicon_grammar, parse_tree_file, render_bracketed, Pcfg, PhraseTree, Tokenizer, Vocabulary,
};
use structdistill::distill::{
    self, build_dataset, corrupt_corpus, onehot_dataset, render_corruptions, CorruptionConfig, KdBuildConfig,
    KdDataset, KdMode,
};
use structdistill::nn::{Checkpoint, TrainConfig};
use structdistill::pipeline::Prepared;
use structdistill::posterior::{self, estimate, posterior_report, render_dump, Method, Positions, Prior, Teachers};
use structdistill::probe::{self, run_probe, token_ids, ProbeConfig, ProbeDataset, ProbeResult};
use structdistill::student::{self, StudentConfig, StudentModel};
use structdistill::teachers::{
    NGramModel, RecurrentConfig, RecurrentLM, SyntacticConfig, SyntacticLM, TeacherModel, UnigramModel,
};
use structdistill::transitions::{oracle as tree_oracle, render_action_file, Direction};
use structdistill::{rng, Error};

use crate::settings::Settings;

pub fn version_text() -> String {
    format!(
        "structdistill {}\ncheckpoint format {}\ndistillation dataset format {}\ncorruption format {}\nposterior dump format {}\ncontrol map format {}\nprobe file format {}\n",
        env!("CARGO_PKG_VERSION"),
        structdistill::nn::checkpoint::FORMAT_VERSION,
        distill::KD_FORMAT_VERSION,
        distill::CORRUPTION_FORMAT_VERSION,
        posterior::DUMP_FORMAT_VERSION,
        probe::CONTROL_FORMAT_VERSION,
        probe::PROBE_FORMAT_VERSION,
    )
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(Error::from).with_context(|| format!("reading {}", path.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(Error::from).with_context(|| format!("writing {}", path.display()))
}

/// Writes the primary output and the resolved-config echo next to it.
fn write_output(s: &Settings, bytes: &[u8]) -> Result<()> {
    let out = s.path("out")?;
    write_file(&out, bytes)?;
    let mut echo = out.into_os_string();
    echo.push(".config");
    write_file(Path::new(&echo), s.echo().as_bytes())
}

fn load_vocab(s: &Settings) -> Result<Vocabulary> {
    let path = s.path("vocab")?;
    Vocabulary::parse(&read_text(&path)?).with_context(|| format!("parsing {}", path.display()))
}

fn load_trees(path: &Path) -> Result<Vec<PhraseTree>> {
    parse_tree_file(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn load_prepared(s: &Settings, vocab: &Vocabulary) -> Result<Prepared> {
    Ok(Prepared::new(load_trees(&s.path("trees")?)?, vocab)?)
}

fn check_hash(found: &str, vocab: &Vocabulary, path: &Path) -> Result<()> {
    if found != vocab.hash() {
        return Err(anyhow::Error::from(Error::VocabMismatch { expected: vocab.hash(), found: found.to_string() })
            .context(format!("loading {}", path.display())));
    }
    Ok(())
}

fn load_teacher(path: &Path, vocab: &Vocabulary) -> Result<TeacherModel> {
    let bytes = std::fs::read(path).map_err(Error::from).with_context(|| format!("reading {}", path.display()))?;
    if bytes.starts_with(b"structdistill-checkpoint") {
        let ck = Checkpoint::from_bytes(&bytes).with_context(|| format!("parsing {}", path.display()))?;
        check_hash(&ck.vocab_hash, vocab, path)?;
        return Ok(match ck.class.as_str() {
            "recurrent" => TeacherModel::Recurrent(Box::new(RecurrentLM::from_checkpoint(&ck)?)),
            "syntactic" => TeacherModel::Syntactic(Box::new(SyntacticLM::from_checkpoint(&ck, vocab)?)),
            other => return Err(Error::data(format!("{} holds a {other} model, not a teacher", path.display())).into()),
        });
    }
    let text = String::from_utf8(bytes).map_err(|_| Error::data(format!("{} is not a model file", path.display())))?;
    let (model, hash) = if text.contains("model=unigram") {
        let (m, h) = UnigramModel::from_tsv(&text)?;
        (TeacherModel::Unigram(m), h)
    } else {
        let (m, h) = NGramModel::from_tsv(&text).with_context(|| format!("parsing {}", path.display()))?;
        (TeacherModel::NGram(m), h)
    };
    check_hash(&hash, vocab, path)?;
    Ok(model)
}

fn load_optional_teacher(s: &Settings, key: &str, vocab: &Vocabulary) -> Result<Option<TeacherModel>> {
    s.optional_path(key).map(|p| load_teacher(&p, vocab)).transpose()
}

fn load_unigram(s: &Settings, vocab: &Vocabulary) -> Result<Option<UnigramModel>> {
    let Some(path) = s.optional_path("unigram") else { return Ok(None) };
    let (m, hash) =
        UnigramModel::from_tsv(&read_text(&path)?).with_context(|| format!("parsing {}", path.display()))?;
    check_hash(&hash, vocab, &path)?;
    Ok(Some(m))
}

/// Syntactic teachers need the WORD-augmented tree of every sentence.
fn syntax_for<'a>(teachers: &[Option<&TeacherModel>], data: &'a Prepared) -> Option<&'a [PhraseTree]> {
    teachers.iter().flatten().any(|t| t.needs_tree()).then_some(data.syntax.as_slice())
}

fn train_config(s: &Settings) -> Result<TrainConfig> {
    let cfg = TrainConfig {
        lr: s.get("lr")?,
        decay: s.get("decay")?,
        decay_start: s.get("decay-start")?,
        clip: s.get("clip")?,
        epochs: s.get("epochs")?,
        seed: s.get("seed")?,
        dropout: s.get("dropout")?,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn positions(s: &Settings) -> Result<Positions> {
    match s.str("positions") {
        "all" => Ok(Positions::AllInterior),
        "sampled" => Ok(Positions::Sampled { rate: s.get("rate")?, seed: s.get("seed")? }),
        other => Err(Error::invalid(format!("positions must be all or sampled, got {other:?}")).into()),
    }
}

pub fn trees(s: Settings) -> Result<()> {
    let mut trees = load_trees(&s.path("input")?)?;
    if s.get::<bool>("strip")? {
        trees = trees.iter().map(PhraseTree::strip_annotations).collect();
    }
    if s.optional_path("vocab").is_some() {
        let vocab = load_vocab(&s)?;
        let tok = Tokenizer::new(&vocab);
        trees = trees.iter().map(|t| tok.subwordify(t)).collect::<structdistill::Result<_>>()?;
        for (n, t) in trees.iter().enumerate() {
            t.validate_augmented().with_context(|| format!("tree {}", n + 1))?;
        }
    }
    let text: String = trees.iter().map(|t| render_bracketed(t) + "\n").collect();
    write_output(&s, text.as_bytes())
}

fn grammar(s: &Settings) -> Result<Pcfg> {
    let cap: usize = s.get("depth-cap")?;
    Ok(match s.str("grammar") {
        "demo" => demo_grammar().with_depth_cap(cap)?,
        "lexicon" => lexicon_grammar().with_depth_cap(cap)?,
        path => Pcfg::parse(&read_text(Path::new(path))?, cap).with_context(|| format!("parsing {path}"))?,
    })
}

pub fn sample(s: Settings) -> Result<()> {
    let g = grammar(&s)?;
    let trees = g.sample_corpus(s.get("seed")?, s.get("n")?)?;
    if let Some(path) = s.optional_path("vocab-out") {
        write_file(&path, Vocabulary::new(g.terminals())?.render().as_bytes())?;
    }
    let text: String = trees.iter().map(|t| render_bracketed(t) + "\n").collect();
    write_output(&s, text.as_bytes())
}

pub fn oracle(s: Settings) -> Result<()> {
    let dir: Direction = s.get("direction")?;
    let trees = load_trees(&s.path("trees")?)?;
    let acts = trees
        .iter()
        .enumerate()
        .map(|(n, t)| tree_oracle(t, dir).with_context(|| format!("tree {}", n + 1)))
        .collect::<Result<Vec<_>>>()?;
    write_output(&s, render_action_file(dir, &acts).as_bytes())
}

pub fn train_teacher(mut s: Settings) -> Result<()> {
    let kind = s.str("kind").to_string();
    s.fill("epochs", if kind == "syntactic" { 10 } else { 15 });
    let vocab = load_vocab(&s)?;
    let data = load_prepared(&s, &vocab)?;
    let dir: Direction = s.get("direction")?;
    let v = vocab.len();
    let bytes = match kind.as_str() {
        "unigram" => UnigramModel::train(&data.sentences, v, s.get("smoothing")?)?
            .with_direction(dir)
            .to_tsv(&vocab.hash())
            .into_bytes(),
        "ngram" => NGramModel::train(&data.sentences, v, s.get("order")?, s.get("discount")?, dir)?
            .to_tsv(&vocab.hash())
            .into_bytes(),
        "recurrent" => {
            let cfg = RecurrentConfig {
                embed: s.get("embed")?,
                hidden: s.get("hidden")?,
                layers: s.get("layers")?,
                train: train_config(&s)?,
            };
            let (m, history) = RecurrentLM::train(&data.sentences, v, dir, &cfg)?;
            log_history("recurrent", &history);
            m.to_checkpoint(&vocab.hash()).to_bytes()
        }
        "syntactic" => {
            let cfg = SyntacticConfig {
                embed: s.get("embed")?,
                hidden: s.get("hidden")?,
                layers: s.get("layers")?,
                train: train_config(&s)?,
            };
            let (m, history) = SyntacticLM::train(&data.syntax, &vocab, dir, &cfg)?;
            log_history("syntactic", &history);
            m.to_checkpoint().to_bytes()
        }
        other => return Err(Error::invalid(format!("unknown teacher kind {other:?}")).into()),
    };
    write_output(&s, &bytes)
}

fn log_history(what: &str, history: &[f64]) {
    for (e, nll) in history.iter().enumerate() {
        eprintln!("{what} epoch {} nll {nll:.4}", e + 1);
    }
}

struct LoadedTeachers {
    fwd: Option<TeacherModel>,
    rev: Option<TeacherModel>,
    unigram: Option<UnigramModel>,
}

impl LoadedTeachers {
    fn load(s: &Settings, vocab: &Vocabulary) -> Result<Self> {
        Ok(LoadedTeachers {
            fwd: load_optional_teacher(s, "fwd", vocab)?,
            rev: load_optional_teacher(s, "rev", vocab)?,
            unigram: load_unigram(s, vocab)?,
        })
    }

    fn view(&self) -> Teachers<'_> {
        Teachers { fwd: self.fwd.as_ref(), rev: self.rev.as_ref(), unigram: self.unigram.as_ref() }
    }
}

pub fn posterior(s: Settings) -> Result<()> {
    let method: Method = s.get("method")?;
    let vocab = load_vocab(&s)?;
    let data = load_prepared(&s, &vocab)?;
    let loaded = LoadedTeachers::load(&s, &vocab)?;
    let teachers = loaded.view();
    let trees = syntax_for(&[teachers.fwd, teachers.rev], &data);
    let policy = positions(&s)?;
    use rayon::prelude::*;
    let records = data
        .sentences
        .par_iter()
        .enumerate()
        .map(|(sid, tokens)| {
            policy
                .select(sid, tokens.len())
                .into_iter()
                .map(|i| Ok((sid, estimate(method, &teachers, tokens, trees.map(|t| &t[sid]), i)?)))
                .collect::<structdistill::Result<Vec<_>>>()
        })
        .collect::<structdistill::Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect::<Vec<_>>();
    write_output(&s, render_dump(&records, s.get("k")?, &vocab.hash()).as_bytes())
}

pub fn report(s: Settings) -> Result<()> {
    let methods =
        s.str("methods").split(',').map(|m| m.trim().parse()).collect::<structdistill::Result<Vec<Method>>>()?;
    let vocab = load_vocab(&s)?;
    let data = load_prepared(&s, &vocab)?;
    let loaded = LoadedTeachers::load(&s, &vocab)?;
    let teachers = loaded.view();
    let trees = syntax_for(&[teachers.fwd, teachers.rev], &data);
    let rep = posterior_report(&methods, &teachers, &data.sentences, trees, positions(&s)?)?;
    write_output(&s, rep.to_tsv().as_bytes())
}

fn corruption_config(s: &Settings) -> Result<CorruptionConfig> {
    let cfg = CorruptionConfig { rate: s.get("rate")?, mask: s.get("mask")?, random: s.get("random")? };
    cfg.validate()?;
    Ok(cfg)
}

pub fn corrupt(s: Settings) -> Result<()> {
    let vocab = load_vocab(&s)?;
    let data = load_prepared(&s, &vocab)?;
    let cfg = corruption_config(&s)?;
    let records = corrupt_corpus(&data.sentences, vocab.len(), s.get("seed")?, &cfg)?;
    write_output(&s, render_corruptions(&records, &vocab.hash()).as_bytes())
}

pub fn make_kd(s: Settings) -> Result<()> {
    let vocab = load_vocab(&s)?;
    let data = load_prepared(&s, &vocab)?;
    let loaded = LoadedTeachers::load(&s, &vocab)?;
    let teachers = loaded.view();
    let cfg = KdBuildConfig {
        mode: s.get::<KdMode>("mode")?,
        k: s.get("k")?,
        alpha: s.get("alpha")?,
        seed: s.get("seed")?,
        corruption: CorruptionConfig { rate: s.get("rate")?, ..CorruptionConfig::default() },
    };
    let trees = syntax_for(&[teachers.fwd, teachers.rev], &data);
    let ds = build_dataset(&cfg, &teachers, &data.sentences, trees, vocab.len(), &vocab.hash())?;
    eprintln!("make-kd: {} sentences, {} targets", ds.records.len(), ds.num_targets());
    write_output(&s, ds.to_tsv().as_bytes())
}

pub fn train_student(mut s: Settings) -> Result<()> {
    let vocab = load_vocab(&s)?;
    let data = match (s.optional_path("kd"), s.optional_path("trees")) {
        (Some(path), None) => KdDataset::from_tsv(&read_text(&path)?, &vocab.hash())
            .with_context(|| format!("loading {}", path.display()))?,
        (None, Some(_)) => {
            s.fill("alpha", 0);
            let prepared = load_prepared(&s, &vocab)?;
            onehot_dataset(
                &prepared.sentences,
                vocab.len(),
                &vocab.hash(),
                s.get("seed")?,
                &CorruptionConfig::default(),
            )?
        }
        _ => return Err(Error::invalid("train-student needs exactly one of --kd and --trees").into()),
    };
    s.fill("alpha", data.alpha);
    let cfg = StudentConfig {
        embed: s.get("embed")?,
        hidden: s.get("hidden")?,
        layers: s.get("layers")?,
        train: train_config(&s)?,
    };
    let (m, history) = student::train_student(&data, vocab.len(), s.get("alpha")?, &cfg)?;
    log_history("student", &history);
    write_output(&s, &m.to_checkpoint(&vocab.hash()).to_bytes())
}

pub fn probe(s: Settings) -> Result<()> {
    let vocab = load_vocab(&s)?;
    let path = s.path("student")?;
    let ck = Checkpoint::read(&path).with_context(|| format!("loading {}", path.display()))?;
    check_hash(&ck.vocab_hash, &vocab, &path)?;
    let m = StudentModel::from_checkpoint(&ck)?;
    let data = match (s.optional_path("trees"), s.optional_path("data")) {
        (Some(t), None) => ProbeDataset::from_trees(&load_trees(&t)?)?,
        (None, Some(d)) => ProbeDataset::parse(&read_text(&d)?)?,
        _ => return Err(Error::invalid("probe needs exactly one of --trees and --data").into()),
    };
    if let Some(p) = s.optional_path("data-out") {
        write_file(&p, data.render().as_bytes())?;
    }
    let control_seed: u64 = s.get("control-seed")?;
    if let Some(p) = s.optional_path("control-out") {
        write_file(&p, probe::make_control(&data, control_seed)?.render().as_bytes())?;
    }
    let frac: f64 = s.get("train-fraction")?;
    if !(frac > 0.0 && frac < 1.0) {
        return Err(Error::invalid("train-fraction must lie strictly between 0 and 1").into());
    }
    let cut = ((data.len() as f64 * frac).round() as usize).clamp(1, data.len().saturating_sub(1).max(1));
    let (train, test) = (data.slice(0..cut), data.slice(cut..data.len()));
    if test.is_empty() {
        return Err(Error::data("probe data needs at least two sentences").into());
    }
    let cfg = ProbeConfig { lr: s.get("lr")?, epochs: s.get("epochs")?, seed: s.get("seed")? };
    let res = run_probe(s.str("name"), |sent| m.encode(&token_ids(&vocab, sent)), &train, &test, control_seed, &cfg)?;
    write_output(&s, format!("{}{}", ProbeResult::TSV_HEADER, res.tsv_row()).as_bytes())
}

pub fn bench(s: Settings) -> Result<()> {
    let n: usize = s.get("candidates")?;
    let vocab = Vocabulary::new((0..n).map(|i| format!("w{i}")))?;
    let v = vocab.len();
    let seed: u64 = s.get("seed")?;
    let mut r = rng::substream(seed, "bench");
    let length: usize = s.get("length")?;
    let corpus: Vec<Vec<usize>> =
        (0..s.get::<usize>("sentences")?).map(|_| (0..length).map(|_| r.gen_range(5..v)).collect()).collect();
    let cfg = RecurrentConfig {
        embed: s.get("embed")?,
        hidden: s.get("hidden")?,
        layers: 1,
        train: TrainConfig { seed, ..TrainConfig::default() },
    };
    let fwd = RecurrentLM::new(v, Direction::L2R, &cfg)?;
    let rev = RecurrentLM::new(v, Direction::R2L, &cfg)?;
    let q = UnigramModel::train(&corpus, v, 1.0)?;
    let rep = posterior::bench(&fwd, &rev, Prior::Unigram(&q), &corpus)?;
    let text = format!(
        "positions\texact_secs\tapprox_secs\tspeedup\n{}\t{:.6}\t{:.6}\t{:.1}\n",
        rep.positions,
        rep.exact_secs,
        rep.approx_secs,
        rep.speedup()
    );
    write_output(&s, text.as_bytes())
}
