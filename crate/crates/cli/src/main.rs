//! Command-line driver for the structure-distillation pipeline.

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use settings::Settings;

/// Declares a subcommand's flags and their defaults from one list. Every
/// flag is also a config-file key.
macro_rules! command_args {
    ($(#[$meta:meta])* $name:ident { $($field:ident : $key:literal = $default:literal, $help:literal;)* }) => {
        $(#[$meta])*
        #[derive(Debug, Args)]
        pub struct $name {
            $(
                #[arg(long = $key, help = $help, value_name = "VALUE")]
                pub $field: Option<String>,
            )*
        }

        impl $name {
            pub const DEFAULTS: &'static [(&'static str, &'static str)] = &[$(($key, $default)),*];

            pub fn flags(&self) -> Vec<(&'static str, Option<&str>)> {
                vec![$(($key, self.$field.as_deref())),*]
            }
        }
    };
}

command_args!(TreesArgs {
    input: "input" = "", "bracketed tree file";
    vocab: "vocab" = "", "vocabulary; when set, words are split into pieces under WORD nodes";
    strip: "strip" = "false", "drop grammar annotations such as NP_s -> NP";
    out: "out" = "", "output tree file";
});

command_args!(SampleArgs {
    grammar: "grammar" = "demo", "demo, lexicon, or a grammar file";
    n: "n" = "1000", "number of trees";
    seed: "seed" = "42", "random seed";
    depth_cap: "depth-cap" = "5", "maximum derivation depth";
    vocab_out: "vocab-out" = "", "also write the grammar's vocabulary here";
    out: "out" = "", "output tree file";
});

command_args!(OracleArgs {
    trees: "trees" = "", "WORD-augmented tree file";
    direction: "direction" = "l2r", "l2r or r2l";
    out: "out" = "", "output action file";
});

command_args!(TrainTeacherArgs {
    kind: "kind" = "recurrent", "unigram, ngram, recurrent or syntactic";
    direction: "direction" = "l2r", "l2r or r2l";
    trees: "trees" = "", "training trees";
    vocab: "vocab" = "", "vocabulary file";
    order: "order" = "3", "n-gram order";
    discount: "discount" = "0.75", "n-gram absolute discount";
    smoothing: "smoothing" = "1", "unigram add-k constant";
    embed: "embed" = "32", "embedding width";
    hidden: "hidden" = "64", "LSTM width";
    layers: "layers" = "1", "LSTM layers";
    lr: "lr" = "0.5", "initial learning rate";
    decay: "decay" = "0.92", "learning-rate decay factor";
    decay_start: "decay-start" = "10", "first decayed epoch (1-based)";
    clip: "clip" = "5", "global gradient-norm clip";
    dropout: "dropout" = "0", "dropout rate";
    epochs: "epochs" = "", "training epochs (15 recurrent, 10 syntactic)";
    seed: "seed" = "1", "random seed";
    out: "out" = "", "output model file";
});

command_args!(PosteriorArgs {
    method: "method" = "ug", "exact, uf, ug, moe, l2r or r2l";
    fwd: "fwd" = "", "left-to-right teacher";
    rev: "rev" = "", "right-to-left teacher";
    unigram: "unigram" = "", "unigram prior";
    trees: "trees" = "", "evaluation trees";
    vocab: "vocab" = "", "vocabulary file";
    k: "k" = "64", "pairs kept per position";
    positions: "positions" = "all", "all or sampled";
    rate: "rate" = "0.15", "sampling rate for sampled positions";
    seed: "seed" = "1", "random seed for sampled positions";
    out: "out" = "", "output dump";
});

command_args!(ReportArgs {
    methods: "methods" = "moe,uf,ug,exact", "comma-separated methods, one row each";
    fwd: "fwd" = "", "left-to-right teacher";
    rev: "rev" = "", "right-to-left teacher";
    unigram: "unigram" = "", "unigram prior";
    trees: "trees" = "", "evaluation trees";
    vocab: "vocab" = "", "vocabulary file";
    positions: "positions" = "all", "all or sampled";
    rate: "rate" = "0.15", "sampling rate for sampled positions";
    seed: "seed" = "1", "random seed for sampled positions";
    out: "out" = "", "output report";
});

command_args!(CorruptArgs {
    trees: "trees" = "", "tree file";
    vocab: "vocab" = "", "vocabulary file";
    seed: "seed" = "7", "random seed";
    rate: "rate" = "0.15", "selection probability";
    mask: "mask" = "0.8", "share of selected positions masked";
    random: "random" = "0.1", "share of selected positions replaced at random";
    out: "out" = "", "output file";
});

command_args!(MakeKdArgs {
    mode: "mode" = "ug", "l2r, r2l, uf, ug, seq or none";
    fwd: "fwd" = "", "left-to-right teacher";
    rev: "rev" = "", "right-to-left teacher";
    unigram: "unigram" = "", "unigram prior";
    trees: "trees" = "", "training trees";
    vocab: "vocab" = "", "vocabulary file";
    k: "k" = "64", "targets kept per position";
    alpha: "alpha" = "0.5", "default interpolation weight recorded in the dataset";
    seed: "seed" = "1", "corruption seed";
    rate: "rate" = "0.15", "selection probability";
    out: "out" = "", "output dataset";
});

command_args!(TrainStudentArgs {
    kd: "kd" = "", "distillation dataset";
    trees: "trees" = "", "raw trees for teacher-free training (instead of --kd)";
    vocab: "vocab" = "", "vocabulary file";
    alpha: "alpha" = "", "interpolation weight (defaults to the dataset's)";
    embed: "embed" = "32", "embedding width";
    hidden: "hidden" = "64", "LSTM width per direction";
    layers: "layers" = "1", "LSTM layers per direction";
    lr: "lr" = "0.5", "initial learning rate";
    decay: "decay" = "0.92", "learning-rate decay factor";
    decay_start: "decay-start" = "10", "first decayed epoch (1-based)";
    clip: "clip" = "5", "global gradient-norm clip";
    dropout: "dropout" = "0", "dropout rate";
    epochs: "epochs" = "10", "training epochs";
    seed: "seed" = "1", "random seed";
    out: "out" = "", "output checkpoint";
});

command_args!(ProbeArgs {
    student: "student" = "", "student checkpoint";
    trees: "trees" = "", "held-out derivation trees with grammar annotations";
    data: "data" = "", "token/LABEL probe file (instead of --trees)";
    vocab: "vocab" = "", "vocabulary file";
    name: "name" = "student", "model name in the report";
    control_seed: "control-seed" = "3", "seed of the control labels";
    train_fraction: "train-fraction" = "0.5", "share of sentences used to fit the probe";
    lr: "lr" = "0.1", "probe learning rate";
    epochs: "epochs" = "50", "probe epochs";
    seed: "seed" = "1", "probe shuffling seed";
    control_out: "control-out" = "", "also write the control map here";
    data_out: "data-out" = "", "also write the probe file here";
    out: "out" = "", "output report";
});

command_args!(BenchArgs {
    candidates: "candidates" = "200", "number of non-reserved tokens";
    length: "length" = "20", "sentence length";
    sentences: "sentences" = "3", "number of sentences";
    embed: "embed" = "32", "teacher embedding width";
    hidden: "hidden" = "64", "teacher LSTM width";
    seed: "seed" = "1", "random seed";
    out: "out" = "", "output report";
});

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse, validate and normalize bracketed trees.
    Trees(TreesArgs),
    /// Sample a treebank from a grammar.
    Sample(SampleArgs),
    /// Write transition oracles for every tree.
    Oracle(OracleArgs),
    /// Train a teacher language model.
    TrainTeacher(TrainTeacherArgs),
    /// Dump posterior distributions at every position.
    Posterior(PosteriorArgs),
    /// Posterior NLL and perplexity per method.
    Report(ReportArgs),
    /// Apply the masking protocol.
    Corrupt(CorruptArgs),
    /// Build a distillation dataset.
    MakeKd(MakeKdArgs),
    /// Train the masked-LM student.
    TrainStudent(TrainStudentArgs),
    /// Probe student encodings against a control task.
    Probe(ProbeArgs),
    /// Time exact against approximate posteriors.
    Bench(BenchArgs),
}

#[derive(Debug, Parser)]
#[command(
    name = "structdistill",
    about = "Distill syntactic structure into a small masked language model",
    disable_version_flag = true
)]
struct Cli {
    /// key = value file applied before command-line flags.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads (0 = one per core). Never changes outputs.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    /// Print the program and file-format versions.
    #[arg(long)]
    version: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

fn settings(
    name: &'static str,
    defaults: &[(&str, &str)],
    flags: &[(&str, Option<&str>)],
    config: Option<&PathBuf>,
) -> structdistill::Result<Settings> {
    let mut s = Settings::new(name, defaults);
    if let Some(path) = config {
        s.merge_file(path)?;
    }
    s.apply_flags(flags)?;
    Ok(s)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global()?;
    let cfg = cli.config.as_ref();
    let Some(command) = cli.command else {
        return Err(structdistill::Error::invalid("no subcommand given; see --help").into());
    };
    match command {
        Command::Trees(a) => commands::trees(settings("trees", TreesArgs::DEFAULTS, &a.flags(), cfg)?),
        Command::Sample(a) => commands::sample(settings("sample", SampleArgs::DEFAULTS, &a.flags(), cfg)?),
        Command::Oracle(a) => commands::oracle(settings("oracle", OracleArgs::DEFAULTS, &a.flags(), cfg)?),
        Command::TrainTeacher(a) => {
            commands::train_teacher(settings("train-teacher", TrainTeacherArgs::DEFAULTS, &a.flags(), cfg)?)
        }
        Command::Posterior(a) => commands::posterior(settings("posterior", PosteriorArgs::DEFAULTS, &a.flags(), cfg)?),
        Command::Report(a) => commands::report(settings("report", ReportArgs::DEFAULTS, &a.flags(), cfg)?),
        Command::Corrupt(a) => commands::corrupt(settings("corrupt", CorruptArgs::DEFAULTS, &a.flags(), cfg)?),
        Command::MakeKd(a) => commands::make_kd(settings("make-kd", MakeKdArgs::DEFAULTS, &a.flags(), cfg)?),
        Command::TrainStudent(a) => {
            commands::train_student(settings("train-student", TrainStudentArgs::DEFAULTS, &a.flags(), cfg)?)
        }
        Command::Probe(a) => commands::probe(settings("probe", ProbeArgs::DEFAULTS, &a.flags(), cfg)?),
        Command::Bench(a) => commands::bench(settings("bench", BenchArgs::DEFAULTS, &a.flags(), cfg)?),
    }
}

/// 1 usage, 2 data, 3 numerical.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<structdistill::Error>() {
            return if e.is_usage() {
                1
            } else if e.is_numerical() {
                3
            } else {
                2
            };
        }
        if cause.downcast_ref::<rayon::ThreadPoolBuildError>().is_some() {
            return 1;
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if cli.version {
        print!("{}", commands::version_text());
        return ExitCode::SUCCESS;
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
