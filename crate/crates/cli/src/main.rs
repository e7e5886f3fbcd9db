//! `s2i`: sound-to-image translation toolkit.
//!
//! Every subcommand shares one flat key namespace (see config.rs); clap only
//! routes the subcommand and hands the raw `--key value` tokens through.
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use clap::{Args, Parser, Subcommand};
use s2i_core::error::S2iError;

mod config;
mod data;
mod evalcmd;
mod inspect;
mod train;
mod translate;

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (", env!("S2I_GIT_DESCRIBE"), ")");

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation: unknown key, unparsable value, missing required key.
    Usage(String),
    /// The invocation was fine but the work failed.
    Runtime(String),
}

impl From<S2iError> for CliError {
    fn from(e: S2iError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Early validation of key values maps core config rejections to exit 2.
pub fn usage(e: S2iError) -> CliError {
    CliError::Usage(e.to_string())
}

/// One `event=... k=v ...` line on stderr; values with spaces are quoted.
pub fn log(event: &str, fields: &[(&str, String)]) {
    let mut line = format!("event={event}");
    for (k, v) in fields {
        if v.is_empty() || v.contains(' ') || v.contains('"') || v.contains('=') {
            let _ = write!(line, " {k}={v:?}");
        } else {
            let _ = write!(line, " {k}={v}");
        }
    }
    eprintln!("{line}");
}

/// Every run directory records what produced it: the effective key set and
/// a git-describable version string.
pub fn write_run_preamble(dir: &Path, r: &config::Resolved) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.txt"), r.echo())?;
    fs::write(dir.join("version.txt"), format!("s2i {VERSION}\n"))?;
    Ok(())
}

#[derive(Parser)]
#[command(name = "s2i", version = VERSION, about = "sound-to-image translation toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
#[command(disable_help_flag = true)]
struct Kv {
    /// --key value pairs; run with --help for the key table
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    kv: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic audiovisual corpus with scene-disjoint splits
    SynthData(Kv),
    /// Precompute normalized log-mel spectrograms and normalization stats
    Featurize(Kv),
    /// Train the spectrogram autoencoder
    TrainAe(Kv),
    /// Train the embedding-conditioned translator adversarially
    TrainGan(Kv),
    /// Train translators across embedding widths
    Sweep(Kv),
    /// Translate one sound into images
    Translate(Kv),
    /// Train per-class informativity classifiers
    TrainClf(Kv),
    /// Score held-out translations with classifiers and templates
    Eval(Kv),
    /// Summarize training ledgers into masked, smoothed reports
    Metrics(Kv),
    /// Print network architectures and parameter counts
    Describe(Kv),
    /// Check analytic gradients against finite differences
    Gradcheck(Kv),
}

type CmdFn = fn(&mut config::Resolved) -> Result<(), CliError>;

fn dispatch(name: &str, about: &str, tokens: &[String], f: CmdFn) -> Result<(), CliError> {
    if config::wants_help(tokens) {
        config::print_key_help(name, about);
        return Ok(());
    }
    let mut resolved = config::resolve(tokens)?;
    f(&mut resolved)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::SynthData(a) => dispatch(
            "synth-data",
            "generate a synthetic audiovisual corpus with scene-disjoint splits",
            &a.kv,
            data::synth_data,
        ),
        Cmd::Featurize(a) => dispatch(
            "featurize",
            "precompute normalized log-mel spectrograms and normalization stats",
            &a.kv,
            data::featurize,
        ),
        Cmd::TrainAe(a) => dispatch(
            "train-ae",
            "train the spectrogram autoencoder",
            &a.kv,
            train::train_ae,
        ),
        Cmd::TrainGan(a) => dispatch(
            "train-gan",
            "train the embedding-conditioned translator adversarially",
            &a.kv,
            train::train_gan_cmd,
        ),
        Cmd::Sweep(a) => dispatch(
            "sweep",
            "train translators across embedding widths",
            &a.kv,
            train::sweep,
        ),
        Cmd::Translate(a) => dispatch(
            "translate",
            "translate one sound into images",
            &a.kv,
            translate::translate,
        ),
        Cmd::TrainClf(a) => dispatch(
            "train-clf",
            "train per-class informativity classifiers",
            &a.kv,
            evalcmd::train_clf,
        ),
        Cmd::Eval(a) => dispatch(
            "eval",
            "score held-out translations with classifiers and templates",
            &a.kv,
            evalcmd::eval,
        ),
        Cmd::Metrics(a) => dispatch(
            "metrics",
            "summarize training ledgers into masked, smoothed reports",
            &a.kv,
            evalcmd::metrics,
        ),
        Cmd::Describe(a) => dispatch(
            "describe",
            "print network architectures and parameter counts",
            &a.kv,
            inspect::describe,
        ),
        Cmd::Gradcheck(a) => dispatch(
            "gradcheck",
            "check analytic gradients against finite differences",
            &a.kv,
            inspect::gradcheck_cmd,
        ),
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(CliError::Usage(msg)) => {
            log("error", &[("kind", "usage".into()), ("msg", msg)]);
            std::process::exit(2);
        }
        Err(CliError::Runtime(msg)) => {
            log("error", &[("kind", "runtime".into()), ("msg", msg)]);
            std::process::exit(1);
        }
    }
}
