//! Command-line entry point.

mod commands;
mod settings;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};

pub use settings::{parse_config_text, read_config_file, Settings, RUN_KEYS};

#[derive(Debug, Parser)]
#[command(
    name = "jointlabel",
    version,
    about = "Joint sentence and token labeling"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write `model.ckpt` and `history.csv` to the output directory.
    Train(CommonArgs),
    /// Print sentence and token metrics of a checkpoint on a labeled file.
    Eval(CommonArgs),
    /// Write sentence scores and per-token attention scores as TSV.
    Predict(CommonArgs),
    /// Token-annotation fraction sweep; writes `sweep.csv`.
    Sweep(CommonArgs),
    /// Objective ablation; writes `ablation.csv`.
    Ablate(CommonArgs),
    /// Generate the synthetic trigger corpus as `train.tsv`, `dev.tsv`, `test.tsv`.
    Synth(CommonArgs),
    /// Finite-difference gradient check of the joint objective on a tiny model.
    Gradcheck(CommonArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::Predict(_) => "predict",
            Command::Sweep(_) => "sweep",
            Command::Ablate(_) => "ablate",
            Command::Synth(_) => "synth",
            Command::Gradcheck(_) => "gradcheck",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Train(a)
            | Command::Eval(a)
            | Command::Predict(a)
            | Command::Sweep(a)
            | Command::Ablate(a)
            | Command::Synth(a)
            | Command::Gradcheck(a) => a,
        }
    }
}

/// Flags shared by every command. Each named flag is shorthand for the
/// `--set` key of the same name.
#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one setting; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Input file for `eval` and `predict`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Pretrained word vectors, one `word v1 .. vd` line per word.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Comma-separated seeds for `sweep` and `ablate`.
    #[arg(long)]
    pub seeds: Option<String>,
    /// Comma-separated annotation fractions for `sweep`.
    #[arg(long)]
    pub fractions: Option<String>,
    /// Comma-separated variant names for `ablate`.
    #[arg(long)]
    pub variants: Option<String>,
    /// Loss-weight preset: `joint` or `baseline`.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long = "max-epochs")]
    pub max_epochs: Option<usize>,
}

impl CommonArgs {
    fn flag_settings(&self) -> Result<BTreeMap<String, String>> {
        let mut out = BTreeMap::new();
        let mut put = |k: &str, v: String| -> Result<()> {
            if out.insert(k.to_string(), v).is_some() {
                return Err(Error::config(format!("setting `{k}` given more than once")));
            }
            Ok(())
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let named = [
            ("seed", self.seed.map(|s| s.to_string())),
            ("out", path(&self.out)),
            ("train", path(&self.train)),
            ("dev", path(&self.dev)),
            ("test", path(&self.test)),
            ("data", path(&self.data)),
            ("embeddings", path(&self.embeddings)),
            ("checkpoint", path(&self.checkpoint)),
            ("seeds", self.seeds.clone()),
            ("fractions", self.fractions.clone()),
            ("variants", self.variants.clone()),
            ("preset", self.preset.clone()),
            ("max_epochs", self.max_epochs.map(|m| m.to_string())),
        ];
        for (k, v) in named {
            if let Some(v) = v {
                put(k, v)?;
            }
        }
        for item in &self.set {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::config(format!("--set expects KEY=VALUE, got {item:?}")))?;
            put(k.trim(), v.trim().to_string())?;
        }
        Ok(out)
    }

    /// File settings overridden by flag settings.
    pub fn settings(&self) -> Result<Settings> {
        let file = match &self.config {
            Some(p) => read_config_file(p)?,
            None => BTreeMap::new(),
        };
        Settings::resolve(file, self.flag_settings()?)
    }
}

/// Process exit code for an error: 2 for missing inputs and invalid
/// configuration, 3 for training divergence, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::MissingFile { .. } | Error::Config(_) => 2,
        Error::Divergence(_) => 3,
        _ => 1,
    }
}

pub fn execute(command: &Command) -> Result<i32> {
    let settings = command.args().settings()?;
    match command {
        Command::Train(_) => commands::train(&settings),
        Command::Eval(_) => commands::eval(&settings),
        Command::Predict(_) => commands::predict(&settings),
        Command::Sweep(_) => commands::sweep(&settings),
        Command::Ablate(_) => commands::ablate(&settings),
        Command::Synth(_) => commands::synth(&settings),
        Command::Gradcheck(_) => commands::gradcheck(&settings),
    }
}

/// Parses `argv` and runs the command, returning the process exit code.
/// Failures print a one-line diagnostic on stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("jointlabel {}: {e}", cli.command.name());
            exit_code(&e)
        }
    }
}
