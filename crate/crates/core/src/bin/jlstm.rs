use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use jlstm::experiment::{
    cmd_evaluate, cmd_generate, cmd_reproduce, cmd_train, with_threads, EstimatorChoice, ExperimentSpec, SpecFile,
    TrainOverrides,
};
use jlstm::filters::FilterKind;
use jlstm::networks::Arch;
use jlstm::{Error, Result};

/// Recurrent state estimators against Kalman filters on noisy dynamical systems.
#[derive(Parser)]
#[command(name = "jlstm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a dataset into <out>/data.
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Train one network on <out>/data.
    Train {
        #[command(flatten)]
        common: Common,
        /// ern, jrn, elstm or jlstm.
        #[arg(long)]
        arch: Arch,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Score filters and trained networks on the test split.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Comma-separated list of kf, ekf, ern, jrn, elstm, jlstm.
        #[arg(long, value_delimiter = ',')]
        estimators: Option<Vec<EstimatorChoice>>,
        /// Also score a fresh test set drawn outside the training region.
        #[arg(long)]
        oor: bool,
        /// Directory holding <arch>/checkpoint.json (default: --out).
        #[arg(long)]
        checkpoints: Option<PathBuf>,
    },
    /// Generate, train JLSTM and ELSTM, and evaluate against the filter.
    Reproduce {
        /// springs, pendulum or vdp (same as --system).
        #[arg(value_name = "SYSTEM")]
        target: Option<String>,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        train: TrainFlags,
        /// Networks to train, comma-separated.
        #[arg(long, value_delimiter = ',')]
        archs: Option<Vec<Arch>>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    system: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: runs/<system>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON experiment file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Use the reduced desk-scale configuration.
    #[arg(long)]
    desk_scale: bool,
    #[arg(long)]
    sequence_count: Option<usize>,
    #[arg(long)]
    sequence_length: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    /// No progress output.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Args)]
struct TrainFlags {
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    truncation_window: Option<usize>,
}

impl From<TrainFlags> for TrainOverrides {
    fn from(f: TrainFlags) -> Self {
        TrainOverrides {
            learning_rate: f.learning_rate,
            batch_size: f.batch_size,
            max_epochs: f.max_epochs,
            patience: f.patience,
            truncation_window: f.truncation_window,
        }
    }
}

fn resolve(common: &Common, mut flags: SpecFile) -> Result<ExperimentSpec> {
    let base = match &common.config {
        Some(path) => SpecFile::load(path)?,
        None => SpecFile::default(),
    };
    flags.system = flags.system.or_else(|| common.system.clone());
    flags.seed = common.seed;
    flags.out = common.out.clone();
    flags.sequence_count = common.sequence_count;
    flags.sequence_length = common.sequence_length;
    flags.hidden = common.hidden;
    flags.desk_scale = common.desk_scale.then_some(true);
    let mut spec = base.overlay(flags).resolve()?;
    spec.verbose = !common.quiet;
    Ok(spec)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate { common } => {
            let spec = resolve(&common, SpecFile::default())?;
            with_threads(common.threads, || cmd_generate(&spec))??;
        }
        Command::Train { common, arch, train } => {
            let flags = SpecFile {
                train: train.into(),
                ..SpecFile::default()
            };
            let spec = resolve(&common, flags)?;
            with_threads(common.threads, || cmd_train(&spec, arch))??;
        }
        Command::Evaluate {
            common,
            estimators,
            oor,
            checkpoints,
        } => {
            let flags = SpecFile {
                checkpoints,
                ..SpecFile::default()
            };
            let spec = resolve(&common, flags)?;
            let choices = match estimators {
                Some(list) => list,
                None => {
                    let filter = FilterKind::for_model(&spec.model()?);
                    vec![
                        EstimatorChoice::Filter(filter),
                        EstimatorChoice::Network(Arch::Jlstm),
                        EstimatorChoice::Network(Arch::Elstm),
                    ]
                }
            };
            with_threads(common.threads, || cmd_evaluate(&spec, &choices, oor))??;
        }
        Command::Reproduce {
            target,
            common,
            train,
            archs,
        } => {
            if let (Some(a), Some(b)) = (&target, &common.system) {
                if a != b {
                    return Err(Error::InvalidConfig(format!("system given twice: `{a}` and `{b}`")));
                }
            }
            let flags = SpecFile {
                system: target,
                archs,
                train: train.into(),
                ..SpecFile::default()
            };
            let spec = resolve(&common, flags)?;
            with_threads(common.threads, || cmd_reproduce(&spec))??;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
