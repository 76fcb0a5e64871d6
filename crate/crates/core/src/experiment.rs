//! End-to-end runs: generate a dataset, train estimators, evaluate them, write reports.
//!
//! Output directory layout:
//!
//! ```text
//! <out>/data/manifest.json, seq_0000.csv, ...
//! <out>/<arch>/checkpoint.json, train_log.csv
//! <out>/report/summary.csv, error_curve_<system>.csv, error_curve_<system>_oor.csv
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::{generate_dataset, load_dataset, model_by_name, save_dataset, Dataset, SystemModel};
use crate::evaluation::{
    evaluate, out_of_region_testset, summary_rows, write_error_curves, write_summary, EvalReport, Estimator,
    SummaryRow, SUMMARY_FILE,
};
use crate::filters::FilterKind;
use crate::networks::{init_params, load_checkpoint, save_checkpoint, Arch, NetworkParams};
use crate::seed::derive;
use crate::training::{preset, train_with, Preset, TrainRecord};
use crate::{Error, Result};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";

/// Number of sequences in every published experiment.
pub const DEFAULT_SEQUENCE_COUNT: usize = 100;

/// Reduced settings that keep a full run within desktop budgets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeskScale {
    pub sequence_count: usize,
    pub sequence_length: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub truncation_window: Option<usize>,
}

/// The desk-scale configuration for `system`.
///
/// Van der Pol keeps the published data size and patience and caps training
/// at 400 epochs. Springs and pendulum are cut further because their
/// sequences are longer.
pub fn desk_scale(system: &str) -> Result<DeskScale> {
    match system {
        "vdp" => Ok(DeskScale {
            sequence_count: 100,
            sequence_length: 300,
            max_epochs: 400,
            patience: 15,
            truncation_window: None,
        }),
        "springs" => Ok(DeskScale {
            sequence_count: 100,
            sequence_length: 500,
            max_epochs: 60,
            patience: 50,
            truncation_window: None,
        }),
        "pendulum" => Ok(DeskScale {
            sequence_count: 100,
            sequence_length: 1000,
            max_epochs: 40,
            patience: 50,
            truncation_window: Some(250),
        }),
        other => Err(Error::UnknownSystem(other.to_string())),
    }
}

/// Training settings that replace the preset values when present.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOverrides {
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub max_epochs: Option<usize>,
    pub patience: Option<usize>,
    pub truncation_window: Option<usize>,
}

impl TrainOverrides {
    fn overlay(self, top: TrainOverrides) -> TrainOverrides {
        TrainOverrides {
            learning_rate: top.learning_rate.or(self.learning_rate),
            batch_size: top.batch_size.or(self.batch_size),
            max_epochs: top.max_epochs.or(self.max_epochs),
            patience: top.patience.or(self.patience),
            truncation_window: top.truncation_window.or(self.truncation_window),
        }
    }
}

/// Partially specified experiment, as read from a JSON config file or from flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub system: Option<String>,
    pub seed: Option<u64>,
    pub sequence_count: Option<usize>,
    pub sequence_length: Option<usize>,
    pub hidden: Option<usize>,
    pub archs: Option<Vec<Arch>>,
    #[serde(default)]
    pub train: TrainOverrides,
    pub out: Option<PathBuf>,
    pub checkpoints: Option<PathBuf>,
    pub desk_scale: Option<bool>,
}

impl SpecFile {
    pub fn load(path: impl AsRef<Path>) -> Result<SpecFile> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::NotFound(path.to_path_buf()));
        }
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::malformed(format!("config {}", path.display()), e))
    }

    /// Fields set in `top` win over fields set in `self`.
    pub fn overlay(self, top: SpecFile) -> SpecFile {
        SpecFile {
            system: top.system.or(self.system),
            seed: top.seed.or(self.seed),
            sequence_count: top.sequence_count.or(self.sequence_count),
            sequence_length: top.sequence_length.or(self.sequence_length),
            hidden: top.hidden.or(self.hidden),
            archs: top.archs.or(self.archs),
            train: self.train.overlay(top.train),
            out: top.out.or(self.out),
            checkpoints: top.checkpoints.or(self.checkpoints),
            desk_scale: top.desk_scale.or(self.desk_scale),
        }
    }

    /// Fill unset fields from the presets of the chosen system.
    pub fn resolve(self) -> Result<ExperimentSpec> {
        let system = self
            .system
            .ok_or_else(|| Error::InvalidConfig("no system given (springs, pendulum or vdp)".into()))?;
        let mut spec = ExperimentSpec::new(&system)?;
        if let Some(desk) = self.desk_scale {
            spec = spec.with_desk_scale(desk)?;
        }
        if let Some(seed) = self.seed {
            spec.seed = seed;
        }
        if let Some(count) = self.sequence_count {
            spec.sequence_count = count;
        }
        if let Some(len) = self.sequence_length {
            spec.sequence_length = len;
        }
        if let Some(h) = self.hidden {
            spec.hidden = h;
        }
        if let Some(archs) = self.archs {
            spec.archs = archs;
        }
        spec.train = self.train;
        if let Some(out) = self.out {
            spec.out = out;
        }
        spec.checkpoints = self.checkpoints;
        spec.validate()?;
        Ok(spec)
    }
}

/// A fully specified experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub system: String,
    pub seed: u64,
    pub sequence_count: usize,
    pub sequence_length: usize,
    pub hidden: usize,
    /// Networks trained by [`cmd_reproduce`].
    pub archs: Vec<Arch>,
    pub train: TrainOverrides,
    pub out: PathBuf,
    /// Where [`cmd_evaluate`] looks for `<arch>/checkpoint.json`; defaults to `out`.
    pub checkpoints: Option<PathBuf>,
    pub desk_scale: bool,
    /// Print progress to standard error.
    pub verbose: bool,
}

impl ExperimentSpec {
    /// Published settings for `system`, seed 0, writing under `runs/<system>`.
    pub fn new(system: &str) -> Result<Self> {
        let model = model_by_name(system)?;
        Ok(ExperimentSpec {
            system: system.to_string(),
            seed: 0,
            sequence_count: DEFAULT_SEQUENCE_COUNT,
            sequence_length: model.default_length,
            hidden: crate::networks::NetworkConfig::DEFAULT_HIDDEN,
            archs: vec![Arch::Jlstm, Arch::Elstm],
            train: TrainOverrides::default(),
            out: PathBuf::from("runs").join(system),
            checkpoints: None,
            desk_scale: false,
            verbose: false,
        })
    }

    /// Switch between published and desk-scale data sizes.
    pub fn with_desk_scale(mut self, desk: bool) -> Result<Self> {
        self.desk_scale = desk;
        if desk {
            let d = desk_scale(&self.system)?;
            self.sequence_count = d.sequence_count;
            self.sequence_length = d.sequence_length;
        } else {
            self.sequence_count = DEFAULT_SEQUENCE_COUNT;
            self.sequence_length = self.model()?.default_length;
        }
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_out(mut self, out: impl Into<PathBuf>) -> Self {
        self.out = out.into();
        self
    }

    pub fn validate(&self) -> Result<()> {
        model_by_name(&self.system)?;
        if self.sequence_count < crate::dynamics::MIN_SEQUENCES {
            return Err(Error::InvalidConfig(format!(
                "sequence count must be at least {}, got {}",
                crate::dynamics::MIN_SEQUENCES,
                self.sequence_count
            )));
        }
        if self.sequence_length == 0 {
            return Err(Error::InvalidConfig("sequence length must be >= 1".into()));
        }
        if self.hidden == 0 {
            return Err(Error::InvalidConfig("hidden size must be >= 1".into()));
        }
        Ok(())
    }

    pub fn model(&self) -> Result<SystemModel> {
        model_by_name(&self.system)
    }

    pub fn data_dir(&self) -> PathBuf {
        self.out.join("data")
    }

    pub fn arch_dir(&self, arch: Arch) -> PathBuf {
        self.out.join(arch.name())
    }

    pub fn report_dir(&self) -> PathBuf {
        self.out.join("report")
    }

    fn checkpoint_path(&self, arch: Arch) -> PathBuf {
        self.checkpoints
            .as_deref()
            .unwrap_or(&self.out)
            .join(arch.name())
            .join(CHECKPOINT_FILE)
    }

    pub fn dataset_seed(&self) -> u64 {
        derive(self.seed, "dataset")
    }

    pub fn oor_seed(&self) -> u64 {
        derive(self.seed, "oor")
    }

    /// Preset for `arch`, then desk scale, then explicit overrides.
    pub fn preset(&self, arch: Arch) -> Result<Preset> {
        let mut p = preset(&self.system, arch, derive(self.seed, "networks"))?;
        p.network.hidden = self.hidden;
        if self.desk_scale {
            let d = desk_scale(&self.system)?;
            p.train.max_epochs = d.max_epochs;
            p.train.patience = d.patience;
            p.train.truncation_window = d.truncation_window;
        }
        let o = &self.train;
        if let Some(v) = o.learning_rate {
            p.train.learning_rate = v;
        }
        if let Some(v) = o.batch_size {
            p.train.batch_size = v;
        }
        if let Some(v) = o.max_epochs {
            p.train.max_epochs = v;
        }
        if let Some(v) = o.patience {
            p.train.patience = v;
        }
        if let Some(v) = o.truncation_window {
            p.train.truncation_window = Some(v);
        }
        Ok(p)
    }

    fn progress(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }
}

/// An estimator named on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorChoice {
    Filter(FilterKind),
    Network(Arch),
}

impl FromStr for EstimatorChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "kf" => Ok(EstimatorChoice::Filter(FilterKind::Kf)),
            "ekf" => Ok(EstimatorChoice::Filter(FilterKind::Ekf)),
            other => other
                .parse::<Arch>()
                .map(EstimatorChoice::Network)
                .map_err(|_| Error::InvalidConfig(format!("unknown estimator `{s}` (kf, ekf, ern, jrn, elstm, jlstm)"))),
        }
    }
}

/// Simulate the dataset and write it to `<out>/data`.
pub fn cmd_generate(spec: &ExperimentSpec) -> Result<Dataset> {
    spec.validate()?;
    let model = spec.model()?;
    let data = generate_dataset(&model, spec.sequence_length, spec.sequence_count, spec.dataset_seed())?;
    save_dataset(&data, spec.data_dir())?;
    spec.progress(format!(
        "{}: {} sequences of length {} (train {}, val {}, test {}) in {}",
        model.name,
        data.count(),
        data.length,
        data.train.len(),
        data.val.len(),
        data.test.len(),
        spec.data_dir().display()
    ));
    Ok(data)
}

#[derive(Serialize)]
struct LogRow {
    epoch: usize,
    train_loss: f64,
    val_loss: f64,
    seconds_elapsed: f64,
}

fn load_spec_dataset(spec: &ExperimentSpec) -> Result<Dataset> {
    let data = load_dataset(spec.data_dir())?;
    if data.system.name != spec.system {
        return Err(Error::DimensionMismatch(format!(
            "dataset in {} is for `{}`, expected `{}`",
            spec.data_dir().display(),
            data.system.name,
            spec.system
        )));
    }
    Ok(data)
}

/// Train `arch` on the dataset in `<out>/data`.
///
/// Writes `train_log.csv` as epochs finish and rewrites the checkpoint
/// whenever validation loss improves.
pub fn cmd_train(spec: &ExperimentSpec, arch: Arch) -> Result<(NetworkParams, TrainRecord)> {
    let data = load_spec_dataset(spec)?;
    train_on(spec, &data, arch)
}

fn train_on(spec: &ExperimentSpec, data: &Dataset, arch: Arch) -> Result<(NetworkParams, TrainRecord)> {
    let Preset { network, train } = spec.preset(arch)?;
    let network = network.with_initial_estimate(data.region.centroid().as_slice().to_vec());
    let dir = spec.arch_dir(arch);
    fs::create_dir_all(&dir)?;
    let checkpoint = dir.join(CHECKPOINT_FILE);
    let mut log = csv::Writer::from_path(dir.join(TRAIN_LOG_FILE))?;
    spec.progress(format!(
        "training {arch} on {}: lr {}, batch {}, max {} epochs, patience {}",
        spec.system, train.learning_rate, train.batch_size, train.max_epochs, train.patience
    ));
    let result = train_with(data, init_params(&network)?, &train, |r| {
        log.serialize(LogRow {
            epoch: r.epoch,
            train_loss: r.train_loss,
            val_loss: r.val_loss,
            seconds_elapsed: r.elapsed,
        })?;
        log.flush()?;
        if r.improved {
            save_checkpoint(r.params, &checkpoint)?;
        }
        if r.epoch % 10 == 0 || r.improved {
            spec.progress(format!(
                "{arch} epoch {:>5}  train {:.6}  val {:.6}{}",
                r.epoch,
                r.train_loss,
                r.val_loss,
                if r.improved { "  *" } else { "" }
            ));
        }
        Ok(())
    });
    let (params, record) = result?;
    spec.progress(format!(
        "{arch}: best val {:.6} at epoch {}, stopped at {}, {:.1} s",
        record.best_val_loss, record.best_epoch, record.stopped_epoch, record.seconds
    ));
    Ok((params, record))
}

/// In-region and optional out-of-region reports with the summary rows written to disk.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: EvalReport,
    pub oor: Option<EvalReport>,
    pub rows: Vec<SummaryRow>,
}

fn last_log_seconds(path: &Path) -> Result<Option<f64>> {
    if !path.exists() {
        return Ok(None);
    }
    let mut last = None;
    for row in csv::Reader::from_path(path)?.records() {
        let row = row?;
        last = row.get(3).and_then(|s| s.parse::<f64>().ok());
    }
    Ok(last)
}

/// Score the chosen estimators on the test split, and on a fresh
/// out-of-region test set when `oor` is set.
pub fn cmd_evaluate(spec: &ExperimentSpec, estimators: &[EstimatorChoice], oor: bool) -> Result<Evaluation> {
    let data = load_spec_dataset(spec)?;
    evaluate_on(spec, &data, estimators, oor)
}

fn evaluate_on(spec: &ExperimentSpec, data: &Dataset, choices: &[EstimatorChoice], oor: bool) -> Result<Evaluation> {
    if choices.is_empty() {
        return Err(Error::InvalidConfig("no estimators to evaluate".into()));
    }
    let model = &data.system;
    let mut estimators = Vec::with_capacity(choices.len());
    let mut train_seconds = Vec::new();
    for choice in choices {
        match *choice {
            EstimatorChoice::Filter(FilterKind::Kf) => estimators.push(Estimator::Kf),
            EstimatorChoice::Filter(FilterKind::Ekf) => estimators.push(Estimator::Ekf),
            EstimatorChoice::Network(arch) => {
                let path = spec.checkpoint_path(arch);
                let params = load_checkpoint(&path)?;
                if params.arch() != arch {
                    return Err(Error::Malformed {
                        what: format!("checkpoint {}", path.display()),
                        reason: format!("holds a {} network, expected {arch}", params.arch()),
                    });
                }
                let log = path.with_file_name(TRAIN_LOG_FILE);
                if let Some(s) = last_log_seconds(&log)? {
                    train_seconds.push((arch.name().to_string(), s));
                }
                estimators.push(Estimator::Network(Box::new(params)));
            }
        }
    }
    let report = evaluate(model, &data.test, &estimators)?;
    let oor_report = if oor {
        let region = model
            .oor_region
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig(format!("system `{}` has no out-of-region box", model.name)))?;
        let set = out_of_region_testset(model, region, data.length, data.test.len(), spec.oor_seed())?;
        Some(evaluate(model, &set, &estimators)?)
    } else {
        None
    };
    let dir = spec.report_dir();
    fs::create_dir_all(&dir)?;
    write_error_curves(&report, dir.join(format!("error_curve_{}.csv", model.name)))?;
    if let Some(r) = &oor_report {
        write_error_curves(r, dir.join(format!("error_curve_{}_oor.csv", model.name)))?;
    }
    let rows = summary_rows(&report, oor_report.as_ref(), &train_seconds);
    write_summary(&rows, dir.join(SUMMARY_FILE))?;
    for row in &rows {
        spec.progress(format!(
            "{:<6} nmse {:.6}{}  test {:.3} s",
            row.estimator,
            row.nmse,
            row.nmse_oor.map(|v| format!("  oor {v:.6}")).unwrap_or_default(),
            row.test_seconds
        ));
    }
    Ok(Evaluation {
        report,
        oor: oor_report,
        rows,
    })
}

/// Everything a full run produced.
#[derive(Debug, Clone)]
pub struct Reproduction {
    pub dataset: Dataset,
    pub trained: Vec<(Arch, NetworkParams, TrainRecord)>,
    pub evaluation: Evaluation,
}

/// Generate, train every network in `spec.archs`, then evaluate them next to
/// the matching filter, in and out of the training region.
pub fn cmd_reproduce(spec: &ExperimentSpec) -> Result<Reproduction> {
    let dataset = cmd_generate(spec)?;
    let mut trained = Vec::with_capacity(spec.archs.len());
    for &arch in &spec.archs {
        let (params, record) = train_on(spec, &dataset, arch)?;
        trained.push((arch, params, record));
    }
    let mut choices = vec![EstimatorChoice::Filter(FilterKind::for_model(&dataset.system))];
    choices.extend(spec.archs.iter().map(|&a| EstimatorChoice::Network(a)));
    let with_oor = dataset.system.oor_region.is_some();
    let evaluation = evaluate_on(spec, &dataset, &choices, with_oor)?;
    Ok(Reproduction {
        dataset,
        trained,
        evaluation,
    })
}

/// Run `f` on a dedicated pool of `threads` workers, or the global pool when `None`.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::InvalidConfig("--threads must be >= 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("cannot start {n} worker threads: {e}")))?;
            Ok(pool.install(f))
        }
    }
}
