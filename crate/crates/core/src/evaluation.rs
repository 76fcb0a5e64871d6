//! Error curves, NMSE, timed roll-outs and report files.

use std::path::Path;
use std::time::Instant;

use nalgebra::DVector;
use serde::Serialize;

use crate::dynamics::{generate_many, Region, SystemModel, Trajectory};
use crate::filters::{run_filter, FilterKind};
use crate::networks::{estimate_sequence, NetworkParams};
use crate::{Error, Result};

pub const SUMMARY_FILE: &str = "summary.csv";

fn check_shapes(truths: &[&[DVector<f64>]], estimates: &[Vec<DVector<f64>>]) -> Result<(usize, usize)> {
    if truths.is_empty() || truths.len() != estimates.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} true sequences against {} estimated",
            truths.len(),
            estimates.len()
        )));
    }
    let len = truths[0].len();
    let n = truths[0].first().map_or(0, |x| x.len());
    if len == 0 || n == 0 {
        return Err(Error::ShapeMismatch("sequences must be non-empty".into()));
    }
    for (x, e) in truths.iter().zip(estimates) {
        if x.len() != len || e.len() != len {
            return Err(Error::ShapeMismatch(format!(
                "sequence lengths differ: expected {len}, got {} and {}",
                x.len(),
                e.len()
            )));
        }
        if x.iter().chain(e).any(|v| v.len() != n) {
            return Err(Error::ShapeMismatch(format!("state vectors must all have length {n}")));
        }
    }
    Ok((len, n))
}

/// Squared estimation error at each step, averaged over sequences.
///
/// `truths[i][t]` is compared against `estimates[i][t]`; all sequences must
/// share one length and state dimension.
pub fn error_curve(truths: &[&[DVector<f64>]], estimates: &[Vec<DVector<f64>>]) -> Result<Vec<f64>> {
    let (len, _) = check_shapes(truths, estimates)?;
    let mut curve = vec![0.0; len];
    for (x, e) in truths.iter().zip(estimates) {
        for (acc, (xt, et)) in curve.iter_mut().zip(x.iter().zip(e)) {
            *acc += (xt - et).norm_squared();
        }
    }
    let inv = 1.0 / truths.len() as f64;
    curve.iter_mut().for_each(|v| *v *= inv);
    Ok(curve)
}

/// Mean squared error per state component over all sequences and steps.
pub fn nmse(truths: &[&[DVector<f64>]], estimates: &[Vec<DVector<f64>>]) -> Result<f64> {
    let (_, n) = check_shapes(truths, estimates)?;
    let curve = error_curve(truths, estimates)?;
    Ok(curve.iter().sum::<f64>() / (curve.len() * n) as f64)
}

/// Something that turns a measurement sequence into state estimates.
#[derive(Debug, Clone)]
pub enum Estimator {
    Kf,
    Ekf,
    Network(Box<NetworkParams>),
}

impl Estimator {
    /// The filter matching the model's dynamics.
    pub fn filter_for(model: &SystemModel) -> Self {
        match FilterKind::for_model(model) {
            FilterKind::Kf => Estimator::Kf,
            FilterKind::Ekf => Estimator::Ekf,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Kf => "kf",
            Estimator::Ekf => "ekf",
            Estimator::Network(p) => p.arch().name(),
        }
    }

    pub fn estimate(&self, model: &SystemModel, traj: &Trajectory) -> Result<Vec<DVector<f64>>> {
        match self {
            Estimator::Kf => run_filter(model, traj, FilterKind::Kf),
            Estimator::Ekf => run_filter(model, traj, FilterKind::Ekf),
            Estimator::Network(p) => estimate_sequence(p, &traj.measurements),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalEntry {
    pub name: String,
    pub error_curve: Vec<f64>,
    pub nmse: f64,
    /// Wall-clock seconds for the roll-out over the whole test set.
    pub test_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub system: String,
    pub length: usize,
    pub sequences: usize,
    pub entries: Vec<EvalEntry>,
}

impl EvalReport {
    pub fn entry(&self, name: &str) -> Option<&EvalEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn nmse(&self, name: &str) -> Option<f64> {
        self.entry(name).map(|e| e.nmse)
    }
}

/// Time `estimator` over `test_set` on the calling thread; returns estimates and seconds.
pub fn timed_rollout(
    estimator: &Estimator,
    model: &SystemModel,
    test_set: &[Trajectory],
) -> Result<(Vec<Vec<DVector<f64>>>, f64)> {
    let start = Instant::now();
    let estimates = test_set
        .iter()
        .map(|traj| estimator.estimate(model, traj))
        .collect::<Result<Vec<_>>>()?;
    Ok((estimates, start.elapsed().as_secs_f64()))
}

/// Run every estimator over `test_set` and score it against the true states.
///
/// Roll-outs run one sequence at a time so that the recorded times compare
/// estimators rather than thread counts.
pub fn evaluate(model: &SystemModel, test_set: &[Trajectory], estimators: &[Estimator]) -> Result<EvalReport> {
    let first = test_set
        .first()
        .ok_or_else(|| Error::InvalidConfig("test set is empty".into()))?;
    for traj in test_set {
        if traj.measurements.iter().any(|y| y.len() != model.m) || traj.states.iter().any(|x| x.len() != model.n) {
            return Err(Error::DimensionMismatch(format!(
                "test data does not match system `{}` (n = {}, m = {})",
                model.name, model.n, model.m
            )));
        }
    }
    for est in estimators {
        if let Estimator::Network(p) = est {
            if p.config.m != model.m || p.config.n != model.n {
                return Err(Error::DimensionMismatch(format!(
                    "{} network maps {} -> {}, system `{}` has m = {}, n = {}",
                    est.name(),
                    p.config.m,
                    p.config.n,
                    model.name,
                    model.m,
                    model.n
                )));
            }
        }
    }
    let truths: Vec<&[DVector<f64>]> = test_set.iter().map(Trajectory::targets).collect();
    let mut entries = Vec::with_capacity(estimators.len());
    for est in estimators {
        let (estimates, seconds) = timed_rollout(est, model, test_set)?;
        let curve = error_curve(&truths, &estimates)?;
        let score = curve.iter().sum::<f64>() / (curve.len() * model.n) as f64;
        entries.push(EvalEntry {
            name: est.name().to_string(),
            error_curve: curve,
            nmse: score,
            test_seconds: seconds,
        });
    }
    Ok(EvalReport {
        system: model.name.clone(),
        length: first.len(),
        sequences: test_set.len(),
        entries,
    })
}

/// `count` fresh trajectories whose initial means are drawn from `region`.
pub fn out_of_region_testset(
    model: &SystemModel,
    region: &Region,
    length: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    if count == 0 {
        return Err(Error::InvalidConfig("out-of-region test set needs at least one sequence".into()));
    }
    generate_many(model, length, region, seed, count)
}

/// Write `t, error_<name>, ...` with one row per step, `t` starting at 1.
pub fn write_error_curves(report: &EvalReport, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    let mut header = vec!["t".to_string()];
    header.extend(report.entries.iter().map(|e| format!("error_{}", e.name)));
    w.write_record(&header)?;
    for t in 0..report.length {
        let mut row = vec![(t + 1).to_string()];
        row.extend(report.entries.iter().map(|e| e.error_curve[t].to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// One line of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub system: String,
    pub estimator: String,
    pub nmse: f64,
    pub nmse_oor: Option<f64>,
    pub train_seconds: Option<f64>,
    pub test_seconds: f64,
}

/// Summary rows for `report`, with out-of-region scores and training times looked up by estimator name.
pub fn summary_rows(
    report: &EvalReport,
    oor: Option<&EvalReport>,
    train_seconds: &[(String, f64)],
) -> Vec<SummaryRow> {
    report
        .entries
        .iter()
        .map(|e| SummaryRow {
            system: report.system.clone(),
            estimator: e.name.clone(),
            nmse: e.nmse,
            nmse_oor: oor.and_then(|r| r.nmse(&e.name)),
            train_seconds: train_seconds.iter().find(|(n, _)| *n == e.name).map(|(_, s)| *s),
            test_seconds: e.test_seconds,
        })
        .collect()
}

pub fn write_summary(rows: &[SummaryRow], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record(["system", "estimator", "nmse", "nmse_oor", "train_seconds", "test_seconds"])?;
    }
    w.flush()?;
    Ok(())
}
