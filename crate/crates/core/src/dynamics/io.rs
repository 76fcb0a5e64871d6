//! Dataset directories: `manifest.json` plus one `seq_NNNN.csv` per trajectory.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::model::{model_by_name, Region};
use super::trajectory::{Dataset, SplitRatio, Trajectory};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub system: String,
    pub n: usize,
    pub m: usize,
    pub dt: f64,
    #[serde(rename = "T")]
    pub length: usize,
    pub count: usize,
    pub base_seed: u64,
    /// Seed of each stored sequence; seeds whose trajectories diverged are absent.
    #[serde(default)]
    pub seeds: Vec<u64>,
    pub split: SplitIndices,
    pub split_ratio: [f64; 3],
    pub process_noise: f64,
    pub measurement_noise: f64,
    pub initial_noise: f64,
    pub init_region: Region,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sequence_file(index: usize) -> String {
    format!("seq_{index:04}.csv")
}

pub fn save_dataset(ds: &Dataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let (q, r, p0) = ds.system.isotropic_noise().ok_or_else(|| {
        Error::InvalidModel("only isotropic noise covariances can be written to a manifest".into())
    })?;
    fs::create_dir_all(dir)?;
    let (n_train, n_val, count) = (ds.train.len(), ds.val.len(), ds.count());
    let manifest = Manifest {
        system: ds.system.name.clone(),
        n: ds.system.n,
        m: ds.system.m,
        dt: ds.system.dt,
        length: ds.length,
        count,
        base_seed: ds.base_seed,
        seeds: ds.iter().map(|t| t.seed).collect(),
        split: SplitIndices {
            train: (0..n_train).collect(),
            val: (n_train..n_train + n_val).collect(),
            test: (n_train + n_val..count).collect(),
        },
        split_ratio: ds.split.0,
        process_noise: q,
        measurement_noise: r,
        initial_noise: p0,
        init_region: ds.region.clone(),
    };
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)? + "\n")?;
    for (i, traj) in ds.iter().enumerate() {
        write_sequence(&dir.join(sequence_file(i)), traj, ds.system.n, ds.system.m)?;
    }
    Ok(())
}

fn write_sequence(path: &Path, traj: &Trajectory, n: usize, m: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x_{i}")));
    header.extend((1..=m).map(|i| format!("y_{i}")));
    w.write_record(&header)?;
    for (t, x) in traj.states.iter().enumerate() {
        let mut row = Vec::with_capacity(1 + n + m);
        row.push(t.to_string());
        // `Display` for f64 prints the shortest string that parses back to the same value.
        row.extend(x.iter().map(|v| v.to_string()));
        match t.checked_sub(1).map(|k| &traj.measurements[k]) {
            Some(y) => row.extend(y.iter().map(|v| v.to_string())),
            None => row.extend(std::iter::repeat_n(String::new(), m)),
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<Manifest> {
    let path = dir.as_ref().join(MANIFEST_FILE);
    if !path.exists() {
        return Err(Error::NotFound(path));
    }
    let text = fs::read_to_string(&path)?;
    serde_json::from_str(&text).map_err(|e| Error::malformed(path.display().to_string(), e))
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let manifest = read_manifest(dir)?;
    let system = model_by_name(&manifest.system)?
        .with_noise(manifest.process_noise, manifest.measurement_noise, manifest.initial_noise)?;
    if system.n != manifest.n || system.m != manifest.m || system.dt != manifest.dt {
        return Err(Error::DimensionMismatch(format!(
            "manifest declares n={}, m={}, dt={} but system `{}` has n={}, m={}, dt={}",
            manifest.n, manifest.m, manifest.dt, system.name, system.n, system.m, system.dt
        )));
    }
    let split = &manifest.split;
    let expected: Vec<usize> = (0..manifest.count).collect();
    let listed: Vec<usize> = split.train.iter().chain(&split.val).chain(&split.test).copied().collect();
    if listed != expected {
        return Err(Error::malformed(
            "manifest",
            "split indices must partition 0..count in generation order",
        ));
    }
    if !manifest.seeds.is_empty() && manifest.seeds.len() != manifest.count {
        return Err(Error::malformed("manifest", "seed list length must equal count"));
    }
    let seed_of = |i: usize| {
        manifest
            .seeds
            .get(i)
            .copied()
            .unwrap_or_else(|| manifest.base_seed.wrapping_add(i as u64))
    };
    let read = |indices: &[usize]| -> Result<Vec<Trajectory>> {
        indices
            .iter()
            .map(|&i| {
                read_sequence(&dir.join(sequence_file(i)), &manifest, seed_of(i))
            })
            .collect()
    };
    Ok(Dataset {
        split: SplitRatio(manifest.split_ratio),
        train: read(&split.train)?,
        val: read(&split.val)?,
        test: read(&split.test)?,
        system,
        length: manifest.length,
        base_seed: manifest.base_seed,
        region: manifest.init_region.clone(),
    })
}

fn read_sequence(path: &PathBuf, manifest: &Manifest, seed: u64) -> Result<Trajectory> {
    if !path.exists() {
        return Err(Error::NotFound(path.clone()));
    }
    let (n, m) = (manifest.n, manifest.m);
    let name = path.display().to_string();
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    if header.len() != 1 + n + m {
        return Err(Error::DimensionMismatch(format!(
            "{name}: expected {} columns (t, {n} states, {m} measurements), found {}",
            1 + n + m,
            header.len()
        )));
    }
    let parse = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|e| Error::malformed(name.clone(), format!("bad number `{s}`: {e}")))
    };
    let mut states = Vec::with_capacity(manifest.length + 1);
    let mut measurements = Vec::with_capacity(manifest.length);
    for (t, record) in r.records().enumerate() {
        let record = record?;
        if record.len() != 1 + n + m {
            return Err(Error::DimensionMismatch(format!("{name}: row {t} has {} columns", record.len())));
        }
        if record[0].parse::<usize>().ok() != Some(t) {
            return Err(Error::malformed(name.clone(), format!("row {t} has t = `{}`", &record[0])));
        }
        let x = (1..=n).map(|j| parse(&record[j])).collect::<Result<Vec<_>>>()?;
        states.push(DVector::from_vec(x));
        if t > 0 {
            let y = (1 + n..1 + n + m).map(|j| parse(&record[j])).collect::<Result<Vec<_>>>()?;
            measurements.push(DVector::from_vec(y));
        } else if (1 + n..1 + n + m).any(|j| !record[j].is_empty()) {
            return Err(Error::malformed(name.clone(), "measurement columns must be blank at t = 0"));
        }
    }
    if measurements.len() != manifest.length {
        return Err(Error::DimensionMismatch(format!(
            "{name}: expected {} measured steps, found {}",
            manifest.length,
            measurements.len()
        )));
    }
    Ok(Trajectory {
        states,
        measurements,
        seed,
    })
}
