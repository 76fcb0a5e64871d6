use nalgebra::DVector;
use rayon::prelude::*;

use super::model::{gaussian, Region, SystemModel};
use crate::seed::{stream, streams};
use crate::{Error, Result};

/// One noisy roll-out: `states[0..=T]` and `measurements[0..T]`, where
/// `measurements[t - 1]` observes `states[t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
    pub measurements: Vec<DVector<f64>>,
    pub seed: u64,
}

impl Trajectory {
    /// Number of measured steps `T`.
    pub fn len(&self) -> usize {
        self.measurements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measurements.is_empty()
    }

    /// True states at the measured steps, `x^(1..T)`.
    pub fn targets(&self) -> &[DVector<f64>] {
        &self.states[1..]
    }
}

/// Simulate `length` steps of `model` with the initial mean drawn from `region`.
///
/// `x⁰ = u + ε` with `u ~ U(region)`, `ε ~ N(0, P0)`; then `x⁺ = f(x) + ω`,
/// `y = C x⁺ + ν`. Each noise source has its own stream of `seed`.
pub fn generate_trajectory(model: &SystemModel, length: usize, region: &Region, seed: u64) -> Result<Trajectory> {
    if length == 0 {
        return Err(Error::InvalidConfig("sequence length must be >= 1".into()));
    }
    if region.dim() != model.n {
        return Err(Error::DimensionMismatch(format!(
            "initial region has dimension {}, model has n = {}",
            region.dim(),
            model.n
        )));
    }
    let mut mean_rng = stream(seed, streams::INIT_MEAN);
    let mut init_rng = stream(seed, streams::INIT_NOISE);
    let mut process_rng = stream(seed, streams::PROCESS);
    let mut measure_rng = stream(seed, streams::MEASUREMENT);

    let mut x = region.sample(&mut mean_rng) + gaussian(model.p0_factor(), &mut init_rng);
    let mut states = Vec::with_capacity(length + 1);
    let mut measurements = Vec::with_capacity(length);
    states.push(x.clone());
    for t in 1..=length {
        x = model
            .step(&x)
            .map_err(|e| match e {
                Error::IntegrationDiverged { .. } => Error::IntegrationDiverged { step: t },
                other => other,
            })?
            + gaussian(model.q_factor(), &mut process_rng);
        let y = model.measure(&x) + gaussian(model.r_factor(), &mut measure_rng);
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::IntegrationDiverged { step: t });
        }
        states.push(x.clone());
        measurements.push(y);
    }
    Ok(Trajectory {
        states,
        measurements,
        seed,
    })
}

/// Fractions of a dataset assigned to training, validation and testing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatio(pub [f64; 3]);

impl Default for SplitRatio {
    fn default() -> Self {
        SplitRatio([0.8, 0.1, 0.1])
    }
}

impl SplitRatio {
    /// Split sizes for `count` sequences; testing takes the remainder.
    pub fn sizes(&self, count: usize) -> (usize, usize, usize) {
        let train = (self.0[0] * count as f64).round() as usize;
        let val = (self.0[1] * count as f64).round() as usize;
        let train = train.min(count);
        let val = val.min(count - train);
        (train, val, count - train - val)
    }
}

/// Trajectories of one system, split in generation order.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub system: SystemModel,
    pub length: usize,
    pub base_seed: u64,
    pub region: Region,
    pub split: SplitRatio,
    pub train: Vec<Trajectory>,
    pub val: Vec<Trajectory>,
    pub test: Vec<Trajectory>,
}

impl Dataset {
    pub fn count(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    /// All trajectories in generation order.
    pub fn iter(&self) -> impl Iterator<Item = &Trajectory> {
        self.train.iter().chain(&self.val).chain(&self.test)
    }
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.system.name == other.system.name
            && self.system.n == other.system.n
            && self.system.m == other.system.m
            && self.system.dt == other.system.dt
            && self.length == other.length
            && self.base_seed == other.base_seed
            && self.region == other.region
            && self.split == other.split
            && self.train == other.train
            && self.val == other.val
            && self.test == other.test
    }
}

/// Smallest dataset that leaves at least one sequence in every split.
pub const MIN_SEQUENCES: usize = 10;

/// `count` trajectories from consecutive seeds starting at `base_seed` (see
/// [`generate_many`]), split 80:10:10 in generation order.
pub fn generate_dataset(model: &SystemModel, length: usize, count: usize, base_seed: u64) -> Result<Dataset> {
    generate_dataset_in(model, length, count, base_seed, &model.init_region)
}

/// As [`generate_dataset`], drawing initial means from `region`.
pub fn generate_dataset_in(
    model: &SystemModel,
    length: usize,
    count: usize,
    base_seed: u64,
    region: &Region,
) -> Result<Dataset> {
    if count < MIN_SEQUENCES {
        return Err(Error::InvalidConfig(format!(
            "a dataset needs at least {MIN_SEQUENCES} sequences, got {count}"
        )));
    }
    let mut all = generate_many(model, length, region, base_seed, count)?;
    let split = SplitRatio::default();
    let (n_train, n_val, _) = split.sizes(count);
    let test = all.split_off(n_train + n_val);
    let val = all.split_off(n_train);
    Ok(Dataset {
        system: model.clone(),
        length,
        base_seed,
        region: region.clone(),
        split,
        train: all,
        val,
        test,
    })
}

/// The first `count` trajectories with seeds `base_seed, base_seed + 1, ...`
/// that stay finite, generated in parallel.
///
/// Noise can push a state past an unstable limit cycle, after which it
/// escapes to infinity within a few steps. Such seeds are skipped. Fails with
/// the divergence error if more than `count` seeds are skipped.
pub fn generate_many(
    model: &SystemModel,
    length: usize,
    region: &Region,
    base_seed: u64,
    count: usize,
) -> Result<Vec<Trajectory>> {
    let mut out = Vec::with_capacity(count);
    let mut next = 0u64;
    let mut skipped = 0usize;
    while out.len() < count {
        let want = (count - out.len()) as u64;
        let round: Vec<Result<Trajectory>> = (next..next + want)
            .into_par_iter()
            .map(|i| generate_trajectory(model, length, region, base_seed.wrapping_add(i)))
            .collect();
        next += want;
        for r in round {
            match r {
                Ok(traj) => out.push(traj),
                Err(Error::IntegrationDiverged { step }) => {
                    skipped += 1;
                    if skipped > count {
                        return Err(Error::IntegrationDiverged { step });
                    }
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}
