use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::Error;

/// Recurrent estimator architecture.
///
/// Elman variants feed the previous hidden vector back into the cell; Jordan
/// variants feed back the previous state estimate instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Ern,
    Jrn,
    Elstm,
    Jlstm,
}

impl Arch {
    pub const ALL: [Arch; 4] = [Arch::Ern, Arch::Jrn, Arch::Elstm, Arch::Jlstm];

    pub fn is_lstm(self) -> bool {
        matches!(self, Arch::Elstm | Arch::Jlstm)
    }

    pub fn is_jordan(self) -> bool {
        matches!(self, Arch::Jrn | Arch::Jlstm)
    }

    /// Number of stacked pre-activation blocks: four gates for LSTMs, one otherwise.
    pub fn gate_count(self) -> usize {
        if self.is_lstm() {
            4
        } else {
            1
        }
    }

    /// Width of the fed-back vector: `n` for Jordan variants, `hidden` for Elman ones.
    pub fn recurrent_width(self, n: usize, hidden: usize) -> usize {
        if self.is_jordan() {
            n
        } else {
            hidden
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Arch::Ern => "ern",
            Arch::Jrn => "jrn",
            Arch::Elstm => "elstm",
            Arch::Jlstm => "jlstm",
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ern" => Ok(Arch::Ern),
            "jrn" => Ok(Arch::Jrn),
            "elstm" => Ok(Arch::Elstm),
            "jlstm" => Ok(Arch::Jlstm),
            _ => Err(Error::UnknownArch(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecurrentActivation {
    #[default]
    Sigmoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub arch: Arch,
    /// Measurement (input) dimension.
    pub m: usize,
    /// State (output) dimension.
    pub n: usize,
    pub hidden: usize,
    #[serde(default)]
    pub recurrent_activation: RecurrentActivation,
    pub seed: u64,
    /// Estimate fed back at the first step by Jordan variants.
    pub initial_estimate: Vec<f64>,
}

impl NetworkConfig {
    pub const DEFAULT_HIDDEN: usize = 50;

    pub fn new(arch: Arch, m: usize, n: usize, hidden: usize, seed: u64) -> Self {
        NetworkConfig {
            arch,
            m,
            n,
            hidden,
            recurrent_activation: RecurrentActivation::Sigmoid,
            seed,
            initial_estimate: vec![0.0; n],
        }
    }

    pub fn with_initial_estimate(mut self, x0: Vec<f64>) -> Self {
        self.initial_estimate = x0;
        self
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.hidden == 0 || self.m == 0 || self.n == 0 {
            return Err(Error::InvalidConfig("network dimensions must be >= 1".into()));
        }
        if self.initial_estimate.len() != self.n {
            return Err(Error::InvalidConfig(format!(
                "initial estimate has length {}, expected n = {}",
                self.initial_estimate.len(),
                self.n
            )));
        }
        Ok(())
    }
}

/// Exact number of trainable scalars.
pub fn count_params(cfg: &NetworkConfig) -> usize {
    let (g, h) = (cfg.arch.gate_count(), cfg.hidden);
    let r = cfg.arch.recurrent_width(cfg.n, h);
    g * h * cfg.m + g * h * r + g * h + cfg.n * h + cfg.n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_counts() {
        assert_eq!(count_params(&NetworkConfig::new(Arch::Jlstm, 1, 2, 50, 0)), 902);
        assert_eq!(count_params(&NetworkConfig::new(Arch::Elstm, 1, 2, 50, 0)), 10502);
        assert_eq!(count_params(&NetworkConfig::new(Arch::Ern, 1, 1, 1, 0)), 5);
        assert_eq!(count_params(&NetworkConfig::new(Arch::Jrn, 1, 1, 1, 0)), 5);
    }

    #[test]
    fn arch_parsing() {
        assert_eq!("JLSTM".parse::<Arch>().unwrap(), Arch::Jlstm);
        assert!(matches!("gru".parse::<Arch>(), Err(Error::UnknownArch(_))));
        for a in Arch::ALL {
            assert_eq!(a.name().parse::<Arch>().unwrap(), a);
        }
    }
}
