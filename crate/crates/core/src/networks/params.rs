use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::config::{Arch, NetworkConfig};
use crate::seed::stream;
use crate::{Error, Result};

/// The five parameter arrays shared by every architecture.
///
/// LSTM gate blocks are stacked row-wise in the order forget, input, output,
/// candidate, so `w_in` is `4h × m`, `w_rec` is `4h × r` and `b` has `4h`
/// entries (`r = n` for Jordan variants, `h` for Elman). Simple recurrent
/// networks use a single block.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub w_in: DMatrix<f64>,
    pub w_rec: DMatrix<f64>,
    pub b: DVector<f64>,
    pub w_out: DMatrix<f64>,
    pub b_out: DVector<f64>,
}

/// Gradients have exactly the layout of the parameters they differentiate.
pub type GradientSet = Weights;

impl Weights {
    pub fn zeros(arch: Arch, m: usize, n: usize, hidden: usize) -> Self {
        let gh = arch.gate_count() * hidden;
        Weights {
            w_in: DMatrix::zeros(gh, m),
            w_rec: DMatrix::zeros(gh, arch.recurrent_width(n, hidden)),
            b: DVector::zeros(gh),
            w_out: DMatrix::zeros(n, hidden),
            b_out: DVector::zeros(n),
        }
    }

    pub fn zeros_like(other: &Weights) -> Self {
        Weights {
            w_in: DMatrix::zeros(other.w_in.nrows(), other.w_in.ncols()),
            w_rec: DMatrix::zeros(other.w_rec.nrows(), other.w_rec.ncols()),
            b: DVector::zeros(other.b.len()),
            w_out: DMatrix::zeros(other.w_out.nrows(), other.w_out.ncols()),
            b_out: DVector::zeros(other.b_out.len()),
        }
    }

    pub fn arrays(&self) -> [&[f64]; 5] {
        [
            self.w_in.as_slice(),
            self.w_rec.as_slice(),
            self.b.as_slice(),
            self.w_out.as_slice(),
            self.b_out.as_slice(),
        ]
    }

    pub fn arrays_mut(&mut self) -> [&mut [f64]; 5] {
        [
            self.w_in.as_mut_slice(),
            self.w_rec.as_mut_slice(),
            self.b.as_mut_slice(),
            self.w_out.as_mut_slice(),
            self.b_out.as_mut_slice(),
        ]
    }

    pub fn len(&self) -> usize {
        self.arrays().iter().map(|a| a.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn same_shape(&self, other: &Weights) -> bool {
        self.w_in.shape() == other.w_in.shape()
            && self.w_rec.shape() == other.w_rec.shape()
            && self.b.len() == other.b.len()
            && self.w_out.shape() == other.w_out.shape()
            && self.b_out.len() == other.b_out.len()
    }

    /// `self += alpha · other`.
    pub fn axpy(&mut self, alpha: f64, other: &Weights) {
        for (dst, src) in self.arrays_mut().into_iter().zip(other.arrays()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += alpha * s;
            }
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for dst in self.arrays_mut() {
            dst.iter_mut().for_each(|d| *d *= alpha);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.arrays().iter().all(|a| a.iter().all(|v| v.is_finite()))
    }

    pub fn max_abs(&self) -> f64 {
        self.arrays().iter().flat_map(|a| a.iter()).fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// All weights of one network, plus the configuration they were built for.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub config: NetworkConfig,
    pub weights: Weights,
}

impl NetworkParams {
    pub fn zeros(config: NetworkConfig) -> Self {
        let weights = Weights::zeros(config.arch, config.m, config.n, config.hidden);
        NetworkParams { config, weights }
    }

    pub fn arch(&self) -> Arch {
        self.config.arch
    }

    pub fn hidden(&self) -> usize {
        self.config.hidden
    }

    /// Named arrays in row-major order, in the naming of the forward equations.
    pub fn named_arrays(&self) -> Vec<(String, (usize, usize), Vec<f64>)> {
        let arch = self.arch();
        let h = self.hidden();
        let w = &self.weights;
        let rec = if arch.is_jordan() { 'x' } else { 'a' };
        let mut out = Vec::new();
        let row_major = |m: &DMatrix<f64>| m.transpose().as_slice().to_vec();
        if arch.is_lstm() {
            for (g, gate) in ["f", "i", "o", "c"].iter().enumerate() {
                out.push((format!("W_{gate}y"), (h, w.w_in.ncols()), row_major(&w.w_in.rows(g * h, h).into_owned())));
            }
            for (g, gate) in ["f", "i", "o", "c"].iter().enumerate() {
                out.push((
                    format!("W_{gate}{rec}"),
                    (h, w.w_rec.ncols()),
                    row_major(&w.w_rec.rows(g * h, h).into_owned()),
                ));
            }
            for (g, gate) in ["f", "i", "o", "c"].iter().enumerate() {
                out.push((format!("b_{gate}"), (h, 1), w.b.rows(g * h, h).iter().copied().collect()));
            }
        } else {
            out.push(("W_ay".into(), w.w_in.shape(), row_major(&w.w_in)));
            out.push((format!("W_a{rec}"), w.w_rec.shape(), row_major(&w.w_rec)));
            out.push(("b_a".into(), (h, 1), w.b.as_slice().to_vec()));
        }
        out.push(("W_xa".into(), w.w_out.shape(), row_major(&w.w_out)));
        out.push(("b_x".into(), (w.b_out.len(), 1), w.b_out.as_slice().to_vec()));
        out
    }

    /// Inverse of [`NetworkParams::named_arrays`].
    pub fn from_named_arrays(config: NetworkConfig, arrays: &[(String, (usize, usize), Vec<f64>)]) -> Result<Self> {
        config.validate()?;
        let mut params = NetworkParams::zeros(config);
        let layout = params.named_arrays();
        if layout.len() != arrays.len() {
            return Err(Error::malformed(
                "checkpoint",
                format!("expected {} parameter arrays, found {}", layout.len(), arrays.len()),
            ));
        }
        let h = params.hidden();
        let gates = params.arch().gate_count();
        for (k, ((name, shape, _), (got_name, got_shape, values))) in layout.iter().zip(arrays).enumerate() {
            if name != got_name || shape != got_shape || values.len() != shape.0 * shape.1 {
                return Err(Error::DimensionMismatch(format!(
                    "checkpoint array #{k}: expected {name} {shape:?}, found {got_name} {got_shape:?} with {} values",
                    values.len()
                )));
            }
            let block = DMatrix::from_row_slice(shape.0, shape.1, values);
            let w = &mut params.weights;
            // Slots follow `named_arrays`: gate blocks of w_in, w_rec, b, then w_out, b_out.
            let (group, gate) = if k < 3 * gates { (k / gates, k % gates) } else { (3 + k - 3 * gates, 0) };
            match group {
                0 => w.w_in.rows_mut(gate * h, h).copy_from(&block),
                1 => w.w_rec.rows_mut(gate * h, h).copy_from(&block),
                2 => w.b.rows_mut(gate * h, h).copy_from(&block.column(0)),
                3 => w.w_out.copy_from(&block),
                _ => w.b_out.copy_from(&block.column(0)),
            }
        }
        if !params.weights.is_finite() {
            return Err(Error::malformed("checkpoint", "non-finite parameter value"));
        }
        Ok(params)
    }
}

/// Glorot-uniform input and recurrent matrices, zero biases and an orthogonal output matrix.
///
/// Each gate block is drawn separately with bound `√(6 / (fan_in + fan_out))`.
/// The output matrix is the leading `n × h` block of the sign-corrected `Q`
/// factor of a standard-normal square matrix.
pub fn init_params(cfg: &NetworkConfig) -> Result<NetworkParams> {
    cfg.validate()?;
    let mut params = NetworkParams::zeros(cfg.clone());
    let (h, gates) = (cfg.hidden, cfg.arch.gate_count());
    let mut rng = stream(cfg.seed, 0);
    let w = &mut params.weights;
    for target in [&mut w.w_in, &mut w.w_rec] {
        let cols = target.ncols();
        let bound = (6.0 / (h + cols) as f64).sqrt();
        for g in 0..gates {
            for i in 0..h {
                for j in 0..cols {
                    target[(g * h + i, j)] = rng.random_range(-bound..bound);
                }
            }
        }
    }
    w.w_out = orthogonal(cfg.n, h, cfg.seed);
    Ok(params)
}

fn orthogonal(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = stream(seed, 1);
    let size = rows.max(cols);
    let g = DMatrix::from_fn(size, size, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for (j, mut col) in q.column_iter_mut().enumerate() {
        if r[(j, j)] < 0.0 {
            col.neg_mut();
        }
    }
    q.view((0, 0), (rows, cols)).into_owned()
}
