//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use jlstm::networks::{bptt_gradients, init_params, Arch, NetworkConfig, NetworkParams, Tape};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Relative error with a floor on the denominator so exact zeros compare cleanly.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Sequence loss of `params` evaluated from scratch.
pub fn sequence_loss(params: &NetworkParams, ys: &[DVector<f64>], xs: &[DVector<f64>]) -> f64 {
    Tape::record(params, ys, &params.initial_state()).unwrap().loss(xs).unwrap()
}

/// Central-difference gradient of the sequence loss, one parameter at a time.
pub fn finite_difference_gradient(
    params: &NetworkParams,
    ys: &[DVector<f64>],
    xs: &[DVector<f64>],
    step: f64,
) -> Vec<Vec<f64>> {
    let mut probe = params.clone();
    let lens: Vec<usize> = params.weights.arrays().iter().map(|a| a.len()).collect();
    let mut out = Vec::new();
    for (slot, len) in lens.into_iter().enumerate() {
        let mut grad = vec![0.0; len];
        for (k, g) in grad.iter_mut().enumerate() {
            let orig = probe.weights.arrays()[slot][k];
            probe.weights.arrays_mut()[slot][k] = orig + step;
            let plus = sequence_loss(&probe, ys, xs);
            probe.weights.arrays_mut()[slot][k] = orig - step;
            let minus = sequence_loss(&probe, ys, xs);
            probe.weights.arrays_mut()[slot][k] = orig;
            *g = (plus - minus) / (2.0 * step);
        }
        out.push(grad);
    }
    out
}

/// Largest relative error between BPTT and central differences on a random
/// problem with `m = n = 2`.
pub fn max_gradient_error(arch: Arch, hidden: usize, len: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = NetworkConfig::new(arch, 2, 2, hidden, seed).with_initial_estimate(vec![0.3, -0.2]);
    let mut params = init_params(&cfg).unwrap();
    // Non-zero biases exercise every term of the derivative.
    for b in params.weights.b.iter_mut().chain(params.weights.b_out.iter_mut()) {
        *b = rng.random_range(-0.5..0.5);
    }
    let ys: Vec<_> = (0..len).map(|_| DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0))).collect();
    let xs: Vec<_> = (0..len).map(|_| DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0))).collect();

    let tape = Tape::record(&params, &ys, &params.initial_state()).unwrap();
    let (_, grads) = bptt_gradients(&params, &tape, &xs).unwrap();
    let fd = finite_difference_gradient(&params, &ys, &xs, 1e-5);
    grads
        .arrays()
        .iter()
        .zip(&fd)
        .flat_map(|(g, f)| g.iter().zip(f).map(|(a, b)| relative_error(*a, *b)))
        .fold(0.0, f64::max)
}

/// Filtered means of a linear-Gaussian system by batch least squares.
///
/// For each `t` the joint MAP estimate of `x_0..x_t` given `y_1..y_t` is found
/// by solving the stacked normal equations; its last block is `E[x_t | y_1..t]`.
pub fn batch_filtered_means(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    m0: &DVector<f64>,
    p0: &DMatrix<f64>,
    ys: &[DVector<f64>],
) -> Vec<DVector<f64>> {
    let n = a.nrows();
    let p0_inv = p0.clone().try_inverse().unwrap();
    let q_inv = q.clone().try_inverse().unwrap();
    let r_inv = r.clone().try_inverse().unwrap();
    (1..=ys.len())
        .map(|t| {
            let dim = n * (t + 1);
            let mut info = DMatrix::<f64>::zeros(dim, dim);
            let mut rhs = DVector::<f64>::zeros(dim);
            // prior on x_0
            info.view_mut((0, 0), (n, n)).add_assign(&p0_inv);
            rhs.rows_mut(0, n).add_assign(&(&p0_inv * m0));
            for k in 1..=t {
                // residual x_k - A x_{k-1}, i.e. [-A, I] acting on (x_{k-1}, x_k)
                let mut block = DMatrix::<f64>::zeros(n, 2 * n);
                block.view_mut((0, 0), (n, n)).copy_from(&(-a));
                block.view_mut((0, n), (n, n)).copy_from(&DMatrix::identity(n, n));
                let contrib = block.transpose() * &q_inv * &block;
                info.view_mut(((k - 1) * n, (k - 1) * n), (2 * n, 2 * n)).add_assign(&contrib);
                // measurement y_k = C x_k
                info.view_mut((k * n, k * n), (n, n)).add_assign(&(c.transpose() * &r_inv * c));
                rhs.rows_mut(k * n, n).add_assign(&(c.transpose() * &r_inv * &ys[k - 1]));
            }
            let sol = info.lu().solve(&rhs).unwrap();
            sol.rows(t * n, n).into_owned()
        })
        .collect()
}

trait AddAssignExt<Rhs> {
    fn add_assign(&mut self, rhs: Rhs);
}

impl<'a, S> AddAssignExt<&DMatrix<f64>> for nalgebra::Matrix<f64, nalgebra::Dyn, nalgebra::Dyn, S>
where
    S: nalgebra::StorageMut<f64, nalgebra::Dyn, nalgebra::Dyn>,
{
    fn add_assign(&mut self, rhs: &DMatrix<f64>) {
        *self += rhs;
    }
}

impl<S> AddAssignExt<&DVector<f64>> for nalgebra::Matrix<f64, nalgebra::Dyn, nalgebra::U1, S>
where
    S: nalgebra::StorageMut<f64, nalgebra::Dyn, nalgebra::U1>,
{
    fn add_assign(&mut self, rhs: &DVector<f64>) {
        *self += rhs;
    }
}
