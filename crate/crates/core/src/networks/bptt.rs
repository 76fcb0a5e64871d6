use nalgebra::DVector;

use super::cell::{check_targets, gemv_tr_set, ger_acc, Tape};
use super::params::{GradientSet, NetworkParams};
use crate::{Error, Result};

/// Loss and exact gradients of the sequence loss
/// `(1 / (T n)) Σₜ ‖x^(t) − x̂^(t)‖²` with respect to every parameter.
///
/// Gradients flow through all recurrent paths: the hidden carry for Elman
/// variants, the fed-back estimate for Jordan variants, and the cell for LSTMs.
/// The initial carry is a constant and receives no gradient.
pub fn bptt_gradients(params: &NetworkParams, tape: &Tape, targets: &[DVector<f64>]) -> Result<(f64, GradientSet)> {
    bptt_gradients_truncated(params, tape, targets, None)
}

/// As [`bptt_gradients`], but with the unrolled sequence cut into chunks of
/// `window` steps: the forward carry crosses chunk boundaries, gradients do not.
pub fn bptt_gradients_truncated(
    params: &NetworkParams,
    tape: &Tape,
    targets: &[DVector<f64>],
    window: Option<usize>,
) -> Result<(f64, GradientSet)> {
    let mut grads = GradientSet::zeros_like(&params.weights);
    let loss = accumulate_gradients(params, tape, targets, window, &mut grads)?;
    Ok((loss, grads))
}

/// Adds the gradient of one sequence into `grads` and returns its loss.
pub(crate) fn accumulate_gradients(
    params: &NetworkParams,
    tape: &Tape,
    targets: &[DVector<f64>],
    window: Option<usize>,
    grads: &mut GradientSet,
) -> Result<f64> {
    check_targets(tape, targets)?;
    let cfg = &params.config;
    if tape.arch != cfg.arch || tape.m != cfg.m || tape.n != cfg.n || tape.hidden != cfg.hidden {
        return Err(Error::ShapeMismatch("tape was recorded with a different network".into()));
    }
    if !grads.same_shape(&params.weights) {
        return Err(Error::ShapeMismatch("gradient buffer does not match the parameters".into()));
    }
    if window == Some(0) {
        return Err(Error::InvalidConfig("truncation window must be >= 1".into()));
    }
    let w = &params.weights;
    let (arch, len, m, n, h) = (tape.arch, tape.len, tape.m, tape.n, tape.hidden);
    let gh = arch.gate_count() * h;
    let r = arch.recurrent_width(n, h);
    let lstm = arch.is_lstm();
    let jordan = arch.is_jordan();
    let scale = 2.0 / (len * n) as f64;

    let mut carry_rec = vec![0.0; r];
    let mut carry_c = vec![0.0; h];
    let mut dx = vec![0.0; n];
    let mut da = vec![0.0; h];
    let mut dz = vec![0.0; gh];
    let mut loss = 0.0;

    for t in (1..=len).rev() {
        let est = tape.estimate(t);
        for ((d, e), x) in dx.iter_mut().zip(est).zip(targets[t - 1].iter()) {
            let diff = e - x;
            loss += diff * diff;
            *d = scale * diff;
        }
        if jordan {
            dx.iter_mut().zip(&carry_rec).for_each(|(d, c)| *d += c);
        }
        let a_t = &tape.hiddens[t * h..(t + 1) * h];
        ger_acc(&mut grads.w_out, &dx, a_t);
        grads.b_out.iter_mut().zip(&dx).for_each(|(g, d)| *g += d);

        gemv_tr_set(&mut da, &w.w_out, &dx);
        if !jordan {
            da.iter_mut().zip(&carry_rec).for_each(|(d, c)| *d += c);
        }

        let act = &tape.acts[(t - 1) * gh..t * gh];
        if lstm {
            let c_t = &tape.cells[t * h..(t + 1) * h];
            let c_prev = &tape.cells[(t - 1) * h..t * h];
            let (f, rest) = act.split_at(h);
            let (i, rest) = rest.split_at(h);
            let (o, g) = rest.split_at(h);
            for k in 0..h {
                let tc = c_t[k].tanh();
                let d_out = da[k] * tc;
                let dc = da[k] * o[k] * (1.0 - tc * tc) + carry_c[k];
                dz[k] = dc * c_prev[k] * f[k] * (1.0 - f[k]);
                dz[h + k] = dc * g[k] * i[k] * (1.0 - i[k]);
                dz[2 * h + k] = d_out * o[k] * (1.0 - o[k]);
                dz[3 * h + k] = dc * i[k] * (1.0 - g[k] * g[k]);
                carry_c[k] = dc * f[k];
            }
        } else {
            for k in 0..h {
                dz[k] = da[k] * act[k] * (1.0 - act[k]);
            }
        }

        let y_t = &tape.inputs[(t - 1) * m..t * m];
        let rec_prev = if jordan {
            &tape.estimates[(t - 1) * n..t * n]
        } else {
            &tape.hiddens[(t - 1) * h..t * h]
        };
        ger_acc(&mut grads.w_in, &dz, y_t);
        ger_acc(&mut grads.w_rec, &dz, rec_prev);
        grads.b.iter_mut().zip(&dz).for_each(|(g, d)| *g += d);

        let cut = t == 1 || window.is_some_and(|k| (t - 1) % k == 0);
        if cut {
            carry_rec.fill(0.0);
            carry_c.fill(0.0);
        } else {
            gemv_tr_set(&mut carry_rec, &w.w_rec, &dz);
        }
    }
    Ok(loss / (len * n) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::networks::{init_params, Arch, NetworkConfig};

    fn setup(arch: Arch) -> (NetworkParams, Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let p = init_params(&NetworkConfig::new(arch, 2, 2, 3, 17)).unwrap();
        let ys: Vec<_> = (0..6).map(|k| DVector::from_row_slice(&[(k as f64).cos(), 0.3 * k as f64])).collect();
        let xs: Vec<_> = (0..6).map(|k| DVector::from_row_slice(&[0.1 * k as f64, -0.2])).collect();
        (p, ys, xs)
    }

    #[test]
    fn perfect_targets_give_zero() {
        for arch in Arch::ALL {
            let (p, ys, _) = setup(arch);
            let tape = Tape::record(&p, &ys, &p.initial_state()).unwrap();
            let (loss, g) = bptt_gradients(&p, &tape, &tape.estimates()).unwrap();
            assert_eq!(loss, 0.0);
            assert_eq!(g.max_abs(), 0.0);
        }
    }

    #[test]
    fn doubled_residuals() {
        for arch in Arch::ALL {
            let (p, ys, xs) = setup(arch);
            let tape = Tape::record(&p, &ys, &p.initial_state()).unwrap();
            let est = tape.estimates();
            let doubled: Vec<_> = xs.iter().zip(&est).map(|(x, e)| e + (x - e) * 2.0).collect();
            let (l1, g1) = bptt_gradients(&p, &tape, &xs).unwrap();
            let (l2, g2) = bptt_gradients(&p, &tape, &doubled).unwrap();
            assert!((l2 - 4.0 * l1).abs() <= 1e-12 * l2);
            let mut diff = g2.clone();
            diff.axpy(-2.0, &g1);
            assert!(diff.max_abs() <= 1e-12 * g2.max_abs());
            assert!((tape.loss(&xs).unwrap() - l1).abs() < 1e-15);
        }
    }

    #[test]
    fn target_shape_is_checked() {
        let (p, ys, xs) = setup(Arch::Elstm);
        let tape = Tape::record(&p, &ys, &p.initial_state()).unwrap();
        assert!(bptt_gradients(&p, &tape, &xs[..5]).is_err());
        assert!(bptt_gradients_truncated(&p, &tape, &xs, Some(0)).is_err());
    }

    #[test]
    fn window_covering_sequence_is_exact() {
        let (p, ys, xs) = setup(Arch::Jlstm);
        let tape = Tape::record(&p, &ys, &p.initial_state()).unwrap();
        let full = bptt_gradients(&p, &tape, &xs).unwrap();
        assert_eq!(bptt_gradients_truncated(&p, &tape, &xs, Some(6)).unwrap(), full);
        let cut = bptt_gradients_truncated(&p, &tape, &xs, Some(2)).unwrap();
        assert_eq!(cut.0, full.0);
        assert_ne!(cut.1, full.1);
    }
}
