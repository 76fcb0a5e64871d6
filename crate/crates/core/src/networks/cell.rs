use nalgebra::{DMatrix, DVector, DVectorView, DVectorViewMut};

use super::config::Arch;
use super::params::{NetworkParams, Weights};
use crate::{Error, Result};

/// Logistic function, evaluated without overflow for any finite input.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `out += w · x`.
#[inline]
pub(crate) fn gemv_acc(out: &mut [f64], w: &DMatrix<f64>, x: &[f64]) {
    let len = out.len();
    DVectorViewMut::from_slice(out, len).gemv(1.0, w, &DVectorView::from_slice(x, x.len()), 1.0);
}

/// `out = wᵀ · x`.
#[inline]
pub(crate) fn gemv_tr_set(out: &mut [f64], w: &DMatrix<f64>, x: &[f64]) {
    let len = out.len();
    DVectorViewMut::from_slice(out, len).gemv_tr(1.0, w, &DVectorView::from_slice(x, x.len()), 0.0);
}

/// `w += x yᵀ`.
#[inline]
pub(crate) fn ger_acc(w: &mut DMatrix<f64>, x: &[f64], y: &[f64]) {
    w.ger(1.0, &DVectorView::from_slice(x, x.len()), &DVectorView::from_slice(y, y.len()), 1.0);
}

/// One forward step on raw buffers.
///
/// `rec` is the fed-back vector (previous hidden vector or previous estimate).
/// Writes the post-activation gate values into `act`, the new cell into `cell`
/// (LSTM only), the new hidden vector into `hidden` and the estimate into `estimate`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn step_kernel(
    w: &Weights,
    arch: Arch,
    y: &[f64],
    rec: &[f64],
    c_prev: &[f64],
    act: &mut [f64],
    cell: &mut [f64],
    hidden: &mut [f64],
    estimate: &mut [f64],
) {
    let h = hidden.len();
    act.copy_from_slice(w.b.as_slice());
    gemv_acc(act, &w.w_in, y);
    gemv_acc(act, &w.w_rec, rec);
    if arch.is_lstm() {
        let (sig, cand) = act.split_at_mut(3 * h);
        sig.iter_mut().for_each(|z| *z = sigmoid(*z));
        cand.iter_mut().for_each(|z| *z = z.tanh());
        let (f, rest) = sig.split_at(h);
        let (i, o) = rest.split_at(h);
        for k in 0..h {
            cell[k] = f[k] * c_prev[k] + i[k] * cand[k];
            hidden[k] = o[k] * cell[k].tanh();
        }
    } else {
        act.iter_mut().for_each(|z| *z = sigmoid(*z));
        hidden.copy_from_slice(act);
    }
    estimate.copy_from_slice(w.b_out.as_slice());
    gemv_acc(estimate, &w.w_out, hidden);
}

/// Gate activations recorded by an LSTM step.
#[derive(Debug, Clone, PartialEq)]
pub struct Gates {
    pub forget: DVector<f64>,
    pub input: DVector<f64>,
    pub output: DVector<f64>,
    pub candidate: DVector<f64>,
}

/// Recurrent carry between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    /// Hidden vector `a`.
    pub a: DVector<f64>,
    /// Cell vector `c` (stays zero for simple recurrent networks).
    pub c: DVector<f64>,
    /// Previous estimate `x̂`.
    pub x_prev: DVector<f64>,
    /// Gate values of the step that produced this state (LSTM only).
    pub gates: Option<Gates>,
}

impl NetworkState {
    /// Zero hidden and cell vectors with the given previous estimate.
    pub fn initial(hidden: usize, x0: DVector<f64>) -> Self {
        NetworkState {
            a: DVector::zeros(hidden),
            c: DVector::zeros(hidden),
            x_prev: x0,
            gates: None,
        }
    }
}

impl NetworkParams {
    /// Starting carry: `a⁰ = 0`, `c⁰ = 0`, `x̂⁰` from the configuration.
    pub fn initial_state(&self) -> NetworkState {
        NetworkState::initial(self.hidden(), DVector::from_column_slice(&self.config.initial_estimate))
    }

    /// Advance one step on measurement `y`, returning the new carry and the estimate.
    pub fn step(&self, state: &NetworkState, y: &DVector<f64>) -> Result<(NetworkState, DVector<f64>)> {
        let cfg = &self.config;
        let h = cfg.hidden;
        if y.len() != cfg.m || state.a.len() != h || state.c.len() != h || state.x_prev.len() != cfg.n {
            return Err(Error::ShapeMismatch(format!(
                "step expects y of length {}, a and c of length {h}, x_prev of length {}",
                cfg.m, cfg.n
            )));
        }
        let arch = cfg.arch;
        let rec = if arch.is_jordan() { state.x_prev.as_slice() } else { state.a.as_slice() };
        let mut act = vec![0.0; arch.gate_count() * h];
        let mut cell = vec![0.0; h];
        let mut hidden = vec![0.0; h];
        let mut estimate = vec![0.0; cfg.n];
        let cell_buf: &mut [f64] = if arch.is_lstm() { &mut cell } else { &mut [] };
        step_kernel(
            &self.weights,
            arch,
            y.as_slice(),
            rec,
            state.c.as_slice(),
            &mut act,
            cell_buf,
            &mut hidden,
            &mut estimate,
        );
        let gates = arch.is_lstm().then(|| Gates {
            forget: DVector::from_column_slice(&act[..h]),
            input: DVector::from_column_slice(&act[h..2 * h]),
            output: DVector::from_column_slice(&act[2 * h..3 * h]),
            candidate: DVector::from_column_slice(&act[3 * h..]),
        });
        let x = DVector::from_vec(estimate);
        let next = NetworkState {
            a: DVector::from_vec(hidden),
            c: DVector::from_vec(cell),
            x_prev: x.clone(),
            gates,
        };
        Ok((next, x))
    }
}

fn step_as(arch: Arch, params: &NetworkParams, state: &NetworkState, y: &DVector<f64>) -> Result<(NetworkState, DVector<f64>)> {
    if params.arch() != arch {
        return Err(Error::InvalidConfig(format!("{arch} step called with {} parameters", params.arch())));
    }
    params.step(state, y)
}

/// Elman step: `a' = σ(W_ay y + W_aa a + b_a)`, `x̂ = W_xa a' + b_x`.
pub fn ern_step(params: &NetworkParams, state: &NetworkState, y: &DVector<f64>) -> Result<(NetworkState, DVector<f64>)> {
    step_as(Arch::Ern, params, state, y)
}

/// Jordan step: `a' = σ(W_ay y + W_ax x̂_prev + b_a)`, `x̂ = W_xa a' + b_x`.
pub fn jrn_step(params: &NetworkParams, state: &NetworkState, y: &DVector<f64>) -> Result<(NetworkState, DVector<f64>)> {
    step_as(Arch::Jrn, params, state, y)
}

/// Elman LSTM step; every gate sees `y` and the previous hidden vector.
pub fn elstm_step(params: &NetworkParams, state: &NetworkState, y: &DVector<f64>) -> Result<(NetworkState, DVector<f64>)> {
    step_as(Arch::Elstm, params, state, y)
}

/// Jordan LSTM step; every gate sees `y` and the previous estimate, never the previous hidden vector.
pub fn jlstm_step(params: &NetworkParams, state: &NetworkState, y: &DVector<f64>) -> Result<(NetworkState, DVector<f64>)> {
    step_as(Arch::Jlstm, params, state, y)
}

/// Everything a backward pass needs from a forward roll-out, stored column-per-step.
#[derive(Debug, Clone, PartialEq)]
pub struct Tape {
    pub(crate) arch: Arch,
    pub(crate) len: usize,
    pub(crate) m: usize,
    pub(crate) n: usize,
    pub(crate) hidden: usize,
    /// `y^(t)` for t = 1..T, `m` values per step.
    pub(crate) inputs: Vec<f64>,
    /// Post-activation gate values for t = 1..T.
    pub(crate) acts: Vec<f64>,
    /// `c^(t)` for t = 0..T (LSTM only).
    pub(crate) cells: Vec<f64>,
    /// `a^(t)` for t = 0..T.
    pub(crate) hiddens: Vec<f64>,
    /// `x̂^(t)` for t = 0..T.
    pub(crate) estimates: Vec<f64>,
}

impl Tape {
    /// Run the network over `measurements` starting from `init`, recording every step.
    pub fn record(params: &NetworkParams, measurements: &[DVector<f64>], init: &NetworkState) -> Result<Tape> {
        let cfg = &params.config;
        let (arch, m, n, h) = (cfg.arch, cfg.m, cfg.n, cfg.hidden);
        let len = measurements.len();
        if len == 0 {
            return Err(Error::ShapeMismatch("measurement sequence is empty".into()));
        }
        if measurements.iter().any(|y| y.len() != m) {
            return Err(Error::ShapeMismatch(format!("every measurement must have length {m}")));
        }
        if init.a.len() != h || init.c.len() != h || init.x_prev.len() != n {
            return Err(Error::ShapeMismatch("initial state does not match the network".into()));
        }
        let gh = arch.gate_count() * h;
        let ch = if arch.is_lstm() { h } else { 0 };
        let mut tape = Tape {
            arch,
            len,
            m,
            n,
            hidden: h,
            inputs: measurements.iter().flat_map(|y| y.iter().copied()).collect(),
            acts: vec![0.0; len * gh],
            cells: vec![0.0; (len + 1) * ch],
            hiddens: vec![0.0; (len + 1) * h],
            estimates: vec![0.0; (len + 1) * n],
        };
        tape.hiddens[..h].copy_from_slice(init.a.as_slice());
        tape.cells[..ch].copy_from_slice(&init.c.as_slice()[..ch]);
        tape.estimates[..n].copy_from_slice(init.x_prev.as_slice());
        for t in 1..=len {
            let (h_prev, h_cur) = tape.hiddens.split_at_mut(t * h);
            let (c_prev, c_cur) = tape.cells.split_at_mut(t * ch);
            let (x_prev, x_cur) = tape.estimates.split_at_mut(t * n);
            let rec = if arch.is_jordan() { &x_prev[(t - 1) * n..] } else { &h_prev[(t - 1) * h..] };
            step_kernel(
                &params.weights,
                arch,
                &tape.inputs[(t - 1) * m..t * m],
                rec,
                &c_prev[(t - 1) * ch..],
                &mut tape.acts[(t - 1) * gh..t * gh],
                &mut c_cur[..ch],
                &mut h_cur[..h],
                &mut x_cur[..n],
            );
        }
        Ok(tape)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `x̂^(t)` for `t` in `1..=T`.
    pub fn estimate(&self, t: usize) -> &[f64] {
        &self.estimates[t * self.n..(t + 1) * self.n]
    }

    pub fn estimates(&self) -> Vec<DVector<f64>> {
        (1..=self.len).map(|t| DVector::from_column_slice(self.estimate(t))).collect()
    }

    /// Mean squared error against `targets`, averaged over time and state dimensions.
    pub fn loss(&self, targets: &[DVector<f64>]) -> Result<f64> {
        check_targets(self, targets)?;
        let sum: f64 = targets
            .iter()
            .enumerate()
            .map(|(k, x)| {
                self.estimate(k + 1)
                    .iter()
                    .zip(x.iter())
                    .map(|(e, v)| (v - e) * (v - e))
                    .sum::<f64>()
            })
            .sum();
        Ok(sum / (self.len * self.n) as f64)
    }
}

pub(crate) fn check_targets(tape: &Tape, targets: &[DVector<f64>]) -> Result<()> {
    if targets.len() != tape.len || targets.iter().any(|x| x.len() != tape.n) {
        return Err(Error::ShapeMismatch(format!(
            "expected {} targets of length {}, got {}",
            tape.len,
            tape.n,
            targets.len()
        )));
    }
    Ok(())
}

/// Unroll the network over a measurement sequence, returning `x̂^(1..T)` and the tape.
pub fn forward_sequence(
    params: &NetworkParams,
    measurements: &[DVector<f64>],
    init: &NetworkState,
) -> Result<(Vec<DVector<f64>>, Tape)> {
    let tape = Tape::record(params, measurements, init)?;
    Ok((tape.estimates(), tape))
}

/// Estimates for one measurement sequence from the configured initial carry.
pub fn estimate_sequence(params: &NetworkParams, measurements: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    Ok(Tape::record(params, measurements, &params.initial_state())?.estimates())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::networks::{init_params, NetworkConfig};
    use approx::assert_relative_eq;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(x)
    }

    fn scalar_net(arch: Arch) -> NetworkParams {
        NetworkParams::zeros(NetworkConfig::new(arch, 1, 1, 1, 0))
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-700.0) >= 0.0 && sigmoid(-700.0) < 1e-300);
        assert_eq!(sigmoid(700.0), 1.0);
        assert_relative_eq!(sigmoid(2.0) + sigmoid(-2.0), 1.0, epsilon = 1e-16);
    }

    #[test]
    fn ern_zero_params() {
        let p = NetworkParams::zeros(NetworkConfig::new(Arch::Ern, 2, 3, 4, 0));
        let (st, x) = ern_step(&p, &p.initial_state(), &v(&[0.3, -2.0])).unwrap();
        assert_eq!(st.a, DVector::from_element(4, 0.5));
        assert_eq!(x, DVector::zeros(3));
    }

    #[test]
    fn ern_hand_example() {
        let mut p = scalar_net(Arch::Ern);
        p.weights.w_in[(0, 0)] = 1.0;
        p.weights.w_out[(0, 0)] = 2.0;
        p.weights.b_out[0] = 1.0;
        let (_, x) = ern_step(&p, &p.initial_state(), &v(&[0.0])).unwrap();
        assert_eq!(x[0], 2.0);
    }

    #[test]
    fn ern_ignores_input_without_input_weights() {
        let mut p = init_params(&NetworkConfig::new(Arch::Ern, 2, 2, 3, 1)).unwrap();
        p.weights.w_in.fill(0.0);
        let (_, a) = ern_step(&p, &p.initial_state(), &v(&[1.0, 2.0])).unwrap();
        let (_, b) = ern_step(&p, &p.initial_state(), &v(&[-5.0, 0.1])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn jrn_two_step_roll_out() {
        let mut p = scalar_net(Arch::Jrn);
        p.weights.w_in[(0, 0)] = 1.0;
        p.weights.w_rec[(0, 0)] = 1.0;
        p.weights.w_out[(0, 0)] = 1.0;
        let (s1, x1) = jrn_step(&p, &p.initial_state(), &v(&[0.0])).unwrap();
        assert_eq!(x1[0], 0.5);
        let (_, x2) = jrn_step(&p, &s1, &v(&[0.0])).unwrap();
        assert_relative_eq!(x2[0], sigmoid(0.5), epsilon = 1e-15);
        assert!((x2[0] - 0.62246).abs() < 1e-5);
    }

    #[test]
    fn jrn_zero_params_ignore_previous_estimate() {
        let p = NetworkParams::zeros(NetworkConfig::new(Arch::Jrn, 1, 2, 3, 0));
        let st = NetworkState::initial(3, v(&[4.0, -4.0]));
        let (_, x) = jrn_step(&p, &st, &v(&[1.0])).unwrap();
        assert_eq!(x, DVector::zeros(2));
    }

    #[test]
    fn jrn_recurs_through_output_only() {
        let mut p = init_params(&NetworkConfig::new(Arch::Jrn, 1, 2, 3, 5)).unwrap();
        p.weights.w_in.fill(0.0);
        let ys1: Vec<_> = (0..5).map(|k| v(&[k as f64])).collect();
        let ys2: Vec<_> = (0..5).map(|k| v(&[-3.0 * k as f64])).collect();
        assert_eq!(estimate_sequence(&p, &ys1).unwrap(), estimate_sequence(&p, &ys2).unwrap());
    }

    #[test]
    fn elstm_zero_params() {
        let p = NetworkParams::zeros(NetworkConfig::new(Arch::Elstm, 1, 1, 3, 0));
        let (st, x) = elstm_step(&p, &p.initial_state(), &v(&[0.7])).unwrap();
        let g = st.gates.unwrap();
        assert_eq!(g.forget, DVector::from_element(3, 0.5));
        assert_eq!(g.input, DVector::from_element(3, 0.5));
        assert_eq!(g.output, DVector::from_element(3, 0.5));
        assert_eq!(g.candidate, DVector::zeros(3));
        assert_eq!(st.c, DVector::zeros(3));
        assert_eq!(st.a, DVector::zeros(3));
        assert_eq!(x, DVector::zeros(1));

        let mut st = p.initial_state();
        st.c.fill(1.0);
        let (st, _) = elstm_step(&p, &st, &v(&[0.7])).unwrap();
        assert_eq!(st.c, DVector::from_element(3, 0.5));
        assert_relative_eq!(st.a, DVector::from_element(3, 0.5 * 0.5f64.tanh()), epsilon = 1e-15);
        assert!((st.a[0] - 0.23106).abs() < 1e-5);
    }

    #[test]
    fn saturated_forget_gate_keeps_cell() {
        let mut p = NetworkParams::zeros(NetworkConfig::new(Arch::Elstm, 1, 1, 2, 0));
        p.weights.b.rows_mut(0, 2).fill(10.0);
        let mut st = p.initial_state();
        st.c = v(&[0.8, -1.3]);
        let (next, _) = elstm_step(&p, &st, &v(&[0.0])).unwrap();
        assert!((&next.c - &st.c).amax() < 1e-4);
    }

    #[test]
    fn jlstm_hand_example() {
        let mut p = scalar_net(Arch::Jlstm);
        p.weights.w_in.fill(1.0);
        p.weights.w_rec.fill(1.0);
        p.weights.w_out.fill(1.0);
        let st = NetworkState::initial(1, v(&[1.0]));
        let (next, x) = jlstm_step(&p, &st, &v(&[0.0])).unwrap();
        let g = next.gates.as_ref().unwrap();
        assert!((g.forget[0] - 0.73106).abs() < 1e-5);
        assert!((g.candidate[0] - 0.76159).abs() < 1e-5);
        assert!((next.c[0] - 0.55677).abs() < 1e-5);
        // σ(1)·tanh(σ(1)·tanh(1))
        assert!((x[0] - 0.369_606_35).abs() < 1e-7);
        assert_eq!(next.x_prev, x);
    }

    #[test]
    fn jlstm_ignores_incoming_hidden_vector() {
        let p = init_params(&NetworkConfig::new(Arch::Jlstm, 2, 2, 4, 3)).unwrap();
        let mut st = NetworkState::initial(4, v(&[0.2, -0.1]));
        st.c = v(&[0.1, 0.2, 0.3, 0.4]);
        let (_, x1) = jlstm_step(&p, &st, &v(&[1.0, 0.5])).unwrap();
        st.a = v(&[9.0, -9.0, 3.0, 1.0]);
        let (_, x2) = jlstm_step(&p, &st, &v(&[1.0, 0.5])).unwrap();
        assert_eq!(x1, x2);
        let z = NetworkParams::zeros(NetworkConfig::new(Arch::Jlstm, 1, 2, 4, 0));
        let (_, x) = jlstm_step(&z, &NetworkState::initial(4, v(&[5.0, 5.0])), &v(&[1.0])).unwrap();
        assert_eq!(x, DVector::zeros(2));
    }

    #[test]
    fn step_rejects_wrong_arch_and_shapes() {
        let p = scalar_net(Arch::Jlstm);
        assert!(ern_step(&p, &p.initial_state(), &v(&[0.0])).is_err());
        assert!(p.step(&p.initial_state(), &v(&[0.0, 1.0])).is_err());
    }

    #[test]
    fn sequence_matches_repeated_steps() {
        for arch in Arch::ALL {
            let p = init_params(&NetworkConfig::new(arch, 2, 3, 5, 11)).unwrap();
            let ys: Vec<_> = (0..7).map(|k| v(&[(k as f64).sin(), 0.1 * k as f64])).collect();
            let (est, tape) = forward_sequence(&p, &ys, &p.initial_state()).unwrap();
            assert_eq!(est.len(), ys.len());
            assert_eq!(tape.len(), 7);
            let mut st = p.initial_state();
            for (y, e) in ys.iter().zip(&est) {
                let (next, x) = p.step(&st, y).unwrap();
                assert_eq!(&x, e);
                st = next;
            }
        }
    }

    #[test]
    fn zero_params_emit_output_bias() {
        let mut p = NetworkParams::zeros(NetworkConfig::new(Arch::Elstm, 1, 2, 3, 0));
        p.weights.b_out = v(&[0.25, -1.5]);
        let ys: Vec<_> = (0..4).map(|k| v(&[k as f64])).collect();
        for e in estimate_sequence(&p, &ys).unwrap() {
            assert_eq!(e, v(&[0.25, -1.5]));
        }
        assert!(estimate_sequence(&p, &[]).is_err());
    }
}
