//! Compare backpropagation-through-time gradients with central differences.
//!
//! ```text
//! cargo run --release --example gradient_check
//! ```

use jlstm::networks::{bptt_gradients, init_params, Arch, NetworkConfig, Tape};
use nalgebra::DVector;

fn main() -> jlstm::Result<()> {
    let ys: Vec<_> = (0..10).map(|t| DVector::from_vec(vec![(t as f64 * 0.3).sin(), 0.1 * t as f64])).collect();
    let xs: Vec<_> = (0..10).map(|t| DVector::from_vec(vec![(t as f64 * 0.3).cos(), -0.05 * t as f64])).collect();
    let step = 1e-5;
    for arch in Arch::ALL {
        let cfg = NetworkConfig::new(arch, 2, 2, 4, 11).with_initial_estimate(vec![0.1, -0.1]);
        let mut params = init_params(&cfg)?;
        let loss = |p: &jlstm::networks::NetworkParams| -> jlstm::Result<f64> {
            Tape::record(p, &ys, &p.initial_state())?.loss(&xs)
        };
        let tape = Tape::record(&params, &ys, &params.initial_state())?;
        let (value, grads) = bptt_gradients(&params, &tape, &xs)?;
        let analytic: Vec<Vec<f64>> = grads.arrays().iter().map(|a| a.to_vec()).collect();
        let mut worst: f64 = 0.0;
        for (slot, values) in analytic.iter().enumerate() {
            for (k, &g) in values.iter().enumerate() {
                let orig = params.weights.arrays()[slot][k];
                params.weights.arrays_mut()[slot][k] = orig + step;
                let plus = loss(&params)?;
                params.weights.arrays_mut()[slot][k] = orig - step;
                let minus = loss(&params)?;
                params.weights.arrays_mut()[slot][k] = orig;
                let fd = (plus - minus) / (2.0 * step);
                worst = worst.max((g - fd).abs() / g.abs().max(fd.abs()).max(1e-8));
            }
        }
        println!("{arch:<6} loss {value:.6}  max relative gradient error {worst:.2e}");
    }
    Ok(())
}
