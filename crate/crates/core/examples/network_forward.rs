//! Build each recurrent architecture and run it over one measurement sequence.
//!
//! ```text
//! cargo run --release --example network_forward
//! ```

use jlstm::dynamics::{generate_trajectory, vdp_model};
use jlstm::networks::{count_params, estimate_sequence, init_params, Arch, NetworkConfig};

fn main() -> jlstm::Result<()> {
    let model = vdp_model();
    let traj = generate_trajectory(&model, 100, &model.init_region, 3)?;
    for arch in Arch::ALL {
        let cfg = NetworkConfig::new(arch, model.m, model.n, 50, 0)
            .with_initial_estimate(model.init_region.centroid().as_slice().to_vec());
        let params = init_params(&cfg)?;
        let estimates = estimate_sequence(&params, &traj.measurements)?;
        let mse = estimates
            .iter()
            .zip(traj.targets())
            .map(|(e, x)| (e - x).norm_squared())
            .sum::<f64>()
            / (estimates.len() * model.n) as f64;
        let names: Vec<String> = params
            .named_arrays()
            .into_iter()
            .map(|(name, (r, c), _)| format!("{name}[{r}x{c}]"))
            .collect();
        println!("{arch:<6} {:>6} parameters, untrained NMSE {mse:.4}", count_params(&cfg));
        println!("       {}", names.join(" "));
    }

    // Stepping by hand gives the same estimates as the sequence helper.
    let cfg = NetworkConfig::new(Arch::Jlstm, 1, 2, 8, 1).with_initial_estimate(vec![0.0, 0.0]);
    let params = init_params(&cfg)?;
    let mut state = params.initial_state();
    for y in traj.measurements.iter().take(3) {
        let (next, x) = params.step(&state, y)?;
        let g = next.gates.as_ref().unwrap();
        println!(
            "y={:+.3} -> x=({:+.4}, {:+.4})  mean forget gate {:.3}",
            y[0],
            x[0],
            x[1],
            g.forget.mean()
        );
        state = next;
    }
    Ok(())
}
