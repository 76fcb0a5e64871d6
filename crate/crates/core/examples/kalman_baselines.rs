//! Kalman filter and EKF baselines on the three benchmark systems at full data size.
//!
//! ```text
//! cargo run --release --example kalman_baselines -- [seeds]
//! ```
//!
//! For each seed, generates the 100-sequence dataset, runs the matching filter
//! over the 10 test sequences and prints the NMSE.

use jlstm::dynamics::{generate_dataset, model_by_name};
use jlstm::evaluation::{evaluate, Estimator};
use jlstm::experiment::ExperimentSpec;

fn main() -> jlstm::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    for system in ["springs", "pendulum", "vdp"] {
        let model = model_by_name(system)?;
        let filter = Estimator::filter_for(&model);
        let mut scores = Vec::new();
        for seed in 0..seeds {
            let spec = ExperimentSpec::new(system)?.with_seed(seed);
            let data = generate_dataset(&model, spec.sequence_length, spec.sequence_count, spec.dataset_seed())?;
            let report = evaluate(&model, &data.test, std::slice::from_ref(&filter))?;
            scores.push(report.entries[0].nmse);
        }
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        let list: Vec<String> = scores.iter().map(|s| format!("{s:.4}")).collect();
        println!("{system:<9} {:<4} mean {mean:.4}  [{}]", filter.name(), list.join(" "));
    }
    Ok(())
}
