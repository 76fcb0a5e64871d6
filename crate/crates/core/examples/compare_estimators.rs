//! Train both LSTM estimators on Van der Pol data and score them against the EKF,
//! inside and outside the training region of initial conditions.
//!
//! ```text
//! cargo run --release --example compare_estimators -- [max_epochs]
//! ```

use jlstm::dynamics::{generate_dataset, vdp_model};
use jlstm::evaluation::{evaluate, out_of_region_testset, Estimator};
use jlstm::networks::{init_params, Arch};
use jlstm::training::{preset, train};

fn main() -> jlstm::Result<()> {
    let max_epochs: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(60);
    let model = vdp_model();
    let data = generate_dataset(&model, 300, 100, 5)?;
    let mut estimators = vec![Estimator::Ekf];
    for arch in [Arch::Jlstm, Arch::Elstm] {
        let mut p = preset("vdp", arch, 5)?;
        p.train.max_epochs = max_epochs;
        let (params, record) = train(&data, init_params(&p.network)?, &p.train)?;
        println!(
            "{arch}: best validation loss {:.5} at epoch {} in {:.1} s",
            record.best_val_loss, record.best_epoch, record.seconds
        );
        estimators.push(Estimator::Network(Box::new(params)));
    }

    let inside = evaluate(&model, &data.test, &estimators)?;
    let region = model.oor_region.clone().expect("vdp has an out-of-region box");
    let outside_set = out_of_region_testset(&model, &region, 300, 10, 99)?;
    let outside = evaluate(&model, &outside_set, &estimators)?;
    println!("{:<6} {:>10} {:>10} {:>10}", "", "NMSE", "NMSE OOR", "test s");
    for (a, b) in inside.entries.iter().zip(&outside.entries) {
        println!("{:<6} {:>10.5} {:>10.5} {:>10.4}", a.name, a.nmse, b.nmse, a.test_seconds);
    }
    // Average error over the first ten steps, where the initial condition matters most.
    for e in &outside.entries {
        let early = e.error_curve[..10].iter().sum::<f64>() / 10.0;
        println!("{:<6} mean OOR error over the first 10 steps {early:.4}", e.name);
    }
    Ok(())
}
