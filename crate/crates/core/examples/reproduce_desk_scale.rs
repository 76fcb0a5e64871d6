//! Full pipeline through the experiment API: dataset, training, reports on disk.
//!
//! ```text
//! cargo run --release --example reproduce_desk_scale -- [system] [out_dir]
//! ```
//!
//! Uses the desk-scale configuration and one worker thread, so two runs with
//! the same seed write the same `summary.csv` apart from timing columns.

use jlstm::experiment::{cmd_reproduce, desk_scale, with_threads, ExperimentSpec};

fn main() -> jlstm::Result<()> {
    let mut args = std::env::args().skip(1);
    let system = args.next().unwrap_or_else(|| "vdp".into());
    let out = args.next().unwrap_or_else(|| format!("runs/{system}_desk"));
    let desk = desk_scale(&system)?;
    println!(
        "{system}: {} sequences of length {}, at most {} epochs, patience {}",
        desk.sequence_count, desk.sequence_length, desk.max_epochs, desk.patience
    );
    let mut spec = ExperimentSpec::new(&system)?.with_desk_scale(true)?.with_out(&out);
    spec.verbose = true;
    let run = with_threads(Some(1), || cmd_reproduce(&spec))??;
    for (arch, _, record) in &run.trained {
        println!("{arch}: {} epochs, best at {}", record.epochs(), record.best_epoch);
    }
    for row in &run.evaluation.rows {
        println!(
            "{:<6} nmse {:.5}  oor {}",
            row.estimator,
            row.nmse,
            row.nmse_oor.map_or("-".into(), |v| format!("{v:.5}"))
        );
    }
    println!("reports in {}", spec.report_dir().display());
    Ok(())
}
