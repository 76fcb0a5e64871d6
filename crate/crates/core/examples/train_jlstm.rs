//! Train a Jordan LSTM on Van der Pol data and save the best checkpoint.
//!
//! ```text
//! cargo run --release --example train_jlstm -- [epochs]
//! ```

use jlstm::dynamics::{generate_dataset, vdp_model};
use jlstm::networks::{init_params, load_checkpoint, save_checkpoint, Arch};
use jlstm::training::{mean_loss, preset, train_with};

fn main() -> jlstm::Result<()> {
    let epochs: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(40);
    let model = vdp_model();
    let data = generate_dataset(&model, 300, 100, 21)?;
    let mut p = preset("vdp", Arch::Jlstm, 21)?;
    p.train.max_epochs = epochs;
    println!(
        "lr {} batch {} patience {} hidden {}",
        p.train.learning_rate, p.train.batch_size, p.train.patience, p.network.hidden
    );
    let (params, record) = train_with(&data, init_params(&p.network)?, &p.train, |r| {
        if r.epoch % 5 == 0 || r.improved {
            println!(
                "epoch {:>4}  train {:.5}  val {:.5}  {:.1} s{}",
                r.epoch,
                r.train_loss,
                r.val_loss,
                r.elapsed,
                if r.improved { "  *" } else { "" }
            );
        }
        Ok(())
    })?;
    println!(
        "best validation loss {:.5} at epoch {} (stopped at {})",
        record.best_val_loss, record.best_epoch, record.stopped_epoch
    );

    let path = std::env::temp_dir().join("jlstm_vdp_checkpoint.json");
    save_checkpoint(&params, &path)?;
    let restored = load_checkpoint(&path)?;
    assert_eq!(mean_loss(&restored, &data.val)?, record.best_val_loss);
    println!("checkpoint written to {}", path.display());
    Ok(())
}
