//! Simulate the three benchmark systems and write a dataset directory.
//!
//! ```text
//! cargo run --release --example simulate_systems -- [out_dir]
//! ```

use jlstm::dynamics::{generate_dataset, generate_trajectory, load_dataset, model_by_name, save_dataset};

fn main() -> jlstm::Result<()> {
    for name in ["springs", "pendulum", "vdp"] {
        let model = model_by_name(name)?;
        let traj = generate_trajectory(&model, model.default_length, &model.init_region, 1)?;
        let peak = traj.states.iter().flat_map(|x| x.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
        let last = traj.states.last().unwrap();
        println!(
            "{name:<9} n={:<2} m={:<2} dt={:<5} T={:<5} kind={:<12} max|x|={peak:.3} |x(T)|={:.3}",
            model.n,
            model.m,
            model.dt,
            traj.len(),
            model.kind().as_str(),
            last.norm()
        );
    }

    let out = std::env::args().nth(1).unwrap_or_else(|| "runs/example_data".into());
    let model = model_by_name("vdp")?;
    let data = generate_dataset(&model, 300, 100, 7)?;
    save_dataset(&data, &out)?;
    let back = load_dataset(&out)?;
    assert!(back.train == data.train && back.val == data.val && back.test == data.test);
    println!(
        "wrote {} vdp sequences to {out} (train {}, val {}, test {})",
        data.count(),
        data.train.len(),
        data.val.len(),
        data.test.len()
    );
    Ok(())
}
