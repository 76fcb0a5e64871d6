//! Elman and Jordan recurrent estimators (simple and LSTM cells), with
//! forward propagation and backpropagation through time.

mod bptt;
mod cell;
mod checkpoint;
mod config;
mod params;

pub use bptt::{bptt_gradients, bptt_gradients_truncated};
pub use cell::{
    elstm_step, ern_step, estimate_sequence, forward_sequence, jlstm_step, jrn_step, sigmoid, Gates, NetworkState,
    Tape,
};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_FORMAT};
pub use config::{count_params, Arch, NetworkConfig, RecurrentActivation};
pub use params::{init_params, GradientSet, NetworkParams, Weights};

pub(crate) use bptt::accumulate_gradients;
