//! Learned power allocation: CSI prediction with an LSTM-ARMA model and a
//! DQN search over the NGSO 1 transmit power, plus the fixed-beam baselines.

pub mod arma;
pub mod checkpoint;
pub mod csi;
pub mod dqn;
pub mod lstm;
pub mod nn;
pub mod power;
pub mod predictor;

pub use csi::{link_stream, CsiSynthesizer};
pub use dqn::{DqnConfig, QNetwork, Transition};
pub use power::{
    allocate_power, baseline_pfpfb, baseline_ppafb, exhaustive_optimum, AllocationResult, AllocatorConfig,
    DqnAllocator, PowerProblem,
};
pub use predictor::{predict_csi, train_predictor, CsiHistory, PredictorConfig, PredictorModel};
