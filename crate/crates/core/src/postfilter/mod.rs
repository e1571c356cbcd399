//! Mask providers (recurrent network and ground-truth oracle), feature
//! extraction and near-end synthesis.

mod features;
mod mask;
mod network;
mod parity;

pub use features::{compute_features, normalize, FeatureFrames, FeatureStats, FeatureVector, LOG_POWER_FLOOR};
pub use mask::{
    apply_mask_os, oracle_mask, replay_masks, synthesize_near_end, MaskFrame, NearEndSynthesizer,
    ORACLE_MASK_EPS,
};
pub use network::{
    gru_step, infer_half_mask, infer_mask, Dense, GruLayer, NetworkWeights, RecurrentState,
    GRU_CONVENTION, WEIGHTS_MAGIC, WEIGHTS_VERSION,
};
pub use parity::{ParityVectors, PARITY_MAGIC, PARITY_VERSION};
