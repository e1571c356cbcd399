//! Parity vectors: normalized feature frames with the masks another
//! implementation produced for them, used to check that both forward passes
//! agree.
//!
//! Layout (little-endian): magic `AECP`, version `u32`, frame count,
//! input dim and output dim as `u32`, then all feature frames and all
//! half-spectrum masks as `f32`, frame-major.

use std::fs;
use std::path::Path;

use super::network::{infer_half_mask, NetworkWeights, RecurrentState};
use crate::error::{check_len, Error, Result};

pub const PARITY_MAGIC: &[u8; 4] = b"AECP";
pub const PARITY_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct ParityVectors {
    pub input_dim: usize,
    pub output_dim: usize,
    /// Normalized features, processed in order from a zero recurrent state.
    pub features: Vec<Vec<f32>>,
    pub masks: Vec<Vec<f32>>,
}

impl ParityVectors {
    /// Records this implementation's masks for `features`.
    pub fn generate(weights: &NetworkWeights, features: Vec<Vec<f32>>) -> Result<Self> {
        let mut state = RecurrentState::zeros(weights.hidden_dim);
        let mut masks = Vec::with_capacity(features.len());
        for f in &features {
            let x: Vec<f64> = f.iter().map(|&v| v as f64).collect();
            let (gains, next) = infer_half_mask(weights, &x, &state)?;
            state = next;
            masks.push(gains.into_iter().map(|g| g as f32).collect());
        }
        Ok(Self { input_dim: weights.input_dim, output_dim: weights.output_dim, features, masks })
    }

    /// Largest absolute deviation between the stored masks and this
    /// implementation's forward pass.
    pub fn max_deviation(&self, weights: &NetworkWeights) -> Result<f64> {
        check_len("parity input dim", weights.input_dim, self.input_dim)?;
        check_len("parity output dim", weights.output_dim, self.output_dim)?;
        let ours = Self::generate(weights, self.features.clone())?;
        Ok(ours
            .masks
            .iter()
            .flatten()
            .zip(self.masks.iter().flatten())
            .map(|(a, b)| (*a as f64 - *b as f64).abs())
            .fold(0.0, f64::max))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(PARITY_MAGIC);
        for v in [PARITY_VERSION, self.features.len() as u32, self.input_dim as u32, self.output_dim as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in self.features.iter().flatten().chain(self.masks.iter().flatten()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 20 || &bytes[..4] != PARITY_MAGIC {
            return Err(Error::Weights("missing AECP header".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
        if word(0) != PARITY_VERSION as usize {
            return Err(Error::Weights(format!("unsupported parity version {}", word(0))));
        }
        let (frames, input, output) = (word(1), word(2), word(3));
        let body = &bytes[20..];
        if body.len() != 4 * frames * (input + output) {
            return Err(Error::Weights("parity payload size does not match its header".into()));
        }
        let values: Vec<f32> = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        let (feat, mask) = values.split_at(frames * input);
        Ok(Self {
            input_dim: input,
            output_dim: output,
            features: feat.chunks(input.max(1)).map(<[f32]>::to_vec).collect(),
            masks: mask.chunks(output.max(1)).map(<[f32]>::to_vec).collect(),
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }
}
