//! Recurrent mask estimator: dense(tanh) → GRU → GRU → dense(sigmoid).
//!
//! GRU convention (tag 1 in the weights file):
//!
//! ```text
//! z  = σ(W_z x + U_z h + b_z)
//! r  = σ(W_r x + U_r h + b_r)
//! n  = tanh(W_n x + r ⊙ (U_n h) + b_n)
//! h' = (1 − z) ⊙ n + z ⊙ h
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::features::{FeatureStats, FeatureVector};
use super::mask::MaskFrame;
use crate::error::{check_len, Error, Result};

pub const WEIGHTS_MAGIC: &[u8; 4] = b"AECW";
pub const WEIGHTS_VERSION: u32 = 1;
pub const GRU_CONVENTION: u32 = 1;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Row-major `rows × cols` matrix with bias, `y = W x + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Dense {
    pub fn new(rows: usize, cols: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        check_len("dense weights", rows * cols, weights.len())?;
        check_len("dense bias", rows, bias.len())?;
        Ok(Self {
            rows,
            cols,
            weights,
            bias,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            weights: vec![0.0; rows * cols],
            bias: vec![0.0; rows],
        }
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.cols)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }

    /// `W x` without bias.
    fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(x).map(|(w, v)| w * v).sum())
            .collect()
    }
}

/// One GRU layer. Input-to-hidden matrices are `hidden × input`,
/// hidden-to-hidden matrices `hidden × hidden`.
#[derive(Clone, Debug, PartialEq)]
pub struct GruLayer {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// `W_z, W_r, W_n` carrying `b_z, b_r, b_n` as their biases.
    pub w: [Dense; 3],
    /// `U_z, U_r, U_n` (their bias fields are unused and zero).
    pub u: [Dense; 3],
}

impl GruLayer {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            w: std::array::from_fn(|_| Dense::zeros(hidden_dim, input_dim)),
            u: std::array::from_fn(|_| Dense::zeros(hidden_dim, hidden_dim)),
        }
    }

    pub fn step(&self, x: &[f64], h: &[f64]) -> Result<Vec<f64>> {
        check_len("gru input", self.input_dim, x.len())?;
        check_len("gru state", self.hidden_dim, h.len())?;
        let [wz, wr, wn] = &self.w;
        let [uz, ur, un] = &self.u;
        let z: Vec<f64> = wz.apply(x).iter().zip(uz.matvec(h)).map(|(a, b)| sigmoid(a + b)).collect();
        let r: Vec<f64> = wr.apply(x).iter().zip(ur.matvec(h)).map(|(a, b)| sigmoid(a + b)).collect();
        let wn_x = wn.apply(x);
        let un_h = un.matvec(h);
        let n = wn_x.iter().zip(&r).zip(un_h).map(|((a, r), b)| (a + r * b).tanh());
        Ok(n.zip(&z)
            .zip(h)
            .map(|((n, z), h)| (1.0 - z) * n + z * h)
            .collect())
    }
}

/// See [`GruLayer::step`].
pub fn gru_step(layer: &GruLayer, x: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    layer.step(x, h)
}

/// Hidden states of both GRU layers.
#[derive(Clone, Debug, PartialEq)]
pub struct RecurrentState {
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
}

impl RecurrentState {
    pub fn zeros(hidden_dim: usize) -> Self {
        Self {
            h1: vec![0.0; hidden_dim],
            h2: vec![0.0; hidden_dim],
        }
    }
}

/// Complete mask-network parameter set including feature statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkWeights {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    pub stats: FeatureStats,
    pub dense_in: Dense,
    pub gru1: GruLayer,
    pub gru2: GruLayer,
    pub dense_out: Dense,
}

impl NetworkWeights {
    /// All-zero parameters with identity feature statistics.
    pub fn zeros(input_dim: usize, hidden_dim: usize, output_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            output_dim,
            stats: FeatureStats::identity(input_dim),
            dense_in: Dense::zeros(hidden_dim, input_dim),
            gru1: GruLayer::zeros(hidden_dim, hidden_dim),
            gru2: GruLayer::zeros(hidden_dim, hidden_dim),
            dense_out: Dense::zeros(output_dim, hidden_dim),
        }
    }

    /// Uniform random parameters in `[-scale, scale]`, deterministic per seed.
    pub fn random(input_dim: usize, hidden_dim: usize, output_dim: usize, scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = Self::zeros(input_dim, hidden_dim, output_dim);
        w.for_each_param(|p| *p = rng.random_range(-scale..=scale));
        w
    }

    /// Dimensions matching a block geometry: `M/2 + 1` gains from
    /// `2·(M/2 + 1)` features.
    pub fn dims_for(dft_len: usize) -> (usize, usize) {
        let half = dft_len / 2 + 1;
        (2 * half, half)
    }

    fn for_each_param(&mut self, mut f: impl FnMut(&mut f64)) {
        let mut visit = |d: &mut Dense, with_bias: bool| {
            d.weights.iter_mut().for_each(&mut f);
            if with_bias {
                d.bias.iter_mut().for_each(&mut f);
            }
        };
        visit(&mut self.dense_in, true);
        for layer in [&mut self.gru1, &mut self.gru2] {
            for d in layer.w.iter_mut() {
                visit(d, true);
            }
            for d in layer.u.iter_mut() {
                visit(d, false);
            }
        }
        visit(&mut self.dense_out, true);
    }

    /// Serializes to the little-endian `AECW` layout.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(WEIGHTS_MAGIC);
        for v in [
            WEIGHTS_VERSION,
            GRU_CONVENTION,
            self.input_dim as u32,
            self.hidden_dim as u32,
            self.output_dim as u32,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let mut put = |xs: &[f64]| {
            for &x in xs {
                out.extend_from_slice(&(x as f32).to_le_bytes());
            }
        };
        put(self.stats.mean());
        put(self.stats.std());
        put(&self.dense_in.weights);
        put(&self.dense_in.bias);
        for layer in [&self.gru1, &self.gru2] {
            for d in &layer.w {
                put(&d.weights);
            }
            for d in &layer.u {
                put(&d.weights);
            }
            for d in &layer.w {
                put(&d.bias);
            }
        }
        put(&self.dense_out.weights);
        put(&self.dense_out.bias);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 24 || &bytes[..4] != WEIGHTS_MAGIC {
            return Err(Error::Weights("missing AECW header".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
        let (version, convention) = (word(0), word(1));
        if version != WEIGHTS_VERSION {
            return Err(Error::Weights(format!("unsupported version {version}")));
        }
        if convention != GRU_CONVENTION {
            return Err(Error::Weights(format!("unsupported gate convention {convention}")));
        }
        let (input, hidden, output) = (word(2) as usize, word(3) as usize, word(4) as usize);
        if input == 0 || hidden == 0 || output == 0 {
            return Err(Error::Weights("zero-sized layer".into()));
        }
        let gru_params = 3 * hidden * hidden + 3 * hidden * hidden + 3 * hidden;
        let expected = 2 * input + hidden * input + hidden + 2 * gru_params + output * hidden + output;
        let body = &bytes[24..];
        if body.len() != 4 * expected {
            return Err(Error::Weights(format!(
                "expected {} payload bytes for dims ({input}, {hidden}, {output}), found {}",
                4 * expected,
                body.len()
            )));
        }
        let mut values = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64);
        let mut take = |n: usize| -> Vec<f64> { values.by_ref().take(n).collect() };

        let mean = take(input);
        let std = take(input);
        let stats = FeatureStats::new(mean, std).map_err(|e| Error::Weights(e.to_string()))?;
        let dense_in = Dense::new(hidden, input, take(hidden * input), take(hidden))?;
        let mut read_gru = || -> Result<GruLayer> {
            let w: Vec<Vec<f64>> = (0..3).map(|_| take(hidden * hidden)).collect();
            let u: Vec<Vec<f64>> = (0..3).map(|_| take(hidden * hidden)).collect();
            let b: Vec<Vec<f64>> = (0..3).map(|_| take(hidden)).collect();
            let mut layer = GruLayer::zeros(hidden, hidden);
            for g in 0..3 {
                layer.w[g] = Dense::new(hidden, hidden, w[g].clone(), b[g].clone())?;
                layer.u[g] = Dense::new(hidden, hidden, u[g].clone(), vec![0.0; hidden])?;
            }
            Ok(layer)
        };
        let gru1 = read_gru()?;
        let gru2 = read_gru()?;
        let dense_out = Dense::new(output, hidden, take(output * hidden), take(output))?;
        let weights = Self {
            input_dim: input,
            hidden_dim: hidden,
            output_dim: output,
            stats,
            dense_in,
            gru1,
            gru2,
            dense_out,
        };
        let mut finite = true;
        weights.clone().for_each_param(|p| finite &= p.is_finite());
        if !finite {
            return Err(Error::Weights("non-finite parameter".into()));
        }
        Ok(weights)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    /// Rounds every parameter through `f32`, matching what a file round
    /// trip produces.
    pub fn quantized(&self) -> Self {
        let mut w = self.clone();
        w.for_each_param(|p| *p = *p as f32 as f64);
        let q = |v: &[f64]| v.iter().map(|&x| x as f32 as f64).collect::<Vec<_>>();
        w.stats = FeatureStats::new(q(self.stats.mean()), q(self.stats.std())).expect("valid stats");
        w
    }
}

/// Runs the network for one frame and returns the full-length mask
/// (non-redundant gains mirrored to all `M` bins).
pub fn infer_mask(
    weights: &NetworkWeights,
    features: &FeatureVector,
    state: &RecurrentState,
) -> Result<(MaskFrame, RecurrentState)> {
    check_len("network input", weights.input_dim, features.len())?;
    let half = infer_half_mask(weights, features.values(), state)?;
    let dft_len = 2 * (weights.output_dim - 1);
    Ok((MaskFrame::from_half(&half.0, dft_len)?, half.1))
}

/// Forward pass returning the `output_dim` sigmoid gains.
pub fn infer_half_mask(
    weights: &NetworkWeights,
    features: &[f64],
    state: &RecurrentState,
) -> Result<(Vec<f64>, RecurrentState)> {
    check_len("network input", weights.input_dim, features.len())?;
    let hidden: Vec<f64> = weights.dense_in.apply(features).into_iter().map(f64::tanh).collect();
    let h1 = weights.gru1.step(&hidden, &state.h1)?;
    let h2 = weights.gru2.step(&h1, &state.h2)?;
    let gains = weights
        .dense_out
        .apply(&h2)
        .into_iter()
        .map(sigmoid)
        .collect();
    Ok((gains, RecurrentState { h1, h2 }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gru_halves_state() {
        let layer = GruLayer::zeros(3, 2);
        let h = gru_step(&layer, &[1.0, -2.0, 0.5], &[0.4, -0.8]).unwrap();
        assert_eq!(h, vec![0.2, -0.4]);
    }

    #[test]
    fn saturated_update_gate_keeps_zero_state() {
        let mut layer = GruLayer::random_for_test(3, 4, 5);
        layer.w[0].bias.fill(50.0);
        let h = gru_step(&layer, &[0.3, -0.1, 0.9], &[0.0; 4]).unwrap();
        assert!(h.iter().all(|v| v.abs() < 1e-20));
    }

    #[test]
    fn gru_matches_reference_formulas() {
        let layer = GruLayer::random_for_test(3, 4, 11);
        let x = [0.2, -0.7, 1.1];
        let h = [0.1, -0.3, 0.5, 0.0];
        let out = gru_step(&layer, &x, &h).unwrap();

        // independent transcription with explicit index loops
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let lin = |d: &Dense, v: &[f64], i: usize, bias: bool| -> f64 {
            let mut acc = if bias { d.bias[i] } else { 0.0 };
            for j in 0..d.cols {
                acc += d.weights[i * d.cols + j] * v[j];
            }
            acc
        };
        for i in 0..4 {
            let z = sig(lin(&layer.w[0], &x, i, true) + lin(&layer.u[0], &h, i, false));
            let r = sig(lin(&layer.w[1], &x, i, true) + lin(&layer.u[1], &h, i, false));
            let n = (lin(&layer.w[2], &x, i, true) + r * lin(&layer.u[2], &h, i, false)).tanh();
            let expected = (1.0 - z) * n + z * h[i];
            assert!((out[i] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_network_outputs_half() {
        let (input, output) = NetworkWeights::dims_for(16);
        let w = NetworkWeights::zeros(input, 8, output);
        let (mask, _) = infer_mask(&w, &FeatureVector(vec![0.3; input]), &RecurrentState::zeros(8)).unwrap();
        assert_eq!(mask.len(), 16);
        assert!(mask.gains().iter().all(|&g| g == 0.5));
    }

    #[test]
    fn negative_output_bias_suppresses() {
        let (input, output) = NetworkWeights::dims_for(16);
        let mut w = NetworkWeights::random(input, 8, output, 0.1, 3);
        w.dense_out.bias_mut().fill(-50.0);
        let (mask, _) = infer_mask(&w, &FeatureVector(vec![1.0; input]), &RecurrentState::zeros(8)).unwrap();
        assert!(mask.gains().iter().all(|&g| g < 1e-15));
    }

    #[test]
    fn input_dimension_checked() {
        let w = NetworkWeights::zeros(10, 4, 5);
        assert!(infer_mask(&w, &FeatureVector(vec![0.0; 9]), &RecurrentState::zeros(4)).is_err());
    }

    #[test]
    fn bytes_round_trip_and_header() {
        let w = NetworkWeights::random(6, 3, 4, 0.5, 1).quantized();
        let bytes = w.to_bytes();
        assert_eq!(&bytes[..4], b"AECW");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
        assert_eq!(NetworkWeights::from_bytes(&bytes).unwrap(), w);
    }

    #[test]
    fn malformed_weights_rejected() {
        let w = NetworkWeights::random(6, 3, 4, 0.5, 1);
        let mut bytes = w.to_bytes();
        bytes.pop();
        assert!(NetworkWeights::from_bytes(&bytes).is_err());
        let mut bytes = w.to_bytes();
        bytes[8] = 2; // convention tag
        assert!(NetworkWeights::from_bytes(&bytes).is_err());
        assert!(NetworkWeights::from_bytes(b"NOPE").is_err());
    }

    impl GruLayer {
        fn random_for_test(input: usize, hidden: usize, seed: u64) -> Self {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut layer = GruLayer::zeros(input, hidden);
            for d in layer.w.iter_mut() {
                d.weights.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
                d.bias.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
            }
            for d in layer.u.iter_mut() {
                d.weights.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
            }
            layer
        }
    }
}
