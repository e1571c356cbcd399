//! Training-data export: per-block raw features and oracle targets.
//!
//! File layout: one JSON header line, then `frames` records of little-endian
//! `f32`: `feature_dim` raw log-powers, `target_dim` target magnitudes `|s̃|`
//! and `target_dim` prior-error magnitudes `|ẽ⁺|`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{EchoCanceller, MaskSource, RunConfig, StreamInputs, TruthBlock};
use crate::error::{check_len, Error, Result};
use crate::postfilter::FeatureStats;

pub const DATASET_FORMAT: &str = "aec-features";
pub const DATASET_VERSION: u32 = 1;
/// Lower bound on exported feature deviations.
pub const STD_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format: String,
    pub version: u32,
    pub dft_len: usize,
    pub block_shift: usize,
    pub eps1: f64,
    pub feature_dim: usize,
    pub target_dim: usize,
    pub frames: usize,
    /// Frames per exported sequence, in file order.
    pub sequences: Vec<usize>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl DatasetHeader {
    pub fn stats(&self) -> Result<FeatureStats> {
        FeatureStats::new(self.mean.clone(), self.std.clone())
    }

    fn record_len(&self) -> usize {
        self.feature_dim + 2 * self.target_dim
    }
}

/// One exported block.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetFrame {
    pub features: Vec<f32>,
    pub target: Vec<f32>,
    pub error: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub frames: Vec<DatasetFrame>,
}

/// Runs the engine with the oracle mask over each sequence and writes the
/// dataset to `path`. Every sequence must carry its true near-end and
/// interference.
pub fn export_training_data(config: &RunConfig, sequences: &[StreamInputs<'_>], path: impl AsRef<Path>) -> Result<DatasetHeader> {
    let cfg = RunConfig { mask: MaskSource::Oracle, ..config.clone() };
    let spec = cfg.spec()?;
    let (r, m) = (spec.shift(), spec.dft_len());
    let half = m / 2 + 1;

    let mut frames = Vec::new();
    let mut lengths = Vec::with_capacity(sequences.len());
    for seq in sequences {
        let (Some(near), Some(inter)) = (seq.near_end, seq.interference) else {
            return Err(Error::Config("training export needs near-end and interference ground truth".into()));
        };
        let n = seq.mic.len();
        check_len("far-end signal", n, seq.far_end.len())?;
        check_len("near-end truth", n, near.len())?;
        check_len("interference truth", n, inter.len())?;
        let mut aec = EchoCanceller::new(cfg.clone())?;
        let blocks = n / r;
        for k in 0..blocks {
            let span = k * r..(k + 1) * r;
            let truth = TruthBlock { near_end: &near[span.clone()], interference: &inter[span.clone()] };
            aec.process_block(&seq.far_end[span.clone()], &seq.mic[span], Some(truth))?;
            let target = aec.last_near_end_frame().expect("truth supplied")[..half]
                .iter()
                .map(|c| c.norm() as f32)
                .collect();
            let error = aec.last_error_frame()[..half].iter().map(|c| c.norm() as f32).collect();
            let features = aec.raw_features()?.into_iter().map(|v| v as f32).collect();
            frames.push(DatasetFrame { features, target, error });
        }
        lengths.push(blocks);
    }

    let (mean, std) = feature_moments(&frames, 2 * half);
    let header = DatasetHeader {
        format: DATASET_FORMAT.into(),
        version: DATASET_VERSION,
        dft_len: m,
        block_shift: r,
        eps1: cfg.eps1,
        feature_dim: 2 * half,
        target_dim: half,
        frames: frames.len(),
        sequences: lengths,
        mean,
        std,
    };
    write_dataset(path, &Dataset { header: header.clone(), frames })?;
    Ok(header)
}

/// Per-feature mean and population deviation (floored at [`STD_FLOOR`]).
fn feature_moments(frames: &[DatasetFrame], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = frames.len().max(1) as f64;
    let mut mean = vec![0.0; dim];
    for f in frames {
        for (m, &v) in mean.iter_mut().zip(&f.features) {
            *m += v as f64;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for f in frames {
        for ((s, &v), m) in var.iter_mut().zip(&f.features).zip(&mean) {
            *s += (v as f64 - m).powi(2);
        }
    }
    let std = var.iter().map(|s| (s / n).sqrt().max(STD_FLOOR)).collect();
    (mean, std)
}

pub fn write_dataset(path: impl AsRef<Path>, dataset: &Dataset) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut out, &dataset.header)?;
    out.write_all(b"\n")?;
    for f in &dataset.frames {
        for v in f.features.iter().chain(&f.target).chain(&f.error) {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let header: DatasetHeader = serde_json::from_str(line.trim_end())
        .map_err(|e| Error::Dataset(format!("bad header: {e}")))?;
    if header.format != DATASET_FORMAT || header.version != DATASET_VERSION {
        return Err(Error::Dataset(format!("unsupported format {} v{}", header.format, header.version)));
    }
    if header.mean.len() != header.feature_dim || header.std.len() != header.feature_dim {
        return Err(Error::Dataset("statistics do not match feature_dim".into()));
    }
    if header.sequences.iter().sum::<usize>() != header.frames {
        return Err(Error::Dataset("sequence lengths do not add up to the frame count".into()));
    }
    let mut body = Vec::new();
    reader.read_to_end(&mut body)?;
    let rec = header.record_len();
    if body.len() != 4 * rec * header.frames {
        return Err(Error::Dataset(format!(
            "expected {} payload bytes, found {}",
            4 * rec * header.frames,
            body.len()
        )));
    }
    let values: Vec<f32> = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    let (fd, td) = (header.feature_dim, header.target_dim);
    let frames = values
        .chunks_exact(rec)
        .map(|r| DatasetFrame {
            features: r[..fd].to_vec(),
            target: r[fd..fd + td].to_vec(),
            error: r[fd + td..].to_vec(),
        })
        .collect();
    Ok(Dataset { header, frames })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::interference;
    use crate::scenario::{Scenario, ScenarioConfig, SourceKind};

    fn scenario(ner: Option<f64>, seed: u64) -> Scenario {
        Scenario::generate(&ScenarioConfig {
            duration: 1.0,
            filter_len: 128,
            rir_len: 200,
            rir_t60: 0.05,
            block_shift: 32,
            ner_db: ner,
            seed,
            far_end: SourceKind::WhiteNoise,
            ..Default::default()
        })
        .unwrap()
    }

    fn config() -> RunConfig {
        RunConfig { block_shift: 32, partitions: 4, ..Default::default() }
    }

    #[test]
    fn silent_near_end_gives_zero_targets() {
        let dir = tempfile::tempdir().unwrap();
        let sc = scenario(None, 1);
        let inter = interference(&sc);
        let inputs = StreamInputs::new(&sc.far_end, &sc.mic).with_truth(&sc.near_end, &inter);
        let header = export_training_data(&config(), &[inputs], dir.path().join("d.bin")).unwrap();
        let ds = read_dataset(dir.path().join("d.bin")).unwrap();
        assert_eq!(ds.header, header);
        assert_eq!(header.frames, 16_000 / 32);
        assert!(ds.frames.iter().all(|f| f.target.iter().all(|&t| t == 0.0)));
        assert_eq!(ds.frames[0].features.len(), 2 * 33);
    }

    #[test]
    fn one_frame_per_block_across_sequences() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (scenario(Some(0.0), 2), scenario(Some(5.0), 3));
        let (ia, ib) = (interference(&a), interference(&b));
        let seqs = [
            StreamInputs::new(&a.far_end, &a.mic).with_truth(&a.near_end, &ia),
            StreamInputs::new(&b.far_end[..3200], &b.mic[..3200]).with_truth(&b.near_end[..3200], &ib[..3200]),
        ];
        let header = export_training_data(&config(), &seqs, dir.path().join("d.bin")).unwrap();
        assert_eq!(header.sequences, vec![500, 100]);
        assert_eq!(header.frames, 600);
        assert!(header.std.iter().all(|&s| s >= STD_FLOOR));
    }

    #[test]
    fn missing_truth_is_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let x = vec![0.1; 320];
        let err = export_training_data(&config(), &[StreamInputs::new(&x, &x)], dir.path().join("d.bin"));
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn truncated_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let sc = scenario(Some(0.0), 4);
        let inter = interference(&sc);
        let path = dir.path().join("d.bin");
        let inputs = StreamInputs::new(&sc.far_end, &sc.mic).with_truth(&sc.near_end, &inter);
        export_training_data(&config(), &[inputs], &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(read_dataset(&path), Err(Error::Dataset(_))));
    }
}
