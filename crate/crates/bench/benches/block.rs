use aec_bench::{fixture, warmed_canceller};
use aec_core::dsp::{pbc_early_echo, BlockSpec, Dft, FarEndBuffer};
use aec_core::engine::{Estimator, RunConfig};
use aec_core::postfilter::{infer_mask, FeatureVector, NetworkWeights, RecurrentState};
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn per_block(c: &mut Criterion) {
    let sc = fixture();
    let r = RunConfig::default().block_shift;
    let blocks: Vec<(&[f64], &[f64])> = sc
        .far_end
        .chunks_exact(r)
        .zip(sc.mic.chunks_exact(r))
        .collect();
    let mut group = c.benchmark_group("process_block");
    for (name, estimator) in [
        ("proposed", Estimator::Proposed),
        ("baseline", Estimator::Baseline { alpha: 0.5 }),
    ] {
        let mut aec = warmed_canceller(
            RunConfig {
                estimator,
                ..Default::default()
            },
            &sc,
        );
        let mut k = 0;
        group.bench_function(name, |b| {
            b.iter(|| {
                let (far, mic) = blocks[k % blocks.len()];
                k += 1;
                black_box(aec.process_block(far, mic, None).unwrap())
            })
        });
    }
    group.finish();
}

fn partitioned_convolution(c: &mut Criterion) {
    let mut group = c.benchmark_group("pbc_early_echo");
    for partitions in [1, 4, 8, 16] {
        let spec = BlockSpec::new(256, partitions).unwrap();
        let dft = Dft::new(512);
        let mut buf = FarEndBuffer::new(spec);
        buf.advance(&dft, &[0.1; 256]).unwrap();
        let filters = vec![dft.forward(&[0.01; 512]).unwrap(); partitions];
        group.bench_with_input(
            BenchmarkId::from_parameter(partitions),
            &partitions,
            |b, _| b.iter(|| black_box(pbc_early_echo(&filters, &buf, &dft).unwrap())),
        );
    }
    group.finish();
}

fn mask_inference(c: &mut Criterion) {
    let (input, output) = NetworkWeights::dims_for(512);
    let w = NetworkWeights::random(input, 64, output, 0.1, 3);
    let x = FeatureVector(vec![0.5; input]);
    let state = RecurrentState::zeros(64);
    c.bench_function("infer_mask", |b| {
        b.iter(|| black_box(infer_mask(&w, &x, &state).unwrap()))
    });
}

criterion_group!(benches, per_block, partitioned_convolution, mask_inference);
criterion_main!(benches);
