use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;
use vcod_core::corrpyr::{cab_forward, normalized_correlation, ChannelMixer, FeatureMap};
use vcod_core::metrics::{evaluate_frames, FramePair};
use vcod_core::pseudolabel::{warp_mask, FlowField};
use vcod_core::{par, DenseArray, MaskImage};

fn feature(rng: &mut impl Rng, c: usize, h: usize, w: usize) -> FeatureMap {
    let v = (0..c * h * w).map(|_| rng.gen_range(-1.0..1.0)).collect();
    FeatureMap::new(DenseArray::new(vec![c, h, w], v).unwrap()).unwrap()
}

fn blob(rng: &mut impl Rng, h: usize, w: usize) -> MaskImage {
    let (cy, cx, r) = (
        rng.gen_range(0..h) as f64,
        rng.gen_range(0..w) as f64,
        rng.gen_range(4.0..20.0),
    );
    let v = (0..h * w)
        .map(|i| {
            let (y, x) = ((i / w) as f64, (i % w) as f64);
            f64::from((y - cy).hypot(x - cx) < r)
        })
        .collect();
    MaskImage::binary(h, w, v).unwrap()
}

/// Runs `f` once per scheduler so the two show up side by side.
fn both(c: &mut Criterion, group: &str, mut f: impl FnMut()) {
    let mut g = c.benchmark_group(group);
    g.bench_function(BenchmarkId::from_parameter("parallel"), |b| b.iter(&mut f));
    g.bench_function(BenchmarkId::from_parameter("sequential"), |b| {
        b.iter(|| par::sequential(&mut f))
    });
    g.finish();
}

fn correlation(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (a, b) = (feature(&mut rng, 32, 24, 24), feature(&mut rng, 32, 24, 24));
    both(c, "correlation_24x24", || {
        black_box(normalized_correlation(&a, &b).unwrap());
    });
    let phi = ChannelMixer::random(32, &mut rng);
    both(c, "cab_24x24_pool2", || {
        black_box(cab_forward(&a, &b, &phi, 2).unwrap());
    });
}

fn metrics(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pairs: Vec<FramePair> = (0..8)
        .map(|_| {
            let gt = blob(&mut rng, 96, 96);
            let p = (0..96 * 96).map(|_| rng.gen_range(0.0..1.0)).collect();
            FramePair::new(MaskImage::probability(96, 96, p).unwrap(), gt).unwrap()
        })
        .collect();
    both(c, "metrics_8x96x96", || {
        black_box(evaluate_frames(&pairs));
    });
}

fn warp(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mask = blob(&mut rng, 256, 256);
    let n = 256 * 256;
    let flow = FlowField::new(
        256,
        256,
        (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect(),
        (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect(),
    )
    .unwrap();
    both(c, "warp_256x256", || {
        black_box(warp_mask(&mask, &flow).unwrap());
    });
}

criterion_group!(benches, correlation, metrics, warp);
criterion_main!(benches);
