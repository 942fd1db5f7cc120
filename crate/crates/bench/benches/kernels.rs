use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use tinstitch_bench::conv_weights;
use tinstitch_core::normstats::{channel_stats, thumbnail_instance_norm, thumbnail_instance_whiten, whitening_stats, AffineParams, EPS};
use tinstitch_core::synth::random_normal;
use tinstitch_core::tensor::{conv2d, maxpool2, resize_bilinear, PadMode, PadSpec};
use tinstitch_core::Dims;

fn conv(c: &mut Criterion) {
    let mut g = c.benchmark_group("conv3x3");
    for (ch, size) in [(8, 128), (32, 64), (64, 64)] {
        let x = random_normal(Dims::new(1, ch, size, size), 1);
        let w = conv_weights(ch, ch, 3);
        g.throughput(Throughput::Elements((ch * ch * 9 * size * size) as u64));
        g.bench_with_input(BenchmarkId::from_parameter(format!("c{ch}_{size}")), &x, |b, x| {
            b.iter(|| conv2d(x, &w, 1, PadSpec::uniform(PadMode::Reflect, 1)).unwrap())
        });
    }
    g.finish();
}

fn resample(c: &mut Criterion) {
    let x = random_normal(Dims::new(1, 16, 256, 256), 2);
    c.bench_function("maxpool2_16x256", |b| b.iter(|| maxpool2(&x)));
    c.bench_function("resize_bilinear_16x256_to_512", |b| b.iter(|| resize_bilinear(&x, 512, 512).unwrap()));
}

fn normalization(c: &mut Criterion) {
    let x = random_normal(Dims::new(1, 64, 128, 128), 3);
    let stats = channel_stats(&x, EPS).unwrap();
    let affine = AffineParams::identity(64);
    c.bench_function("channel_stats_64x128", |b| b.iter(|| channel_stats(&x, EPS).unwrap()));
    c.bench_function("tin_apply_64x128", |b| b.iter(|| thumbnail_instance_norm(&x, &stats, &affine).unwrap()));
    let ws = whitening_stats(&x, EPS).unwrap();
    c.bench_function("whitening_stats_64x128", |b| b.iter(|| whitening_stats(&x, EPS).unwrap()));
    c.bench_function("tiw_apply_64x128", |b| b.iter(|| thumbnail_instance_whiten(&x, &ws).unwrap()));
}

criterion_group!(benches, conv, resample, normalization);
criterion_main!(benches);
