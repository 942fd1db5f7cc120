use criterion::{criterion_group, criterion_main, Criterion};
use tinstitch_bench::{image, reference, toy};
use tinstitch_core::pipeline::stylize_tensor;
use tinstitch_core::tiler::plan_tiles;
use tinstitch_core::PipelineConfig;

fn plan(c: &mut Criterion) {
    c.bench_function("plan_tiles_10000", |b| b.iter(|| plan_tiles(10000, 10000, 1064, 1000).unwrap()));
}

fn toy_pipeline(c: &mut Criterion) {
    let net = toy();
    let img = image(512, 512, 1);
    let mut g = c.benchmark_group("toy_512");
    g.sample_size(20);
    for workers in [1, 4] {
        let cfg = PipelineConfig { patch_size: 96, stride: 64, thumb_short_side: 256, workers, ..Default::default() };
        g.bench_function(format!("workers{workers}"), |b| b.iter(|| stylize_tensor(&net, &img, None, &cfg).unwrap()));
    }
    g.finish();
}

fn reference_pipeline(c: &mut Criterion) {
    let net = reference(8);
    let img = image(384, 256, 2);
    let style = image(128, 128, 3);
    let cfg = PipelineConfig { patch_size: 136, stride: 120, thumb_short_side: 128, style_size: 128, ..Default::default() };
    let mut g = c.benchmark_group("reference_384x256");
    g.sample_size(10);
    g.bench_function("stylize", |b| b.iter(|| stylize_tensor(&net, &img, Some(&style), &cfg).unwrap()));
    g.finish();
}

criterion_group!(benches, plan, toy_pipeline, reference_pipeline);
criterion_main!(benches);
