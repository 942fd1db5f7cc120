use std::fs;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use log::warn;
use tinstitch_core::image_io::{load_png, save_png};
use tinstitch_core::metrics::{gram_consistency, window_outputs, FeatureExtractor};
use tinstitch_core::network::{load_network, zoo, NormVariant};
use tinstitch_core::pipeline::{
    convergence, estimate_memory, stats_sweep, stylize, stylize_tensor, MemoryReport, OwnershipSink, PngBandSink,
};
use tinstitch_core::synth::{natural_image, random_image};
use tinstitch_core::tensor::TensorRef;
use tinstitch_core::tiler::plan_tiles;
use tinstitch_core::{alloc, Dims, Network, StatsBank, TilePlan};

use crate::args::{Builtin, Cli, Command, InitArgs, MemArgs, NetworkArgs, SeamArgs, StylizeArgs, SweepArgs, SynthArgs};

pub const THREADS_ENV: &str = "TINSTITCH_THREADS";

/// Tiled output above this deviation from the whole-image run fails the
/// seam check.
const SEAM_TOLERANCE: f32 = 1e-4;

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Stylize(a) => cmd_stylize(a),
        Command::StatsSweep(a) => cmd_stats_sweep(a),
        Command::SeamCheck(a) => cmd_seam_check(a),
        Command::MemReport(a) => cmd_mem_report(a),
        Command::InitNetwork(a) => cmd_init_network(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

fn threads() -> Option<String> {
    std::env::var(THREADS_ENV).ok()
}

fn load(graph: &std::path::Path, weights: &std::path::Path) -> Result<Network> {
    load_network(graph, weights).with_context(|| format!("loading network {} + {}", graph.display(), weights.display()))
}

fn network_or(args: &NetworkArgs, builtin: impl FnOnce() -> Network) -> Result<Network> {
    match (&args.graph, &args.weights) {
        (Some(g), Some(w)) => load(g, w),
        _ => Ok(builtin()),
    }
}

fn toy() -> Network {
    let (g, w) = zoo::toy_network();
    Network::new(g, &w).expect("toy network binds")
}

fn cmd_stylize(a: StylizeArgs) -> Result<()> {
    let cfg = a.pipeline.config(a.allow_in, threads().as_deref())?;
    let net = load(&a.graph, &a.weights)?;
    let content = load_png(&a.content).with_context(|| format!("reading content {}", a.content.display()))?;
    let style = load_png(&a.style).with_context(|| format!("reading style {}", a.style.display()))?;
    let d = content.dims();
    let memory = estimate_memory(net.graph(), &cfg, d.h, d.w)?;
    let t = Instant::now();
    let mut sink = PngBandSink::new(&a.out);
    let report = stylize(&net, &content, Some(&style), &cfg, &mut sink)?;
    let total = t.elapsed();

    println!("{}", MemoryReport::CSV_HEADER);
    println!("{}", memory.csv_row());
    println!(
        "content {}x{}, thumbnail {}x{}, {} windows, {} workers",
        d.w,
        d.h,
        report.thumbnail.w,
        report.thumbnail.h,
        report.plan.len(),
        report.workers
    );
    println!(
        "style {:.3}s, thumbnail {:.3}s, patches {:.3}s, total {:.3}s",
        report.style_time.as_secs_f64(),
        report.thumbnail_time.as_secs_f64(),
        report.patch_time.as_secs_f64(),
        total.as_secs_f64()
    );
    if let Some(path) = &a.report {
        let json = serde_json::json!({
            "memory": memory,
            "plan": report.plan,
            "workers": report.workers,
            "bank_bytes": report.bank_bytes,
            "workspace_bytes": report.workspace_bytes,
            "style_seconds": report.style_time.as_secs_f64(),
            "thumbnail_seconds": report.thumbnail_time.as_secs_f64(),
            "patch_seconds": report.patch_time.as_secs_f64(),
        });
        fs::write(path, serde_json::to_string_pretty(&json)?).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn cmd_stats_sweep(a: SweepArgs) -> Result<()> {
    let net = network_or(&a.network, || {
        let g = zoo::reference_encoder(a.width_divisor);
        let w = zoo::init_weights(&g, zoo::TOY_SEED);
        Network::new(g, &w).expect("encoder binds")
    })?;
    let image = match &a.image {
        Some(p) => load_png(p).with_context(|| format!("reading {}", p.display()))?,
        None => natural_image(2560, 2048, 16, a.seed),
    };
    let probes: Vec<&str> = a.probes.iter().map(String::as_str).collect();
    let sweep = stats_sweep(&image, &net, &probes, &a.scales)?;
    match &a.out {
        Some(p) => fs::write(p, sweep.to_csv()).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{}", sweep.to_csv()),
    }
    let (small, large) = pick_reference_scales(&sweep.scales);
    let c = convergence(std::slice::from_ref(&sweep), small, large)?;
    eprintln!(
        "monotone {}/{} ({:.1}%); deviation at {large} <= at {small} for {}/{} layers",
        c.monotone,
        c.aggregates,
        100.0 * c.monotone_fraction,
        c.reference_ok,
        c.reference_pairs
    );
    Ok(())
}

/// 256 and 1024 when swept, otherwise the two smallest distinct scales.
fn pick_reference_scales(scales: &[usize]) -> (usize, usize) {
    if scales.contains(&256) && scales.contains(&1024) {
        return (256, 1024);
    }
    let first = scales[0];
    (first, scales.get(1).copied().unwrap_or(first))
}

fn cmd_seam_check(a: SeamArgs) -> Result<()> {
    if a.size == 0 || a.stride == 0 || a.patch_size <= a.stride || a.patch_size > a.size {
        bail!(
            "need 0 < stride < patch size <= image size, got stride {}, patch size {}, size {}",
            a.stride,
            a.patch_size,
            a.size
        );
    }
    let (g, w) = zoo::toy_network();
    let tin = Network::new(g.clone(), &w)?;
    let plain = Network::new(g.with_norm_variant(NormVariant::Tin, NormVariant::In), &w)?;
    let net = if a.allow_in { &plain } else { &tin };
    let img = random_image(Dims::new(1, 3, a.size, a.size), a.seed);
    let cfg = tinstitch_core::PipelineConfig {
        patch_size: a.patch_size,
        stride: a.stride,
        thumb_short_side: a.size,
        allow_plain_norm: a.allow_in,
        workers: match threads() {
            Some(t) => t.trim().parse().with_context(|| format!("{THREADS_ENV} must be a positive integer"))?,
            None => 1,
        },
        ..Default::default()
    };
    let whole = net.forward(&img, &mut StatsBank::new())?;
    let (tiled, report) = stylize_tensor(net, &img, None, &cfg)?;
    let diff = tiled.max_abs_diff(&whole);
    if let Some(p) = &a.plan_json {
        fs::write(p, report.plan.to_json()).with_context(|| format!("writing {}", p.display()))?;
    }

    let eg = zoo::reference_encoder(8);
    let fx = FeatureExtractor::new(&eg, &zoo::init_weights(&eg, 7), &a.probe)?;
    let plan = plan_tiles(a.size, a.size, a.patch_size, a.stride)?;
    let mut bank = StatsBank::new();
    tin.forward(&img, &mut bank)?;
    let bank = bank.frozen();
    let g_tin = gram_consistency(&window_outputs(&tin, &img, &plan, Some(&bank))?, &fx)?;
    let g_in = gram_consistency(&window_outputs(&plain, &img, &plan, None)?, &fx)?;

    println!("windows: {}", plan.len());
    println!("max_abs_diff: {diff:e}");
    println!("gram_consistency_tin: {g_tin:e}");
    println!("gram_consistency_in: {g_in:e}");
    println!("gram_ratio_in_over_tin: {:.4}", g_in / g_tin);
    if a.allow_in {
        warn!("plain IN normalizes every patch with its own statistics; the tiled output is not seam-free");
        return Ok(());
    }
    if diff > SEAM_TOLERANCE {
        bail!(SeamFailure(diff));
    }
    Ok(())
}

#[derive(Debug)]
pub struct SeamFailure(pub f32);

impl std::fmt::Display for SeamFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "tiled output deviates by {:e} (tolerance {SEAM_TOLERANCE:e})", self.0)
    }
}

impl std::error::Error for SeamFailure {}

/// Drops every patch; used when only the allocation profile matters.
struct DiscardSink;

impl OwnershipSink for DiscardSink {
    fn begin(&mut self, _: &TilePlan, _: usize) -> tinstitch_core::Result<()> {
        Ok(())
    }

    fn put(&mut self, _: &TilePlan, _: usize, _: TensorRef<'_>) -> tinstitch_core::Result<()> {
        Ok(())
    }

    fn finish(&mut self) -> tinstitch_core::Result<()> {
        Ok(())
    }
}

fn cmd_mem_report(a: MemArgs) -> Result<()> {
    let cfg = a.pipeline.config(false, threads().as_deref())?;
    let net = network_or(&a.network, toy)?;
    if a.measure && net.graph().norm_layers().any(|(_, v)| v == NormVariant::Adain) {
        bail!("--measure runs without a style image; use a graph without AdaIN layers");
    }
    let header = MemoryReport::CSV_HEADER;
    println!("{header}{}", if a.measure { ",measured_peak" } else { "" });
    for &s in &a.sizes {
        let r = estimate_memory(net.graph(), &cfg, s, s)?;
        if a.measure {
            let img = natural_image(s, s, 8, s as u64);
            let (res, peak) = alloc::measure(|| stylize(&net, &img, None, &cfg, &mut DiscardSink));
            res?;
            println!("{},{peak}", r.csv_row());
        } else {
            println!("{}", r.csv_row());
        }
    }
    Ok(())
}

fn cmd_init_network(a: InitArgs) -> Result<()> {
    let (graph, seed) = match a.kind {
        Builtin::Toy => (zoo::toy_graph(), a.seed.unwrap_or(zoo::TOY_SEED)),
        Builtin::Reference => (zoo::reference_graph(a.width_divisor), a.seed.unwrap_or(0)),
        Builtin::Encoder => (zoo::reference_encoder(a.width_divisor), a.seed.unwrap_or(0)),
    };
    let weights = zoo::init_weights(&graph, seed);
    graph.save(&a.graph).with_context(|| format!("writing {}", a.graph.display()))?;
    weights.save(&a.weights).with_context(|| format!("writing {}", a.weights.display()))?;
    println!("{} layers, {} parameters, receptive radius {}", graph.layers.len(), graph.parameter_count(), graph.receptive_field());
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    if a.width == 0 || a.height == 0 {
        bail!("image must be at least 1x1");
    }
    save_png(&natural_image(a.width, a.height, a.finest, a.seed), &a.out)
        .with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}
