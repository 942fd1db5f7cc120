//! Networks that ship with the engine.
//!
//! * [`toy_graph`]: four 3×3 convolutions around one TIN layer. Receptive
//!   radius 4, no pooling. Used wherever a test needs a real network whose
//!   whole-image and tiled outputs must agree.
//! * [`reference_graph`]: VGG-style encoder up to `relu4_1`, an AdaIN layer,
//!   and a mirrored decoder with nearest upsampling and reflection padding.
//!   Channel widths can be divided down for desk-scale experiments.
//!
//! Weights for either come from [`init_weights`] (seeded, deterministic) or
//! from an exported checkpoint in the `URSTW1` container.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::graph::{LayerKind, LayerSpec, NetworkGraph, NormVariant};
use super::weights::{NamedArray, WeightStore};
use crate::tensor::PadMode;

pub const TOY_SEED: u64 = 0x7115_7171;

/// Probe layers of the reference encoder, shallow to deep.
pub const PROBE_LAYERS: [&str; 4] = ["relu1_1", "relu2_1", "relu3_1", "relu4_1"];

pub fn toy_graph() -> NetworkGraph {
    let conv = |i: usize, o: usize, name: &str| LayerSpec::conv(i, o, 3, PadMode::Reflect).weight(name).named(name);
    NetworkGraph::new(
        3,
        vec![
            conv(3, 8, "conv1"),
            LayerSpec::relu(),
            conv(8, 8, "conv2"),
            LayerSpec::relu(),
            LayerSpec::norm(NormVariant::Tin, 8, true).weight("norm").named("norm"),
            conv(8, 8, "conv3"),
            LayerSpec::relu(),
            conv(8, 3, "conv4"),
        ],
    )
    .expect("toy graph is well formed")
}

/// Toy graph plus its fixed-seed weights.
pub fn toy_network() -> (NetworkGraph, WeightStore) {
    let g = toy_graph();
    let w = init_weights(&g, TOY_SEED);
    (g, w)
}

/// Builds the reference encoder–AdaIN–decoder graph. `width_divisor` divides
/// every channel count (1 gives the standard 64/128/256/512 widths).
pub fn reference_graph(width_divisor: usize) -> NetworkGraph {
    let mut layers = reference_encoder_layers(width_divisor);
    let w = widths(width_divisor);
    layers.push(LayerSpec::norm(NormVariant::Adain, w[3], false).named("adain"));
    let conv = |i: usize, o: usize, name: &str| LayerSpec::conv(i, o, 3, PadMode::Reflect).weight(name).named(name);
    let up = || LayerSpec::new(LayerKind::UpsampleNearest { factor: 2 });
    layers.extend([
        conv(w[3], w[2], "dec4_1"),
        LayerSpec::relu(),
        up(),
        conv(w[2], w[2], "dec3_4"),
        LayerSpec::relu(),
        conv(w[2], w[2], "dec3_3"),
        LayerSpec::relu(),
        conv(w[2], w[2], "dec3_2"),
        LayerSpec::relu(),
        conv(w[2], w[1], "dec3_1"),
        LayerSpec::relu(),
        up(),
        conv(w[1], w[1], "dec2_2"),
        LayerSpec::relu(),
        conv(w[1], w[0], "dec2_1"),
        LayerSpec::relu(),
        up(),
        conv(w[0], w[0], "dec1_2"),
        LayerSpec::relu(),
        conv(w[0], 3, "dec1_1"),
    ]);
    NetworkGraph::new(3, layers).expect("reference graph is well formed")
}

/// Encoder half of [`reference_graph`], ending at `relu4_1`.
pub fn reference_encoder(width_divisor: usize) -> NetworkGraph {
    NetworkGraph::new(3, reference_encoder_layers(width_divisor)).expect("encoder graph is well formed")
}

fn widths(divisor: usize) -> [usize; 4] {
    let d = divisor.max(1);
    [64, 128, 256, 512].map(|c| (c / d).max(1))
}

fn reference_encoder_layers(width_divisor: usize) -> Vec<LayerSpec> {
    let w = widths(width_divisor);
    let conv = |i: usize, o: usize, name: &str| LayerSpec::conv(i, o, 3, PadMode::Reflect).weight(name).named(name);
    let relu = |name: &str| LayerSpec::relu().named(name);
    let pool = || LayerSpec::new(LayerKind::Maxpool2);
    vec![
        LayerSpec::conv(3, 3, 1, PadMode::Zero).weight("conv0").named("conv0"),
        conv(3, w[0], "conv1_1"),
        relu("relu1_1"),
        conv(w[0], w[0], "conv1_2"),
        relu("relu1_2"),
        pool(),
        conv(w[0], w[1], "conv2_1"),
        relu("relu2_1"),
        conv(w[1], w[1], "conv2_2"),
        relu("relu2_2"),
        pool(),
        conv(w[1], w[2], "conv3_1"),
        relu("relu3_1"),
        conv(w[2], w[2], "conv3_2"),
        relu("relu3_2"),
        conv(w[2], w[2], "conv3_3"),
        relu("relu3_3"),
        conv(w[2], w[2], "conv3_4"),
        relu("relu3_4"),
        pool(),
        conv(w[2], w[3], "conv4_1"),
        relu("relu4_1"),
    ]
}

/// Seeded He-uniform initialization for every tensor the graph references.
/// Biases are small and mostly positive so ReLU stacks stay active.
pub fn init_weights(graph: &NetworkGraph, seed: u64) -> WeightStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = WeightStore::new();
    for layer in &graph.layers {
        match &layer.kind {
            LayerKind::Conv { in_channels, out_channels, kernel, .. } => {
                let prefix = layer.weight.as_deref().expect("validated graph");
                let fan_in = (in_channels * kernel * kernel) as f32;
                let bound = (6.0 / fan_in).sqrt();
                let k: Vec<f32> = (0..out_channels * in_channels * kernel * kernel)
                    .map(|_| rng.gen_range(-bound..bound))
                    .collect();
                let b: Vec<f32> = (0..*out_channels).map(|_| rng.gen_range(-0.05..0.15)).collect();
                insert(&mut store, format!("{prefix}.weight"), vec![*out_channels, *in_channels, *kernel, *kernel], k);
                insert(&mut store, format!("{prefix}.bias"), vec![*out_channels], b);
            }
            LayerKind::Norm { channels, affine: true, variant } if !variant.is_whitening() => {
                let prefix = layer.weight.as_deref().expect("validated graph");
                let g: Vec<f32> = (0..*channels).map(|_| rng.gen_range(0.8..1.2)).collect();
                let b: Vec<f32> = (0..*channels).map(|_| rng.gen_range(-0.1..0.1)).collect();
                insert(&mut store, format!("{prefix}.gamma"), vec![*channels], g);
                insert(&mut store, format!("{prefix}.beta"), vec![*channels], b);
            }
            _ => {}
        }
    }
    store
}

fn insert(store: &mut WeightStore, name: String, dims: Vec<usize>, data: Vec<f32>) {
    // Weight prefixes may be shared between layers; the first one wins.
    if store.get(&name).is_none() {
        store.insert(name, NamedArray::new(dims, data).expect("dims match data")).expect("name is new");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Network;
    use crate::tensor::Dims;

    #[test]
    fn toy_has_radius_four() {
        assert_eq!(toy_graph().receptive_field(), 4);
    }

    #[test]
    fn reference_round_trips_spatial_size() {
        let g = reference_graph(8);
        let dims = g.activation_dims(Dims::new(1, 3, 64, 40)).unwrap();
        assert_eq!(*dims.last().unwrap(), Dims::new(1, 3, 64, 40));
        let enc = reference_encoder(8);
        assert_eq!(enc.layer_index("relu4_1"), Some(enc.layers.len() - 1));
        for name in PROBE_LAYERS {
            assert!(g.layer_index(name).is_some(), "{name}");
        }
    }

    #[test]
    fn init_is_deterministic_and_complete() {
        let g = reference_graph(16);
        let a = init_weights(&g, 3);
        assert_eq!(a, init_weights(&g, 3));
        assert_ne!(a, init_weights(&g, 4));
        assert!(Network::new(g, &a).is_ok());
    }
}
