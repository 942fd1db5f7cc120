//! Benchmark fixtures. Run with `cargo bench -p tinstitch-bench`.

use tinstitch_core::network::zoo;
use tinstitch_core::tensor::ConvWeights;
use tinstitch_core::{Network, Tensor};

/// Deterministic `o × i × k × k` convolution weights.
pub fn conv_weights(o: usize, i: usize, k: usize) -> ConvWeights {
    let kernel = (0..o * i * k * k).map(|j| ((j * 7919 % 1000) as f32 / 1000.0 - 0.5) * 0.2).collect();
    ConvWeights::new(o, i, k, k, kernel, vec![0.01; o]).expect("consistent shapes")
}

pub fn toy() -> Network {
    let (g, w) = zoo::toy_network();
    Network::new(g, &w).expect("toy network binds")
}

/// Reference network with channel widths divided by `divisor`.
pub fn reference(divisor: usize) -> Network {
    let g = zoo::reference_graph(divisor);
    let w = zoo::init_weights(&g, 0);
    Network::new(g, &w).expect("reference network binds")
}

pub fn image(w: usize, h: usize, seed: u64) -> Tensor {
    tinstitch_core::synth::natural_image(w, h, 8, seed)
}
