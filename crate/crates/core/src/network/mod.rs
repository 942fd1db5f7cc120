//! Declarative network graphs, the weight container, and the forward
//! executor.

mod exec;
mod graph;
mod weights;
pub mod zoo;

pub use exec::{ExecOptions, Network, StatsMode, Workspace};
pub use graph::{LayerKind, LayerSpec, NetworkGraph, NormVariant};
pub use weights::{load_weights, save_weights, NamedArray, WeightStore, MAGIC};

use std::path::Path;

use crate::error::Result;

/// Loads a graph JSON file and a weight container and binds them.
pub fn load_network(graph: impl AsRef<Path>, weights: impl AsRef<Path>) -> Result<Network> {
    let g = NetworkGraph::load(graph)?;
    let w = WeightStore::load(weights)?;
    Network::new(g, &w)
}
