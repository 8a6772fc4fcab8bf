//! Neighbourhood functions of large graphs through HyperLogLog counter
//! diffusion, distance-distribution statistics with jackknife errors,
//! BV-style graph compression and exact diameters.

pub mod anf;
pub mod bv;
pub mod codes;
pub mod diameter;
pub mod error;
pub mod gen;
pub mod graph;
pub mod hll;
pub mod manifest;
pub mod stats;

pub use anf::{NeighbourhoodRun, RunSet};
pub use bv::{CodecConfig, CompressedGraph};
pub use codes::Code;
pub use diameter::DiameterResult;
pub use error::{Error, Result};
pub use graph::{Graph, Permutation};
pub use hll::CounterArray;
pub use stats::{DistanceDistribution, DistanceStats};
