//! Skeleton sequences, graph topologies and the data preparation steps that
//! run before feature extraction.

pub mod io;
mod preprocess;
mod sequence;
mod synthetic;
mod topology;
mod window;

pub use preprocess::{preprocess, PreprocessConfig, PreprocessStep};
pub(crate) use sequence::check_permutation;
pub use sequence::SkeletonSequence;
pub use synthetic::{generate_synthetic, SyntheticConfig};
pub use topology::{build_topology, builtin, GraphTopology, PartitionStrategy, SquareMatrix, TopologyFile};
pub use window::{windowize, Window, Windowing};
