//! Simulation and verification toolkit for genealogies under recombination.
//!
//! The crate simulates the ancestral recombination graph (ARG) backward in
//! time, reads genealogical trees off it at arbitrary loci, builds the same
//! tree-valued process along the genome (the Wiuf–Hein construction and its
//! Markovian approximations SMC, SMC' and MaCS), and measures distances
//! between the resulting trees viewed as finite metric measure spaces.
//!
//! Closed-form two-locus probabilities and mixing bounds live in
//! [`analytic`]; [`experiment`] drives reproducible Monte Carlo checks of
//! them with per-replicate random streams.
//!
//! Runnable walkthroughs for each capability are in the `examples/`
//! directory of this crate.

pub mod analytic;
pub mod arg;
pub mod cli;
pub mod coupling;
pub mod error;
pub mod experiment;
pub mod kingman;
pub mod metrics;
pub mod newick;
pub mod polynomial;
pub mod rng;
pub mod stats;
pub mod tree;
pub mod walk;

pub use arg::{ArgAlgorithm, ArgEvent, ArgEventLog, TreePath};
pub use error::{Error, Result};
pub use kingman::sample_kingman;
pub use rng::RandomSource;
pub use tree::{DistanceMatrix, FiniteMmSpace, Merge, NodeId, UltrametricTree};
pub use walk::WalkVariant;
