//! Shallow graph neural network that reuses diffusion work across training
//! iterations.
//!
//! Each training iteration runs only a few APPNP-style propagation layers, but
//! seeds them from the previous iteration's output (forward) and the previous
//! iteration's input gradient (backward). Over many iterations the model
//! approaches the fixed point of the graph-denoising objective without ever
//! unrolling a deep diffusion. The backward pass uses the implicit gradient at
//! the fixed point, so no intermediate diffusion activations are stored; the
//! only persistent state is two `N x C` history stores.
//!
//! Module map:
//!
//! * [`graph`] — CSR graphs, normalization, sparse-dense products, L-hop sampling.
//! * [`propagation`] — denoising objective, plain/lazy forward and backward
//!   diffusion, dense fixed-point and implicit-gradient oracles.
//! * [`nn`] — MLP with dropout, manual backward pass, cross-entropy, Adam,
//!   finite differences.
//! * [`memory`] — the feature and gradient history stores.
//! * [`trainer`] — full-batch and mini-batch training, evaluation, benchmarks.
//! * [`data`] — dataset files, SBM generator.
//! * [`config`] / [`cli`] — flat config files and the `lazygnn` command line.

pub mod cli;
pub mod config;
pub mod data;
mod error;
pub mod graph;
pub mod matrix;
pub mod memory;
pub mod nn;
pub mod propagation;
mod real;
pub mod trainer;

pub use error::{Error, Result};
pub use graph::{build_graph, sample_lhop, SparseGraph, SubgraphBatch};
pub use matrix::Matrix;
pub use memory::{LazyState, Store};
pub use propagation::Hyperparams;
pub use real::Real;
