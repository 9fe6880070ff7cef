//! Robust semi-supervised node classification under graph-structure
//! poisoning, by learning a clean weighted graph Laplacian.
//!
//! The library provides the edge-space/matrix-space operator algebra
//! ([`operators`]), dataset loading and splits ([`dataset`]), a random
//! structure attack ([`attack`]), a two-layer GCN with exact gradients in
//! both the parameters and the edge weights ([`gcn`]), a projected
//! majorization-minimization denoiser for the graph ([`denoise`]), an
//! alternating joint trainer ([`joint`]), and an experiment harness
//! ([`experiment`]).

// Link the system BLAS that backs ndarray's dense products.
extern crate openblas_src as _;

pub mod attack;
pub mod dataset;
pub mod denoise;
pub mod error;
pub mod experiment;
pub mod gcn;
pub mod joint;
pub mod operators;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
