//! Simulation library for a spatial-spectral coded compressive spectral
//! imager: a binary mask between the detector and the plane of the dispersed
//! spectrum codes each wavelength with a shifted copy of itself, and a full
//! datacube is recovered from a few detector frames by l1-regularized
//! sparse reconstruction.
//!
//! The crate is organized along the processing chain:
//!
//! * [`geometry`] — exact-rational instrument geometry and regime analysis;
//! * [`coding`] — boolean mask sets and pixel/cell overlap weights;
//! * [`cube`] — dense datacubes, binary cube files, box resampling;
//! * [`forward`] — discrete forward models, a continuously-sheared
//!   measurement oracle, and a dispersion-before-mask baseline;
//! * [`sensing`] — sparse sensing-matrix assembly, mat-vecs and coherence;
//! * [`sparsity`] — orthonormal spectral-DCT x spatial-wavelet basis;
//! * [`solver`] — gradient-projection l1 solver;
//! * [`metrics`] — reconstruction quality measures;
//! * [`harness`] — scenes, manifests, experiment pipelines and file dumps.

pub mod coding;
pub mod cube;
pub mod error;
pub mod forward;
pub mod geometry;
pub mod harness;
pub mod metrics;
pub mod operator;
pub mod rational;
pub mod sensing;
pub mod solver;
pub mod sparsity;

pub use error::{Error, Result};
pub use rational::Rational;
