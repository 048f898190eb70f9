//! Spectral-unmixing radiance fields on an explicit voxel grid.
//!
//! The scene is a dense grid of raw (pre-activation) parameters — density,
//! abundance logits, per-endmember scaling logits, a tint logit and
//! per-band spherical-harmonic specular coefficients — plus one global
//! learnable endmember dictionary. Point queries activate the interpolated
//! raw values into a physically constrained sample (abundances on the
//! simplex, scalings and tint in `[0,1]`), compose diffuse and specular
//! reflectance, and volumetric rendering accumulates spectral radiance,
//! material abundances and opacity along camera rays. Everything is
//! differentiable by hand-derived chain rule, so the whole model trains
//! with Adam against posed spectral images.
//!
//! The crate is `no_std` (with `alloc`): it contains no I/O, no threads and
//! no global state. File formats, the CLI and the parallel executor live in
//! the companion `specfield` crate. All transcendental math goes through
//! `libm`, so results are bitwise reproducible across platforms.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod assign;
pub mod camera;
pub mod cube;
pub mod error;
pub mod exec;
pub mod field;
pub mod gradcheck;
pub mod metrics;
pub mod numeric;
pub mod render;
pub mod rng;
pub mod scene;
pub mod segment;
pub mod sh;
pub mod spectral;
pub mod train;
pub mod unmix;

pub use error::{Error, Result};
