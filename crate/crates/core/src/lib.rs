//! Variable-step diffusion sampling for 3D volumes.
//!
//! This crate implements the pieces needed to run a denoising diffusion
//! sampler under a hard wall-clock budget on volumetric data:
//!
//! - noise schedules that can be respaced to any step count from a trained
//!   step set ([`schedule`]),
//! - the forward/reverse diffusion process with learned-variance
//!   interpolation ([`diffusion`]),
//! - pluggable denoisers, including analytic ones that make the sampler
//!   testable without a neural network ([`denoiser`]),
//! - a budget planner that picks the largest affordable step count and
//!   re-derives the window overlap ([`planner`]),
//! - sliding-window tiling with blended stitching ([`tiler`]),
//! - intensity normalization pipelines for CT/CBCT and MRI ([`normalize`]),
//! - training losses and composite objectives ([`losses`]),
//! - an evaluation metric suite (MAE, PSNR, SSIM, MS-SSIM, Dice, HD95,
//!   NSD) ([`metrics`]),
//! - shape-preserving augmentation transforms ([`augment`]),
//! - a minimal NIfTI-1 subset reader/writer and a raw float32 + JSON
//!   sidecar format ([`io`]).
//!
//! Volumes are immutable after construction and safe to share across
//! threads; all numeric kernels run in f64.

pub mod augment;
pub mod denoiser;
pub mod diffusion;
pub mod error;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod normalize;
pub mod planner;
pub mod rng;
pub mod schedule;
pub mod tiler;
pub mod volume;

pub use error::{Error, Result};
pub use volume::{Grid3, Mask, Volume, VoxelDomain};
