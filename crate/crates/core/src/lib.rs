//! Crowd-aware non-maximum suppression and pedestrian-detection metrics.
//!
//! This crate bundles the pure-computation kernels of the `crowdnms` toolkit:
//!
//! * [`geometry`] — axis-aligned box arithmetic (IoU, IoA).
//! * [`density`] — pairwise-overlap density of ground-truth objects and the
//!   pluggable sources that attach a density to each detection.
//! * [`suppression`] — one rescoring loop covering greedy, soft (linear /
//!   Gaussian) and density-adaptive NMS.
//! * [`evaluation`] — detection-to-ground-truth matching, FPPI/miss-rate
//!   curves, log-average miss rate, average precision and density-binned
//!   miss rates.
//! * [`synth`] — a seeded, fully deterministic crowd-scene and detector
//!   simulator for desk-scale experiments.
//!
//! The crate is `no_std` (with `alloc`); file formats and the command-line
//! front end live in the companion `crowdnms` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod density;
pub mod evaluation;
pub mod geometry;
pub mod suppression;
pub mod synth;

pub use density::{Detection, DensitySource, GroundTruthObject};
pub use geometry::BoundingBox;
pub use suppression::{RescoreMethod, SuppressionConfig, SuppressionResult};
