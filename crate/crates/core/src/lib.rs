//! Next-best-view planning toolkit.
//!
//! The crate simulates range scanning of procedural objects from a view
//! sphere, labels partial reconstructions with an exhaustive
//! resolution-optimal next-best-view search, trains a 3D convolutional
//! classifier on the resulting occupancy grids and drives closed-loop
//! reconstructions with the trained predictor.
//!
//! Module map:
//!
//! * [`scene`]: views, meshes, simulated depth sensing, point clouds.
//! * [`metrics`]: spatial index, coverage/overlap, downsampling, keypoints.
//! * [`grid`]: the probabilistic occupancy grid fed to the network.
//! * [`oracle`]: resolution-optimal NBV and dataset example generation.
//! * [`net`]: tensors, layers, NBV-Net / FC baseline, Adam, training.
//! * [`closed_loop`]: predictor-driven reconstruction episodes and statistics.
//! * [`persistence`]: binary dataset and weight files, manifests.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closed_loop;
pub mod error;
pub mod grid;
pub mod metrics;
pub mod net;
pub mod oracle;
pub mod persistence;
pub mod scene;

pub use error::{Error, Result};

/// Toolkit version echoed into manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// SplitMix64 finalizer over `a ^ b * golden`, used to derive independent
/// stream seeds from a master seed.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
