//! Content-aware image retargeting in deep feature space.
//!
//! An image is pushed through the first four levels of a VGG-19 backbone. The
//! deepest level is narrowed by uniform re-sampling over a cumulative column
//! obscurity profile, and the result is carried back down level by level:
//! features are inverted through the network, matched against the original
//! features with PatchMatch, blended with the analytic resampling
//! correspondence, and finally turned into pixels by patch voting.

pub mod backbone;
pub mod baselines;
pub mod compare;
pub mod dump;
pub mod error;
pub mod inversion;
pub mod metrics;
pub mod nnf;
pub mod pipeline;
pub mod synth;
pub mod tensor;
pub mod urs;

pub use error::{Error, Result};
pub use tensor::{Axis, FeatureMap, Grid, Image, Raster};
