//! Pretrained convolutional backbone: weights container, feature pyramid,
//! inter-level forward maps and the inversion loss gradient.

mod net;
mod weights;

pub use net::{
    extract_pyramid, forward_between, level_size, loss_and_gradient, pooled, FeaturePyramid, PyramidLevelSpec,
    MIN_IMAGE_SIDE, PYRAMID_LEVELS,
};
pub use weights::{load_weights, ConvLayer, Preprocess, WeightsBundle, LAYER_NAMES, REFERENCE_WIDTHS, WEIGHTS_MAGIC};

pub(crate) use weights::Reader;
