//! Deterministic synthetic inputs: random-weight networks, random tensors and
//! procedurally drawn scenes, for when no pretrained export is at hand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::backbone::{ConvLayer, Preprocess, WeightsBundle, LAYER_NAMES};
use crate::tensor::{FeatureMap, Image};

/// Narrow widths that keep a full retarget of a 256x256 image fast.
pub const SMALL_WIDTHS: [usize; 9] = [8, 8, 16, 16, 24, 24, 24, 24, 32];

/// He-initialized weights with the given per-layer output widths. Values are
/// rounded to `f32` so that a save/load round trip is exact.
pub fn random_weights(widths: &[usize], seed: u64) -> WeightsBundle {
    assert_eq!(widths.len(), LAYER_NAMES.len(), "one width per conv layer");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_c = 3;
    let layers = LAYER_NAMES
        .iter()
        .zip(widths)
        .map(|(name, &out_c)| {
            let std = (2.0 / (9.0 * in_c as f64)).sqrt();
            let normal = Normal::new(0.0, std).unwrap();
            let weights = (0..out_c * in_c * 9).map(|_| f64::from(normal.sample(&mut rng) as f32)).collect();
            let bias = (0..out_c).map(|_| f64::from(rng.gen_range(-0.05f32..0.1))).collect();
            let layer = ConvLayer {
                name: (*name).to_string(),
                out_channels: out_c,
                in_channels: in_c,
                kernel_h: 3,
                kernel_w: 3,
                weights,
                bias,
            };
            in_c = out_c;
            layer
        })
        .collect();
    let preprocess = Preprocess {
        mean_rgb: [123.68f32, 116.779f32, 103.939f32].map(f64::from),
        scale: f64::from(1.0f32 / 58.0),
    };
    WeightsBundle::new(layers, preprocess).expect("synthetic topology is valid")
}

/// Uniform `[0, 1)` entries.
pub fn random_feature_map(layer: u32, h: usize, w: usize, c: usize, seed: u64) -> FeatureMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FeatureMap::from_fn(layer, h, w, c, |_, _, _| rng.gen::<f64>())
}

/// Standard-normal entries.
pub fn gaussian_feature_map(layer: u32, h: usize, w: usize, c: usize, seed: u64) -> FeatureMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, 1.0).unwrap();
    FeatureMap::from_fn(layer, h, w, c, |_, _, _| n.sample(&mut rng))
}

/// A smooth sky/ground backdrop with a few solid, outlined blobs and mild
/// texture. Integer-valued samples.
pub fn scene(h: usize, w: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = h as f64 * rng.gen_range(0.45..0.7);
    let sky = [rng.gen_range(90.0..160.0), rng.gen_range(140.0..200.0), rng.gen_range(190.0..250.0)];
    let ground = [rng.gen_range(40.0..110.0), rng.gen_range(80.0..150.0), rng.gen_range(20.0..80.0)];
    let blobs: Vec<([f64; 2], [f64; 2], [f64; 3])> = (0..rng.gen_range(2..5))
        .map(|_| {
            let centre = [rng.gen_range(0.2..0.8) * h as f64, rng.gen_range(0.1..0.9) * w as f64];
            let radii = [rng.gen_range(0.08..0.2) * h as f64, rng.gen_range(0.05..0.15) * w as f64];
            let colour = [rng.gen_range(0.0..255.0), rng.gen_range(0.0..255.0), rng.gen_range(0.0..255.0)];
            (centre, radii, colour)
        })
        .collect();
    let noise: Vec<f64> = (0..h * w).map(|_| rng.gen_range(-6.0..6.0)).collect();
    Image::from_fn(h, w, |i, j, c| {
        let (y, x) = (i as f64, j as f64);
        let mut v = if y < horizon {
            sky[c] * (0.8 + 0.2 * y / horizon)
        } else {
            ground[c] * (1.0 - 0.3 * (y - horizon) / (h as f64 - horizon).max(1.0))
        };
        for (centre, radii, colour) in &blobs {
            let d = ((y - centre[0]) / radii[0]).powi(2) + ((x - centre[1]) / radii[1]).powi(2);
            if d <= 1.0 {
                v = if d > 0.8 { 20.0 } else { colour[c] };
            }
        }
        (v + noise[i * w + j]).round()
    })
}
