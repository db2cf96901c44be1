//! Forward and reverse passes of the truncated VGG-19.
//!
//! Topology (each conv is 3x3, zero padding 1, stride 1, followed by ReLU):
//!
//! ```text
//! conv1_1 [tap 1] conv1_2 pool conv2_1 [tap 2] conv2_2 pool conv3_1 [tap 3]
//! conv3_2 conv3_3 conv3_4 pool conv4_1 [tap 4]
//! ```
//!
//! Pools are 2x2 with stride 2 and ceil semantics: on odd sizes the last
//! window is truncated to the in-bounds elements.

use rayon::prelude::*;

use super::weights::{ConvLayer, WeightsBundle};
use crate::error::{invalid, shape, Result};
use crate::tensor::{FeatureMap, Image};

/// Static description of one pyramid level.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PyramidLevelSpec {
    pub level: u32,
    pub tap: &'static str,
    pub stride: usize,
    /// Channel count in the pretrained network.
    pub channels: usize,
}

pub const PYRAMID_LEVELS: [PyramidLevelSpec; 4] = [
    PyramidLevelSpec { level: 1, tap: "relu1_1", stride: 1, channels: 64 },
    PyramidLevelSpec { level: 2, tap: "relu2_1", stride: 2, channels: 128 },
    PyramidLevelSpec { level: 3, tap: "relu3_1", stride: 4, channels: 256 },
    PyramidLevelSpec { level: 4, tap: "relu4_1", stride: 8, channels: 512 },
];

/// Smallest image side accepted by [`extract_pyramid`].
pub const MIN_IMAGE_SIDE: usize = 32;

#[derive(Clone, Copy, Debug)]
enum Op {
    Conv(usize),
    Relu,
    Pool,
}

use Op::{Conv, Pool, Relu};

const STAGES: [&[Op]; 4] = [
    &[Conv(0), Relu],
    &[Conv(1), Relu, Pool, Conv(2), Relu],
    &[Conv(3), Relu, Pool, Conv(4), Relu],
    &[Conv(5), Relu, Conv(6), Relu, Conv(7), Relu, Pool, Conv(8), Relu],
];

/// Feature maps at the four taps, indexed 1..=4 through [`FeaturePyramid::level`].
#[derive(Clone, Debug, PartialEq)]
pub struct FeaturePyramid {
    pub levels: [FeatureMap; 4],
}

impl FeaturePyramid {
    /// Level `l` in `1..=4`.
    pub fn level(&self, l: u32) -> &FeatureMap {
        &self.levels[(l - 1) as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = &FeatureMap> {
        self.levels.iter()
    }
}

/// Size after a ceil-mode 2x2 pool.
pub fn pooled(n: usize) -> usize {
    n.div_ceil(2)
}

/// Spatial size of level `l` for an input of side `n`.
pub fn level_size(n: usize, l: u32) -> usize {
    (1..l).fold(n, |s, _| pooled(s))
}

fn conv3x3(input: &FeatureMap, layer: &ConvLayer) -> FeatureMap {
    let (h, w, cin) = input.dims();
    debug_assert_eq!(cin, layer.in_channels);
    let mut out = FeatureMap::zeros(input.layer(), h, w, layer.out_channels);
    out.data_mut().par_chunks_mut(h * w).enumerate().for_each(|(o, dst)| {
        dst.fill(layer.bias[o]);
        for c in 0..cin {
            let src = input.plane(c);
            for ky in 0..3 {
                for kx in 0..3 {
                    let wv = layer.weight(o, c, ky, kx);
                    if wv == 0.0 {
                        continue;
                    }
                    shifted_axpy(dst, src, h, w, ky as isize - 1, kx as isize - 1, wv);
                }
            }
        }
    });
    out
}

/// `dst[y][x] += a * src[y + dy][x + dx]` over the in-bounds region.
#[inline]
fn shifted_axpy(dst: &mut [f64], src: &[f64], h: usize, w: usize, dy: isize, dx: isize, a: f64) {
    let y0 = (-dy).max(0) as usize;
    let y1 = (h as isize - dy.max(0)).max(0) as usize;
    let x0 = (-dx).max(0) as usize;
    let x1 = (w as isize - dx.max(0)).max(0) as usize;
    if x0 >= x1 {
        return;
    }
    for y in y0..y1 {
        let sy = (y as isize + dy) as usize;
        let d = &mut dst[y * w + x0..y * w + x1];
        let s = &src[sy * w + (x0 as isize + dx) as usize..sy * w + (x1 as isize + dx) as usize];
        for (d, s) in d.iter_mut().zip(s) {
            *d += a * s;
        }
    }
}

fn conv3x3_backward(grad_out: &FeatureMap, layer: &ConvLayer) -> FeatureMap {
    let (h, w, cout) = grad_out.dims();
    let mut grad_in = FeatureMap::zeros(grad_out.layer(), h, w, layer.in_channels);
    grad_in.data_mut().par_chunks_mut(h * w).enumerate().for_each(|(c, dst)| {
        for o in 0..cout {
            let g = grad_out.plane(o);
            for ky in 0..3 {
                for kx in 0..3 {
                    let wv = layer.weight(o, c, ky, kx);
                    if wv == 0.0 {
                        continue;
                    }
                    shifted_axpy(dst, g, h, w, 1 - ky as isize, 1 - kx as isize, wv);
                }
            }
        }
    });
    grad_in
}

fn relu_in_place(x: &mut FeatureMap) -> Vec<bool> {
    x.data_mut()
        .iter_mut()
        .map(|v| {
            let on = *v > 0.0;
            if !on {
                *v = 0.0;
            }
            on
        })
        .collect()
}

/// Returns the pooled map and, per output element, the flat index of its max.
fn max_pool(x: &FeatureMap) -> (FeatureMap, Vec<usize>) {
    let (h, w, c) = x.dims();
    let (ph, pw) = (pooled(h), pooled(w));
    let mut out = FeatureMap::zeros(x.layer(), ph, pw, c);
    let mut arg = vec![0; ph * pw * c];
    for ch in 0..c {
        let src = x.plane(ch);
        let base = ch * h * w;
        for py in 0..ph {
            for px in 0..pw {
                let mut best = (py * 2) * w + px * 2;
                for y in py * 2..(py * 2 + 2).min(h) {
                    for xx in px * 2..(px * 2 + 2).min(w) {
                        if src[y * w + xx] > src[best] {
                            best = y * w + xx;
                        }
                    }
                }
                let k = (ch * ph + py) * pw + px;
                out.data_mut()[k] = src[best];
                arg[k] = base + best;
            }
        }
    }
    (out, arg)
}

enum Tape {
    Conv(usize),
    Relu(Vec<bool>),
    Pool { arg: Vec<usize>, dims: (usize, usize, usize) },
}

fn run_stage(x: &FeatureMap, w: &WeightsBundle, stage: usize, record: bool) -> (FeatureMap, Vec<Tape>) {
    let mut cur = x.clone();
    let mut tape = Vec::new();
    for op in STAGES[stage] {
        match *op {
            Conv(k) => {
                cur = conv3x3(&cur, &w.layers[k]);
                if record {
                    tape.push(Tape::Conv(k));
                }
            }
            Relu => {
                let mask = relu_in_place(&mut cur);
                if record {
                    tape.push(Tape::Relu(mask));
                }
            }
            Pool => {
                let dims = cur.dims();
                let (p, arg) = max_pool(&cur);
                cur = p;
                if record {
                    tape.push(Tape::Pool { arg, dims });
                }
            }
        }
    }
    (cur.with_layer(stage as u32 + 1), tape)
}

fn backprop(mut grad: FeatureMap, tape: Vec<Tape>, w: &WeightsBundle, layer: u32) -> FeatureMap {
    for entry in tape.into_iter().rev() {
        match entry {
            Tape::Conv(k) => grad = conv3x3_backward(&grad, &w.layers[k]),
            Tape::Relu(mask) => {
                for (g, on) in grad.data_mut().iter_mut().zip(mask) {
                    if !on {
                        *g = 0.0;
                    }
                }
            }
            Tape::Pool { arg, dims: (h, wd, c) } => {
                let mut up = FeatureMap::zeros(layer, h, wd, c);
                for (g, k) in grad.data().iter().zip(arg) {
                    up.data_mut()[k] += g;
                }
                grad = up;
            }
        }
    }
    grad.with_layer(layer)
}

fn preprocess(o: &Image, w: &WeightsBundle) -> FeatureMap {
    let p = &w.preprocess;
    FeatureMap::from_fn(0, o.height(), o.width(), 3, |i, j, c| (o.get(i, j, c) - p.mean_rgb[c]) * p.scale)
}

/// Runs the image through the network and collects the four taps.
pub fn extract_pyramid(o: &Image, w: &WeightsBundle) -> Result<FeaturePyramid> {
    if o.height() < MIN_IMAGE_SIDE || o.width() < MIN_IMAGE_SIDE {
        return Err(invalid(format!(
            "image is {}x{}; feature extraction needs at least {MIN_IMAGE_SIDE}x{MIN_IMAGE_SIDE}",
            o.height(),
            o.width()
        )));
    }
    let (l1, _) = run_stage(&preprocess(o, w), w, 0, false);
    let l2 = forward_between(&l1, w)?;
    let l3 = forward_between(&l2, w)?;
    let l4 = forward_between(&l3, w)?;
    Ok(FeaturePyramid { levels: [l1, l2, l3, l4] })
}

fn check_level_input(x: &FeatureMap, w: &WeightsBundle) -> Result<usize> {
    let from = x.layer();
    if !(1..=3).contains(&from) {
        return Err(invalid(format!("forward_between needs a level 1..=3 map, got level {from}")));
    }
    let expected = w.level_channels()[from as usize - 1];
    if x.channels() != expected {
        return Err(shape(format!(
            "level {from} features need {expected} channels, got {}",
            x.channels()
        )));
    }
    Ok(from as usize)
}

/// The sub-network between tap `L-1` (the level of `x`) and tap `L`.
pub fn forward_between(x: &FeatureMap, w: &WeightsBundle) -> Result<FeatureMap> {
    let stage = check_level_input(x, w)?;
    Ok(run_stage(x, w, stage, false).0)
}

/// Squared Frobenius residual `||forward_between(x) - target||^2` and its
/// gradient with respect to `x`.
pub fn loss_and_gradient(x: &FeatureMap, target: &FeatureMap, w: &WeightsBundle) -> Result<(f64, FeatureMap)> {
    let stage = check_level_input(x, w)?;
    let (y, tape) = run_stage(x, w, stage, true);
    if y.dims() != target.dims() {
        return Err(shape(format!(
            "forward output is {:?} but target is {:?}",
            y.dims(),
            target.dims()
        )));
    }
    let mut loss = 0.0;
    let mut grad = y;
    for (g, t) in grad.data_mut().iter_mut().zip(target.data()) {
        let r = *g - t;
        loss += r * r;
        *g = 2.0 * r;
    }
    Ok((loss, backprop(grad, tape, w, x.layer())))
}
