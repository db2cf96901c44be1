//! Nearest-neighbor fields between feature maps: randomized PatchMatch search,
//! coordinate fusion of two fields, warping, and pixel-level patch voting.
//!
//! A field is defined on every position of the query map and points at a
//! position of the source map. Patch distances sum squared differences over
//! the `(2r+1)^2` window; offsets that leave the query map are skipped and
//! source coordinates are clamped to the source bounds, so any source position
//! is a valid centre and the identity field of a map onto itself scores zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, shape, Result};
use crate::tensor::{FeatureMap, Image};

/// How patches are compared.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PatchMetric {
    pub radius: usize,
    /// L2-normalize every per-position feature vector before comparing.
    pub normalize: bool,
}

impl Default for PatchMetric {
    fn default() -> Self {
        Self { radius: 1, normalize: true }
    }
}

/// PatchMatch settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PatchMatchParams {
    pub metric: PatchMetric,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for PatchMatchParams {
    fn default() -> Self {
        Self { metric: PatchMetric::default(), iterations: 5, seed: 0 }
    }
}

/// Dense correspondence from a query grid into a source grid.
#[derive(Clone, Debug, PartialEq)]
pub struct NNField {
    height: usize,
    width: usize,
    source_height: usize,
    source_width: usize,
    mapping: Vec<(usize, usize)>,
    distance: Vec<f64>,
    pub metric: PatchMetric,
    pub seed: u64,
}

impl NNField {
    /// A field with the given mapping and zero distances; see [`NNField::with_distances`].
    pub fn from_mapping(
        height: usize,
        width: usize,
        source_height: usize,
        source_width: usize,
        mapping: Vec<(usize, usize)>,
    ) -> Result<Self> {
        if mapping.len() != height * width {
            return Err(shape(format!("{height}x{width} field needs {} entries", height * width)));
        }
        if let Some(&(a, b)) = mapping.iter().find(|&&(a, b)| a >= source_height || b >= source_width) {
            return Err(shape(format!("({a}, {b}) lies outside the {source_height}x{source_width} source")));
        }
        Ok(Self {
            height,
            width,
            source_height,
            source_width,
            mapping,
            distance: vec![0.0; height * width],
            metric: PatchMetric::default(),
            seed: 0,
        })
    }

    /// `(i, j) -> (i, j)`, clamped into the source.
    pub fn identity(height: usize, width: usize, source_height: usize, source_width: usize) -> Self {
        let mapping = (0..height * width)
            .map(|k| ((k / width).min(source_height - 1), (k % width).min(source_width - 1)))
            .collect();
        Self::from_mapping(height, width, source_height, source_width, mapping).expect("clamped identity")
    }

    /// Recomputes every distance against `query` and `source` under `metric`.
    pub fn with_distances(mut self, query: &FeatureMap, source: &FeatureMap, metric: PatchMetric) -> Result<Self> {
        self.check_maps(query, source)?;
        let q = Prepared::new(query, metric.normalize);
        let s = Prepared::new(source, metric.normalize);
        let w = self.width;
        let mapping = &self.mapping;
        self.distance.par_iter_mut().enumerate().for_each(|(k, d)| {
            let (a, b) = mapping[k];
            *d = patch_distance(&q, &s, k / w, k % w, a, b, metric.radius, f64::INFINITY);
        });
        self.metric = metric;
        Ok(self)
    }

    fn check_maps(&self, query: &FeatureMap, source: &FeatureMap) -> Result<()> {
        if (query.height(), query.width()) != (self.height, self.width) {
            return Err(shape("query map does not match the field's grid"));
        }
        if (source.height(), source.width()) != (self.source_height, self.source_width) {
            return Err(shape("source map does not match the field's source grid"));
        }
        if query.channels() != source.channels() {
            return Err(shape("query and source channel counts differ"));
        }
        Ok(())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn source_height(&self) -> usize {
        self.source_height
    }

    pub fn source_width(&self) -> usize {
        self.source_width
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> (usize, usize) {
        self.mapping[i * self.width + j]
    }

    #[inline]
    pub fn distance_at(&self, i: usize, j: usize) -> f64 {
        self.distance[i * self.width + j]
    }

    pub fn mapping(&self) -> &[(usize, usize)] {
        &self.mapping
    }

    pub fn distances(&self) -> &[f64] {
        &self.distance
    }

    pub fn mean_distance(&self) -> f64 {
        self.distance.iter().sum::<f64>() / self.distance.len() as f64
    }

    pub fn is_identity(&self) -> bool {
        self.mapping.iter().enumerate().all(|(k, &m)| m == (k / self.width, k % self.width))
    }
}

/// Position-major copy of a feature map, optionally with unit-length vectors.
struct Prepared {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Prepared {
    fn new(f: &FeatureMap, normalize: bool) -> Self {
        let (h, w, c) = f.dims();
        let mut data = vec![0.0; h * w * c];
        for ch in 0..c {
            for (p, v) in f.plane(ch).iter().enumerate() {
                data[p * c + ch] = *v;
            }
        }
        if normalize {
            for v in data.chunks_exact_mut(c) {
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if n > 0.0 {
                    v.iter_mut().for_each(|x| *x /= n);
                }
            }
        }
        Self { height: h, width: w, channels: c, data }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> &[f64] {
        let k = (i * self.width + j) * self.channels;
        &self.data[k..k + self.channels]
    }
}

/// Patch distance, abandoning early once it exceeds `bound`.
#[allow(clippy::too_many_arguments)]
#[inline]
fn patch_distance(q: &Prepared, s: &Prepared, qi: usize, qj: usize, si: usize, sj: usize, r: usize, bound: f64) -> f64 {
    let r = r as isize;
    let mut total = 0.0;
    for di in -r..=r {
        let qy = qi as isize + di;
        if qy < 0 || qy >= q.height as isize {
            continue;
        }
        let sy = (si as isize + di).clamp(0, s.height as isize - 1) as usize;
        for dj in -r..=r {
            let qx = qj as isize + dj;
            if qx < 0 || qx >= q.width as isize {
                continue;
            }
            let sx = (sj as isize + dj).clamp(0, s.width as isize - 1) as usize;
            total += q.at(qy as usize, qx as usize)
                .iter()
                .zip(s.at(sy, sx))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
        }
        if total > bound {
            return total;
        }
    }
    total
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent random stream for one position and round.
fn position_rng(seed: u64, i: usize, j: usize, round: u64) -> ChaCha8Rng {
    let h = [i as u64, j as u64, round].iter().fold(splitmix64(seed), |h, &v| splitmix64(h ^ v));
    ChaCha8Rng::seed_from_u64(h)
}

const INIT_ROUND: u64 = u64::MAX;

/// Approximate nearest-neighbor field from `query` into `source`.
///
/// Random initialization, then `iterations` rounds that each visit every
/// position in scan order (reversed on odd rounds), trying the shifted matches
/// of the two already-visited neighbors and then random candidates in windows
/// that halve from the full source extent down to one. A candidate replaces the
/// current match only if strictly better, so each position's distance never
/// increases.
pub fn patchmatch(query: &FeatureMap, source: &FeatureMap, params: &PatchMatchParams) -> Result<NNField> {
    search(query, source, params, None)
}

/// PatchMatch starting from `init` instead of a random field. Because
/// candidates must be strictly better, positions where `init` is already
/// optimal keep their match.
pub fn patchmatch_from(query: &FeatureMap, source: &FeatureMap, params: &PatchMatchParams, init: &NNField) -> Result<NNField> {
    if (init.height, init.width, init.source_height, init.source_width)
        != (query.height(), query.width(), source.height(), source.width())
    {
        return Err(shape("initial field does not match the query and source dimensions"));
    }
    search(query, source, params, Some(init))
}

fn search(query: &FeatureMap, source: &FeatureMap, params: &PatchMatchParams, init: Option<&NNField>) -> Result<NNField> {
    if query.channels() != source.channels() {
        return Err(shape(format!(
            "query has {} channels, source has {}",
            query.channels(),
            source.channels()
        )));
    }
    if query.is_empty() || source.is_empty() {
        return Err(invalid("patchmatch needs non-empty maps"));
    }
    let metric = params.metric;
    let q = Prepared::new(query, metric.normalize);
    let s = Prepared::new(source, metric.normalize);
    let (h, w) = (query.height(), query.width());
    let (sh, sw) = (source.height(), source.width());
    let r = metric.radius;

    let mut mapping = Vec::with_capacity(h * w);
    let mut distance = Vec::with_capacity(h * w);
    for i in 0..h {
        for j in 0..w {
            let m = match init {
                Some(f) => f.get(i, j),
                None => {
                    let mut rng = position_rng(params.seed, i, j, INIT_ROUND);
                    (rng.gen_range(0..sh), rng.gen_range(0..sw))
                }
            };
            distance.push(patch_distance(&q, &s, i, j, m.0, m.1, r, f64::INFINITY));
            mapping.push(m);
        }
    }

    let try_candidate = |mapping: &mut [(usize, usize)], distance: &mut [f64], k: usize, cand: (usize, usize)| {
        if mapping[k] == cand {
            return;
        }
        let d = patch_distance(&q, &s, k / w, k % w, cand.0, cand.1, r, distance[k]);
        if d < distance[k] {
            distance[k] = d;
            mapping[k] = cand;
        }
    };

    let max_radius = sh.max(sw);
    for round in 0..params.iterations {
        let forward = round % 2 == 0;
        for step in 0..h * w {
            let k = if forward { step } else { h * w - 1 - step };
            let (i, j) = (k / w, k % w);
            if forward {
                if j > 0 {
                    let (a, b) = mapping[k - 1];
                    if b + 1 < sw {
                        try_candidate(&mut mapping, &mut distance, k, (a, b + 1));
                    }
                }
                if i > 0 {
                    let (a, b) = mapping[k - w];
                    if a + 1 < sh {
                        try_candidate(&mut mapping, &mut distance, k, (a + 1, b));
                    }
                }
            } else {
                if j + 1 < w {
                    let (a, b) = mapping[k + 1];
                    if b > 0 {
                        try_candidate(&mut mapping, &mut distance, k, (a, b - 1));
                    }
                }
                if i + 1 < h {
                    let (a, b) = mapping[k + w];
                    if a > 0 {
                        try_candidate(&mut mapping, &mut distance, k, (a - 1, b));
                    }
                }
            }

            let mut rng = position_rng(params.seed, i, j, round as u64);
            let mut radius = max_radius;
            while radius >= 1 {
                let (a, b) = mapping[k];
                let ci = rng.gen_range(a.saturating_sub(radius)..=(a + radius).min(sh - 1));
                let cj = rng.gen_range(b.saturating_sub(radius)..=(b + radius).min(sw - 1));
                try_candidate(&mut mapping, &mut distance, k, (ci, cj));
                radius /= 2;
            }
        }
    }

    Ok(NNField { height: h, width: w, source_height: sh, source_width: sw, mapping, distance, metric, seed: params.seed })
}

/// Blends two fields coordinate-wise: `round(alpha * a + (1 - alpha) * b)`,
/// clamped into the source, with distances recomputed against the maps.
pub fn fuse(a: &NNField, b: &NNField, alpha: f64, query: &FeatureMap, source: &FeatureMap) -> Result<NNField> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid(format!("alpha must be in [0,1], got {alpha}")));
    }
    if (a.height, a.width, a.source_height, a.source_width) != (b.height, b.width, b.source_height, b.source_width) {
        return Err(shape("fused fields must share query and source dimensions"));
    }
    let blend = |x: usize, y: usize, hi: usize| -> usize {
        let v = (alpha * x as f64 + (1.0 - alpha) * y as f64).round();
        (v.max(0.0) as usize).min(hi - 1)
    };
    let mapping = a
        .mapping
        .iter()
        .zip(&b.mapping)
        .map(|(&(ai, aj), &(bi, bj))| (blend(ai, bi, a.source_height), blend(aj, bj, a.source_width)))
        .collect();
    let mut fused = NNField::from_mapping(a.height, a.width, a.source_height, a.source_width, mapping)?;
    fused.seed = a.seed;
    fused.with_distances(query, source, a.metric)
}

/// `output(i, j) = source(field(i, j))`.
pub fn warp(source: &FeatureMap, field: &NNField) -> Result<FeatureMap> {
    if (source.height(), source.width()) != (field.source_height, field.source_width) {
        return Err(shape(format!(
            "field expects a {}x{} source, got {}x{}",
            field.source_height,
            field.source_width,
            source.height(),
            source.width()
        )));
    }
    Ok(FeatureMap::from_fn(source.layer(), field.height, field.width, source.channels(), |i, j, c| {
        let (a, b) = field.get(i, j);
        source.get(a, b, c)
    }))
}

/// Pixel voting: every output pixel `p` averages `O(field(x) + (p - x))` over
/// the positions `x` of its `(2r+1)^2` neighborhood. Neighbors outside the
/// output grid, and votes that land outside the source, are dropped.
pub fn vote_reconstruct(source_image: &Image, field: &NNField, patch_radius: usize) -> Result<Image> {
    if (source_image.height(), source_image.width()) != (field.source_height, field.source_width) {
        return Err(shape(format!(
            "field expects a {}x{} source image, got {}x{}",
            field.source_height,
            field.source_width,
            source_image.height(),
            source_image.width()
        )));
    }
    let (h, w) = (field.height, field.width);
    let (sh, sw) = (field.source_height as isize, field.source_width as isize);
    let r = patch_radius as isize;
    let mut planes = vec![0.0; h * w * 3];
    let (p0, rest) = planes.split_at_mut(h * w);
    let (p1, p2) = rest.split_at_mut(h * w);
    for (k, ((o0, o1), o2)) in p0.iter_mut().zip(p1.iter_mut()).zip(p2.iter_mut()).enumerate() {
        let (py, px) = ((k / w) as isize, (k % w) as isize);
        let mut votes: Vec<(usize, usize)> = Vec::with_capacity((2 * patch_radius + 1).pow(2));
        for dy in -r..=r {
            let y = py + dy;
            if y < 0 || y >= h as isize {
                continue;
            }
            for dx in -r..=r {
                let x = px + dx;
                if x < 0 || x >= w as isize {
                    continue;
                }
                let (a, b) = field.get(y as usize, x as usize);
                let (sy, sx) = (a as isize - dy, b as isize - dx);
                if (0..sh).contains(&sy) && (0..sw).contains(&sx) {
                    votes.push((sy as usize, sx as usize));
                }
            }
        }
        // Shifted mean: identical votes reproduce the sample exactly.
        for (c, out) in [o0, o1, o2].into_iter().enumerate() {
            let first = source_image.get(votes[0].0, votes[0].1, c);
            let dev: f64 = votes.iter().map(|&(y, x)| source_image.get(y, x, c) - first).sum();
            *out = first + dev / votes.len() as f64;
        }
    }
    Ok(Image::from_fn(h, w, |i, j, c| planes[(c * h + i) * w + j]))
}
