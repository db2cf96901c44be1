//! Raster and tensor types shared by the whole pipeline.
//!
//! Every tensor is stored row-major with channel-outer planes: element
//! `(i, j, c)` of an `h x w x c` tensor lives at `(c * h + i) * w + j`.

use std::path::Path;

use crate::error::{invalid, shape, Result};

/// Spatial direction along which a raster is retargeted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Axis {
    /// Shrink the width (remove columns).
    #[default]
    Columns,
    /// Shrink the height. Implemented as column retargeting of the transpose.
    Rows,
}

/// A real-valued `h x w` matrix (importance maps, energies).
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(shape(format!(
                "grid {height}x{width} needs {} values, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(Self { height, width, data })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self { height, width, data: vec![0.0; height * width] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(shape("ragged rows"));
        }
        Self::new(height, width, rows.concat())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.width + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    /// Sum of each column, accumulated top to bottom.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.width];
        for i in 0..self.height {
            for (s, v) in sums.iter_mut().zip(self.row(i)) {
                *s += v;
            }
        }
        sums
    }
}

/// One level of a feature pyramid: an `h x w x c` real tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    layer: u32,
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(layer: u32, height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(shape(format!(
                "feature map {height}x{width}x{channels} needs {} values, got {}",
                height * width * channels,
                data.len()
            )));
        }
        Ok(Self { layer, height, width, channels, data })
    }

    pub fn zeros(layer: u32, height: usize, width: usize, channels: usize) -> Self {
        Self { layer, height, width, channels, data: vec![0.0; height * width * channels] }
    }

    /// Builds a map from `f(i, j, c)`.
    pub fn from_fn(
        layer: u32,
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(height * width * channels);
        for c in 0..channels {
            for i in 0..height {
                for j in 0..width {
                    data.push(f(i, j, c));
                }
            }
        }
        Self { layer, height, width, channels, data }
    }

    pub fn layer(&self) -> u32 {
        self.layer
    }

    pub fn with_layer(mut self, layer: u32) -> Self {
        self.layer = layer;
        self
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `(height, width, channels)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, c: usize) -> usize {
        (c * self.height + i) * self.width + j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, c: usize) -> f64 {
        self.data[self.index(i, j, c)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, c: usize, v: f64) {
        let k = self.index(i, j, c);
        self.data[k] = v;
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.height * self.width;
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Swaps the two spatial axes: output `(i, j, c)` is input `(j, i, c)`.
    pub fn transpose_spatial(&self) -> FeatureMap {
        let (h, w) = (self.height, self.width);
        let mut data = vec![0.0; self.data.len()];
        for c in 0..self.channels {
            let src = self.plane(c);
            let dst = &mut data[c * h * w..(c + 1) * h * w];
            for i in 0..h {
                for j in 0..w {
                    dst[j * h + i] = src[i * w + j];
                }
            }
        }
        FeatureMap { layer: self.layer, height: w, width: h, channels: self.channels, data }
    }

    /// Keeps the listed columns, in the given order.
    pub fn gather_columns(&self, columns: &[usize]) -> Result<FeatureMap> {
        if let Some(&bad) = columns.iter().find(|&&j| j >= self.width) {
            return Err(shape(format!("column {bad} out of range for width {}", self.width)));
        }
        Ok(FeatureMap::from_fn(self.layer, self.height, columns.len(), self.channels, |i, k, c| {
            self.get(i, columns[k], c)
        }))
    }

    /// Per-row column gather: row `i` of the output is `row_columns[i]` of the input.
    pub fn gather_rows_columns(&self, row_columns: &[Vec<usize>]) -> Result<FeatureMap> {
        if row_columns.len() != self.height {
            return Err(shape("one column list per row is required"));
        }
        let width = row_columns.first().map_or(0, Vec::len);
        if row_columns.iter().any(|r| r.len() != width || r.iter().any(|&j| j >= self.width)) {
            return Err(shape("inconsistent per-row column lists"));
        }
        Ok(FeatureMap::from_fn(self.layer, self.height, width, self.channels, |i, k, c| {
            self.get(i, row_columns[i][k], c)
        }))
    }

    /// Contiguous column window `[offset, offset + width)`.
    pub fn crop_columns(&self, offset: usize, width: usize) -> Result<FeatureMap> {
        if offset + width > self.width || width == 0 {
            return Err(shape(format!(
                "window [{offset}, {}) does not fit width {}",
                offset + width,
                self.width
            )));
        }
        let cols: Vec<usize> = (offset..offset + width).collect();
        self.gather_columns(&cols)
    }

    /// Per-position channel sum.
    pub fn channel_sum(&self) -> Grid {
        let mut g = Grid::zeros(self.height, self.width);
        for c in 0..self.channels {
            for (acc, v) in g.data.iter_mut().zip(self.plane(c)) {
                *acc += v;
            }
        }
        g
    }
}

/// An RGB raster with real samples in `[0, 255]`, stored as three planes.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(invalid("image dimensions must be positive"));
        }
        if data.len() != height * width * 3 {
            return Err(shape(format!(
                "image {height}x{width} needs {} samples, got {}",
                height * width * 3,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 255.0) {
            return Err(invalid(format!("pixel value {v} outside [0, 255]")));
        }
        Ok(Self { height, width, data })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width * 3);
        for c in 0..3 {
            for i in 0..height {
                for j in 0..width {
                    data.push(f(i, j, c).clamp(0.0, 255.0));
                }
            }
        }
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, c: usize) -> f64 {
        self.data[(c * self.height + i) * self.width + j]
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    /// Rec. 601 luma.
    pub fn luminance(&self) -> Grid {
        let (r, g, b) = (self.plane(0), self.plane(1), self.plane(2));
        let data = r
            .iter()
            .zip(g)
            .zip(b)
            .map(|((r, g), b)| 0.299 * r + 0.587 * g + 0.114 * b)
            .collect();
        Grid { height: self.height, width: self.width, data }
    }

    pub fn transpose(&self) -> Image {
        Image::from_planes(self.to_planes().transpose_spatial())
    }

    pub fn from_rgb8(img: &image::RgbImage) -> Self {
        let (w, h) = (img.width() as usize, img.height() as usize);
        Self::from_fn(h, w, |i, j, c| f64::from(img.get_pixel(j as u32, i as u32)[c]))
    }

    /// Quantizes to 8 bits (round to nearest).
    pub fn to_rgb8(&self) -> image::RgbImage {
        image::RgbImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            let px = |c| self.get(y as usize, x as usize, c).round().clamp(0.0, 255.0) as u8;
            image::Rgb([px(0), px(1), px(2)])
        })
    }

    /// Reads a PNG or JPEG file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let img = image::open(path)?.to_rgb8();
        Ok(Self::from_rgb8(&img))
    }

    /// Writes an 8-bit PNG.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_rgb8().save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }
}

/// Anything that can be viewed as a planar real tensor: feature maps and images.
pub trait Raster: Clone {
    fn to_planes(&self) -> FeatureMap;
    fn from_planes(planes: FeatureMap) -> Self;
    /// Per-position energy used by the importance-driven baselines.
    fn energy(&self) -> Grid;
}

impl Raster for FeatureMap {
    fn to_planes(&self) -> FeatureMap {
        self.clone()
    }

    fn from_planes(planes: FeatureMap) -> Self {
        planes
    }

    fn energy(&self) -> Grid {
        self.channel_sum()
    }
}

impl Raster for Image {
    fn to_planes(&self) -> FeatureMap {
        FeatureMap { layer: 0, height: self.height, width: self.width, channels: 3, data: self.data.clone() }
    }

    /// Samples are clamped into `[0, 255]`.
    fn from_planes(planes: FeatureMap) -> Self {
        assert_eq!(planes.channels, 3, "images have three channels");
        let data = planes.data.into_iter().map(|v| v.clamp(0.0, 255.0)).collect();
        Image { height: planes.height, width: planes.width, data }
    }

    fn energy(&self) -> Grid {
        gradient_magnitude(&self.luminance())
    }
}

/// Central-difference gradient magnitude, one-sided at the borders.
pub fn gradient_magnitude(g: &Grid) -> Grid {
    let (h, w) = (g.height, g.width);
    let diff = |lo: f64, hi: f64, span: usize| if span == 0 { 0.0 } else { (hi - lo) / span as f64 };
    let mut out = Grid::zeros(h, w);
    for i in 0..h {
        for j in 0..w {
            let (jl, jr) = (j.saturating_sub(1), (j + 1).min(w - 1));
            let (iu, id) = (i.saturating_sub(1), (i + 1).min(h - 1));
            let gx = diff(g.get(i, jl), g.get(i, jr), jr - jl);
            let gy = diff(g.get(iu, j), g.get(id, j), id - iu);
            out.set(i, j, (gx * gx + gy * gy).sqrt());
        }
    }
    out
}

/// Interpolation taps for one output coordinate: `lo + t * (hi - lo)`.
#[derive(Clone, Copy, Debug)]
struct Tap {
    lo: usize,
    hi: usize,
    t: f64,
}

/// Corner-aligned sampling positions. A single output sample averages the two ends.
fn taps(old: usize, new: usize) -> Vec<Tap> {
    if new == 1 {
        return vec![Tap { lo: 0, hi: old - 1, t: 0.5 }];
    }
    (0..new)
        .map(|k| {
            let x = (k * (old - 1)) as f64 / (new - 1) as f64;
            let lo = (x.floor() as usize).min(old - 1);
            let hi = (lo + 1).min(old - 1);
            Tap { lo, hi, t: x - lo as f64 }
        })
        .collect()
}

/// Source column an output column of a corner-aligned resize is closest to.
pub fn scaling_source_index(old: usize, new: usize, k: usize) -> usize {
    if new == 1 {
        return old / 2;
    }
    (((k * (old - 1)) as f64 / (new - 1) as f64).round() as usize).min(old - 1)
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

/// Separable bilinear resize with corner-aligned sampling; channels are independent.
pub fn bilinear_resize<R: Raster>(raster: &R, new_height: usize, new_width: usize) -> Result<R> {
    if new_height == 0 || new_width == 0 {
        return Err(invalid("target dimensions must be positive"));
    }
    let src = raster.to_planes();
    let (h, w, ch) = src.dims();
    if (h, w) == (new_height, new_width) {
        return Ok(raster.clone());
    }
    let col_taps = taps(w, new_width);
    let row_taps = taps(h, new_height);
    let mut out = FeatureMap::zeros(src.layer, new_height, new_width, ch);
    let mut horiz = vec![0.0; h * new_width];
    for c in 0..ch {
        let plane = src.plane(c);
        for i in 0..h {
            let row = &plane[i * w..(i + 1) * w];
            for (k, tap) in col_taps.iter().enumerate() {
                horiz[i * new_width + k] = lerp(row[tap.lo], row[tap.hi], tap.t);
            }
        }
        let dst = out.plane_mut(c);
        for (r, tap) in row_taps.iter().enumerate() {
            for k in 0..new_width {
                dst[r * new_width + k] =
                    lerp(horiz[tap.lo * new_width + k], horiz[tap.hi * new_width + k], tap.t);
            }
        }
    }
    Ok(R::from_planes(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(h: usize, w: usize, c: usize) -> FeatureMap {
        FeatureMap::from_fn(1, h, w, c, |i, j, k| (i * 100 + j * 10 + k) as f64)
    }

    #[test]
    fn transpose_row_vector() {
        let f = FeatureMap::new(1, 1, 5, 1, vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let t = f.transpose_spatial();
        assert_eq!(t.dims(), (5, 1, 1));
        assert_eq!(t.data(), &[1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn transpose_indexing() {
        let f = ramp(2, 3, 2);
        let t = f.transpose_spatial();
        assert_eq!(t.dims(), (3, 2, 2));
        assert_eq!(t.get(0, 1, 1), f.get(1, 0, 1));
        assert_eq!(t.get(2, 0, 1), f.get(0, 2, 1));
    }

    #[test]
    fn bilinear_degenerate_single_sample() {
        let f = FeatureMap::new(1, 2, 2, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let r = bilinear_resize(&f, 1, 1).unwrap();
        assert_eq!(r.data(), &[2.5]);
    }

    #[test]
    fn bilinear_ramp_upsample() {
        let f = FeatureMap::new(1, 1, 3, 1, vec![0.0, 1.0, 2.0]).unwrap();
        let r = bilinear_resize(&f, 1, 5).unwrap();
        assert_eq!(r.data(), &[0.0, 0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn bilinear_rejects_zero_dims() {
        let f = ramp(2, 2, 1);
        assert!(bilinear_resize(&f, 0, 3).is_err());
    }

    #[test]
    fn image_rejects_out_of_range() {
        assert!(Image::new(1, 1, vec![0.0, 10.0, 256.0]).is_err());
        assert!(Image::new(1, 1, vec![0.0, 10.0, 255.0]).is_ok());
    }

    #[test]
    fn scaling_index_single_column_is_centre() {
        assert_eq!(scaling_source_index(5, 1, 0), 2);
        assert_eq!(scaling_source_index(4, 1, 0), 2);
        assert_eq!(scaling_source_index(1, 1, 0), 0);
        assert_eq!(scaling_source_index(4, 2, 1), 3);
    }

    proptest! {
        #[test]
        fn transpose_is_involution(h in 1usize..7, w in 1usize..7, c in 1usize..4, seed in any::<u64>()) {
            let f = FeatureMap::from_fn(2, h, w, c, |i, j, k| {
                ((seed ^ (i * 31 + j * 7 + k) as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) >> 11) as f64
            });
            prop_assert_eq!(f.transpose_spatial().transpose_spatial(), f);
        }

        #[test]
        fn bilinear_identity(h in 1usize..6, w in 1usize..6, v in proptest::collection::vec(-10.0f64..10.0, 36)) {
            let f = FeatureMap::new(1, h, w, 1, v[..h * w].to_vec()).unwrap();
            prop_assert_eq!(bilinear_resize(&f, h, w).unwrap(), f);
        }

        #[test]
        fn bilinear_constant_stays_constant(h in 1usize..6, w in 1usize..6, nh in 1usize..9, nw in 1usize..9, v in -1e3f64..1e3) {
            let f = FeatureMap::from_fn(1, h, w, 2, |_, _, _| v);
            let r = bilinear_resize(&f, nh, nw).unwrap();
            prop_assert!(r.data().iter().all(|&x| x == v));
        }
    }
}
