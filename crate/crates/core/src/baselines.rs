//! Classic retargeting operators: uniform scaling (SCL), cropping (CR), seam
//! carving (SC) and min-importance column removal. Each works on images
//! (gradient-magnitude energy) and on feature maps (channel-sum importance).
//!
//! Besides the resized raster every operator reports, for each output row, the
//! source column each output column came from. The pipeline turns that into
//! an exact correspondence field instead of searching for one.

use crate::error::{invalid, Result};
use crate::tensor::{bilinear_resize, scaling_source_index, Axis, FeatureMap, Grid, Raster};
use crate::urs::target_width;

/// `rows[i][k]` is the source column of output column `k` in row `i`, in the
/// column-retargeting orientation (transposed for [`Axis::Rows`]).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexMap {
    pub rows: Vec<Vec<usize>>,
}

impl IndexMap {
    pub fn uniform(height: usize, columns: Vec<usize>) -> Self {
        Self { rows: vec![columns; height] }
    }
}

/// Output of an operator together with its index map.
#[derive(Clone, Debug)]
pub struct Retargeted<R> {
    pub output: R,
    pub index_map: IndexMap,
}

/// An 8-connected top-to-bottom path.
#[derive(Clone, Debug, PartialEq)]
pub struct SeamPath {
    pub columns: Vec<usize>,
    pub energy: f64,
}

fn extent(planes: &FeatureMap, axis: Axis) -> usize {
    match axis {
        Axis::Columns => planes.width(),
        Axis::Rows => planes.height(),
    }
}

/// Runs a column-oriented operator along `axis`.
fn along<R: Raster, T>(
    r: &R,
    axis: Axis,
    op: impl FnOnce(FeatureMap, fn(&FeatureMap) -> Grid) -> Result<(FeatureMap, IndexMap, T)>,
) -> Result<(Retargeted<R>, T)> {
    let planes = r.to_planes();
    let (out, map, extra) = match axis {
        Axis::Columns => op(planes, energy_of::<R>)?,
        Axis::Rows => {
            let (o, m, e) = op(planes.transpose_spatial(), energy_of::<R>)?;
            (o.transpose_spatial(), m, e)
        }
    };
    Ok((Retargeted { output: R::from_planes(out), index_map: map }, extra))
}

fn energy_of<R: Raster>(planes: &FeatureMap) -> Grid {
    R::from_planes(planes.clone()).energy()
}

fn check_target(width: usize, target: usize) -> Result<()> {
    if target == 0 || target > width {
        return Err(invalid(format!("target size {target} must be in 1..={width}")));
    }
    Ok(())
}

/// Uniform scaling to `round(epsilon * extent)`.
pub fn scl<R: Raster>(r: &R, epsilon: f64, axis: Axis) -> Result<R> {
    let t = target_width(extent(&r.to_planes(), axis), epsilon)?;
    Ok(scl_to(r, t, axis)?.output)
}

/// Corner-aligned bilinear scaling along `axis`. The index map records the
/// nearest source column of each output column.
pub fn scl_to<R: Raster>(r: &R, target: usize, axis: Axis) -> Result<Retargeted<R>> {
    Ok(along(r, axis, |p, _| {
        check_target(p.width(), target)?;
        let map = IndexMap::uniform(p.height(), (0..target).map(|k| scaling_source_index(p.width(), target, k)).collect());
        let out = bilinear_resize(&p, p.height(), target)?;
        Ok((out, map, ()))
    })?
    .0)
}

/// Offset of the `width`-wide window with the largest summed column energy.
/// Ties go to the window closest to the centre, then to the left.
pub fn best_window(column_energy: &[f64], width: usize) -> usize {
    let n = column_energy.len();
    let total: f64 = column_energy.iter().map(|v| v.abs()).sum();
    let tol = 1e-12 * total.max(f64::MIN_POSITIVE);
    let sums: Vec<f64> = (0..=n - width).map(|o| column_energy[o..o + width].iter().sum()).collect();
    let best = sums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let centre2 = (n - width) as isize;
    (0..sums.len())
        .filter(|&o| sums[o] >= best - tol)
        .min_by_key(|&o| ((2 * o as isize - centre2).abs(), o))
        .unwrap()
}

/// Crops to `round(epsilon * extent)`, returning the window offset.
pub fn crop<R: Raster>(r: &R, epsilon: f64, axis: Axis) -> Result<(R, usize)> {
    let t = target_width(extent(&r.to_planes(), axis), epsilon)?;
    let (out, offset) = crop_to(r, t, axis)?;
    Ok((out.output, offset))
}

/// Automatic crop: the maximum-energy window of the given size.
pub fn crop_to<R: Raster>(r: &R, target: usize, axis: Axis) -> Result<(Retargeted<R>, usize)> {
    along(r, axis, |p, energy| {
        check_target(p.width(), target)?;
        let offset = best_window(&energy(&p).column_sums(), target);
        let out = p.crop_columns(offset, target)?;
        Ok((out, IndexMap::uniform(p.height(), (offset..offset + target).collect()), offset))
    })
}

/// Crop at a caller-chosen offset.
pub fn crop_at<R: Raster>(r: &R, offset: usize, target: usize, axis: Axis) -> Result<Retargeted<R>> {
    Ok(along(r, axis, |p, _| {
        check_target(p.width(), target)?;
        if offset + target > p.width() {
            return Err(invalid(format!("crop window [{offset}, {}) exceeds extent {}", offset + target, p.width())));
        }
        let out = p.crop_columns(offset, target)?;
        Ok((out, IndexMap::uniform(p.height(), (offset..offset + target).collect()), ()))
    })?
    .0)
}

/// Minimum-energy vertical seam by dynamic programming. Ties, both for the
/// end point and along the path, go to the smaller column index.
pub fn find_seam(energy: &Grid) -> SeamPath {
    let (h, w) = (energy.height(), energy.width());
    let mut cost = energy.row(0).to_vec();
    let mut back = vec![0usize; h * w];
    for i in 1..h {
        let prev = cost.clone();
        for j in 0..w {
            let lo = j.saturating_sub(1);
            let hi = (j + 1).min(w - 1);
            let mut arg = lo;
            for c in lo + 1..=hi {
                if prev[c] < prev[arg] {
                    arg = c;
                }
            }
            back[i * w + j] = arg;
            cost[j] = prev[arg] + energy.get(i, j);
        }
    }
    let mut end = 0;
    for j in 1..w {
        if cost[j] < cost[end] {
            end = j;
        }
    }
    let mut columns = vec![0; h];
    columns[h - 1] = end;
    for i in (1..h).rev() {
        columns[i - 1] = back[i * w + columns[i]];
    }
    SeamPath { columns, energy: cost[end] }
}

/// Removes seams one at a time, recomputing the energy after each, until
/// `target` columns remain.
pub fn seam_carve_to<R: Raster>(r: &R, target: usize, axis: Axis) -> Result<(Retargeted<R>, Vec<SeamPath>)> {
    along(r, axis, |p, energy| {
        check_target(p.width(), target)?;
        let mut cur = p;
        let mut origin: Vec<Vec<usize>> = vec![(0..cur.width()).collect(); cur.height()];
        let mut seams = Vec::new();
        while cur.width() > target {
            let seam = find_seam(&energy(&cur));
            let keep: Vec<Vec<usize>> = seam
                .columns
                .iter()
                .map(|&s| (0..cur.width()).filter(|&j| j != s).collect())
                .collect();
            cur = cur.gather_rows_columns(&keep)?;
            for (o, &s) in origin.iter_mut().zip(&seam.columns) {
                o.remove(s);
            }
            seams.push(seam);
        }
        Ok((cur, IndexMap { rows: origin }, seams))
    })
}

/// Seam carving to `round(epsilon * extent)`. Seams are reported in the
/// coordinates of the raster they were removed from.
pub fn seam_carve<R: Raster>(r: &R, epsilon: f64, axis: Axis) -> Result<(R, Vec<SeamPath>)> {
    let t = target_width(extent(&r.to_planes(), axis), epsilon)?;
    let (out, seams) = seam_carve_to(r, t, axis)?;
    Ok((out.output, seams))
}

/// Indices of the `k` smallest values; ties go to the smaller index.
pub fn lowest_columns(sums: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..sums.len()).collect();
    order.sort_by(|&a, &b| sums[a].total_cmp(&sums[b]).then(a.cmp(&b)));
    let mut removed = order[..k].to_vec();
    removed.sort_unstable();
    removed
}

/// Drops the lowest-energy columns until `target` remain.
pub fn column_removal_to<R: Raster>(r: &R, target: usize, axis: Axis) -> Result<(Retargeted<R>, Vec<usize>)> {
    along(r, axis, |p, energy| {
        check_target(p.width(), target)?;
        let removed = lowest_columns(&energy(&p).column_sums(), p.width() - target);
        let kept: Vec<usize> = (0..p.width()).filter(|j| removed.binary_search(j).is_err()).collect();
        let out = p.gather_columns(&kept)?;
        Ok((out, IndexMap::uniform(p.height(), kept), removed))
    })
}

/// Column removal to `round(epsilon * extent)`, returning removed indices.
pub fn column_removal<R: Raster>(r: &R, epsilon: f64, axis: Axis) -> Result<(R, Vec<usize>)> {
    let t = target_width(extent(&r.to_planes(), axis), epsilon)?;
    let (out, removed) = column_removal_to(r, t, axis)?;
    Ok((out.output, removed))
}

/// Pixel-space baseline selectable by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Scl,
    Crop,
    SeamCarving,
    ColumnRemoval,
}

impl Method {
    pub const ALL: [Method; 4] = [Self::Scl, Self::Crop, Self::SeamCarving, Self::ColumnRemoval];

    pub fn key(self) -> &'static str {
        match self {
            Self::Scl => "scl",
            Self::Crop => "cr",
            Self::SeamCarving => "sc",
            Self::ColumnRemoval => "colrm",
        }
    }

    /// Runs the method to `round(epsilon * extent)`. `crop_offset` fixes the
    /// crop window instead of searching for it; other methods ignore it.
    pub fn apply<R: Raster>(self, r: &R, epsilon: f64, axis: Axis, crop_offset: Option<usize>) -> Result<R> {
        let t = target_width(extent(&r.to_planes(), axis), epsilon)?;
        Ok(match self {
            Self::Scl => scl_to(r, t, axis)?.output,
            Self::Crop => match crop_offset {
                Some(o) => crop_at(r, o, t, axis)?.output,
                None => crop_to(r, t, axis)?.0.output,
            },
            Self::SeamCarving => seam_carve_to(r, t, axis)?.0.output,
            Self::ColumnRemoval => column_removal_to(r, t, axis)?.0.output,
        })
    }
}

impl std::str::FromStr for Method {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.key() == s)
            .ok_or_else(|| invalid(format!("unknown method `{s}` (expected scl, cr, sc or colrm)")))
    }
}
