//! Uniform re-sampling (UrS): shrink a feature map by removing columns picked
//! by evenly spaced samples over its cumulative obscurity.
//!
//! Column importance is the per-column sum of the channel-summed activations.
//! Obscurity is its negation, min-max normalized to `[0, 1]` and prefix-summed
//! into a cumulative profile `s`. To remove `K` columns, the sample points
//! `r * s(w) / K` for `r = 1..=K` are dropped onto `s`; each lands in the column
//! whose span `(s(j-1), s(j)]` contains it. Wide (obscure) columns catch samples,
//! important columns (obscurity near zero) have almost no span and survive, and
//! removals are spread across the whole width instead of clustering.

use std::collections::BTreeSet;

use crate::error::{invalid, shape, Result};
use crate::tensor::{Axis, FeatureMap, Grid};

/// Slack on the interval comparisons, relative to the total obscurity `s(w)`.
/// Absorbs rounding so that a sample point landing on a boundary in exact
/// arithmetic goes to the left column (right-closed intervals).
pub const BOUNDARY_TOLERANCE: f64 = 1e-12;

/// Per-position channel sum.
pub fn importance_map(f: &FeatureMap) -> Grid {
    f.channel_sum()
}

/// Raw, normalized and cumulative column obscurity.
#[derive(Clone, Debug, PartialEq)]
pub struct ObscurityProfile {
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
    pub cumulative: Vec<f64>,
}

impl ObscurityProfile {
    /// A profile given directly by its normalized values (raw is set equal).
    pub fn from_normalized(normalized: Vec<f64>) -> Result<Self> {
        if normalized.len() < 2 {
            return Err(invalid("an obscurity profile needs at least two columns"));
        }
        if normalized.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(invalid("normalized obscurity must be finite and non-negative"));
        }
        let cumulative = prefix_sums(&normalized);
        Ok(Self { raw: normalized.clone(), normalized, cumulative })
    }

    pub fn width(&self) -> usize {
        self.normalized.len()
    }

    /// `s(w)`.
    pub fn total(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }
}

fn prefix_sums(v: &[f64]) -> Vec<f64> {
    v.iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

/// Obscurity of each column of an importance map. A constant profile, where
/// min-max normalization is undefined, normalizes to all ones.
pub fn obscurity_profile(m: &Grid) -> Result<ObscurityProfile> {
    if m.width() < 2 {
        return Err(invalid(format!("obscurity needs width >= 2, got {}", m.width())));
    }
    let raw: Vec<f64> = m.column_sums().into_iter().map(|s| -s).collect();
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let normalized: Vec<f64> = if hi > lo {
        raw.iter().map(|u| (u - lo) / (hi - lo)).collect()
    } else {
        vec![1.0; raw.len()]
    };
    let cumulative = prefix_sums(&normalized);
    Ok(ObscurityProfile { raw, normalized, cumulative })
}

/// Removed and preserved column indices (0-based, both ascending).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColumnSelection {
    pub removed: Vec<usize>,
    pub preserved: Vec<usize>,
    pub source_width: usize,
}

impl ColumnSelection {
    pub fn target_width(&self) -> usize {
        self.preserved.len()
    }

    /// Keeps every column.
    pub fn identity(width: usize) -> Self {
        Self { removed: Vec::new(), preserved: (0..width).collect(), source_width: width }
    }

    fn from_removed(removed: BTreeSet<usize>, width: usize) -> Self {
        let preserved = (0..width).filter(|j| !removed.contains(j)).collect();
        Self { removed: removed.into_iter().collect(), preserved, source_width: width }
    }
}

/// `round(epsilon * width)` with halves rounded up.
pub fn target_width(width: usize, epsilon: f64) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(invalid("epsilon must be in (0,1]"));
    }
    let t = (epsilon * width as f64 + 0.5).floor() as usize;
    if t == 0 {
        return Err(invalid(format!("epsilon {epsilon} leaves no columns of {width}")));
    }
    Ok(t.min(width))
}

/// Chooses `w - round(epsilon * w)` columns to remove.
pub fn select_columns(p: &ObscurityProfile, epsilon: f64) -> Result<ColumnSelection> {
    let t = target_width(p.width(), epsilon)?;
    select_columns_to_width(p, t)
}

/// Chooses columns to remove so that exactly `target` survive.
///
/// Sample `r` sits at `s(w) * (r / K)`. Two samples in one column, or a sample
/// that falls in no column, leave a shortfall that is filled with the remaining
/// columns of highest normalized obscurity (lower index first on ties).
pub fn select_columns_to_width(p: &ObscurityProfile, target: usize) -> Result<ColumnSelection> {
    let w = p.width();
    if target == 0 || target > w {
        return Err(invalid(format!("target width {target} must be in 1..={w}")));
    }
    let k = w - target;
    if k == 0 {
        return Ok(ColumnSelection::identity(w));
    }
    let total = p.total();
    let tol = BOUNDARY_TOLERANCE * total.abs();
    let s = &p.cumulative;

    let mut removed = BTreeSet::new();
    let mut j = 0;
    for r in 1..=k {
        let point = total * (r as f64 / k as f64);
        while j < w && point > s[j] + tol {
            j += 1;
        }
        if j == w {
            break;
        }
        let left = if j == 0 { 0.0 } else { s[j - 1] };
        if point > left + tol {
            removed.insert(j);
        }
    }
    fill_shortfall(&mut removed, &p.normalized, k);
    Ok(ColumnSelection::from_removed(removed, w))
}

pub(crate) fn fill_shortfall(removed: &mut BTreeSet<usize>, normalized: &[f64], k: usize) {
    while removed.len() < k {
        let pick = (0..normalized.len())
            .filter(|j| !removed.contains(j))
            .fold(None, |best: Option<usize>, j| match best {
                Some(b) if normalized[b] >= normalized[j] => Some(b),
                _ => Some(j),
            })
            .expect("k < w leaves a candidate");
        removed.insert(pick);
    }
}

/// Copies the preserved columns, in order.
pub fn resample(f: &FeatureMap, sel: &ColumnSelection) -> Result<FeatureMap> {
    if sel.source_width != f.width() {
        return Err(shape(format!(
            "selection built for width {} applied to width {}",
            sel.source_width,
            f.width()
        )));
    }
    f.gather_columns(&sel.preserved)
}

/// Full UrS along `axis`; `Rows` runs the column path on the transpose.
pub fn urs_retarget(f: &FeatureMap, epsilon: f64, axis: Axis) -> Result<FeatureMap> {
    let extent = match axis {
        Axis::Columns => f.width(),
        Axis::Rows => f.height(),
    };
    let t = target_width(extent, epsilon)?;
    Ok(urs_retarget_to_width(f, t, axis)?.0)
}

/// UrS to an explicit size along `axis`, also returning the selection (in the
/// coordinates of the retargeted axis).
pub fn urs_retarget_to_width(f: &FeatureMap, target: usize, axis: Axis) -> Result<(FeatureMap, ColumnSelection)> {
    match axis {
        Axis::Columns => {
            let sel = if target == f.width() {
                ColumnSelection::identity(f.width())
            } else {
                select_columns_to_width(&obscurity_profile(&importance_map(f))?, target)?
            };
            Ok((resample(f, &sel)?, sel))
        }
        Axis::Rows => {
            let (g, sel) = urs_retarget_to_width(&f.transpose_spatial(), target, Axis::Columns)?;
            Ok((g.transpose_spatial(), sel))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::random_feature_map;
    use proptest::prelude::*;

    fn one_based(v: &[usize]) -> Vec<usize> {
        v.iter().map(|j| j + 1).collect()
    }

    #[test]
    fn importance_sums_channels() {
        let f = FeatureMap::new(1, 2, 2, 2, vec![1., 2., 3., 4., 5., 6., 7., 8.]).unwrap();
        assert_eq!(importance_map(&f).data(), &[6., 8., 10., 12.]);
        let single = random_feature_map(1, 3, 4, 1, 2);
        assert_eq!(importance_map(&single).data(), single.data());
        assert!(importance_map(&FeatureMap::zeros(1, 3, 3, 4)).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_column_profile() {
        let m = Grid::from_rows(&[vec![1., 2.], vec![3., 4.]]).unwrap();
        let p = obscurity_profile(&m).unwrap();
        assert_eq!(p.raw, vec![-4., -6.]);
        assert_eq!(p.normalized, vec![1., 0.]);
        assert_eq!(p.cumulative, vec![1., 1.]);
    }

    #[test]
    fn constant_profile_is_uniform() {
        let m = Grid::new(2, 4, vec![3.0; 8]).unwrap();
        let p = obscurity_profile(&m).unwrap();
        assert_eq!(p.normalized, vec![1.; 4]);
        assert_eq!(p.cumulative, vec![1., 2., 3., 4.]);
    }

    #[test]
    fn five_column_profile() {
        let m = Grid::from_rows(&[vec![12., 8., 11., 8., 9.]]).unwrap();
        let p = obscurity_profile(&m).unwrap();
        assert_eq!(p.raw, vec![-12., -8., -11., -8., -9.]);
        assert_eq!(p.normalized, vec![0., 1., 0.25, 1., 0.75]);
        assert_eq!(p.cumulative, vec![0., 1., 1.25, 2.25, 3.]);
    }

    #[test]
    fn narrow_profile_is_rejected() {
        assert!(obscurity_profile(&Grid::new(3, 1, vec![1., 2., 3.]).unwrap()).is_err());
    }

    #[test]
    fn five_column_worked_example() {
        let p = ObscurityProfile::from_normalized(vec![0.1, 0.3, 0.1, 0.4, 0.3]).unwrap();
        assert!((p.total() / 3.0 - 0.4).abs() < 1e-15);
        let sel = select_columns(&p, 0.4).unwrap();
        assert_eq!(one_based(&sel.removed), vec![2, 4, 5]);
        assert_eq!(one_based(&sel.preserved), vec![1, 3]);
    }

    #[test]
    fn uniform_profile_spreads_removals() {
        let p = ObscurityProfile::from_normalized(vec![1.0; 6]).unwrap();
        let sel = select_columns(&p, 0.5).unwrap();
        assert_eq!(one_based(&sel.removed), vec![2, 4, 6]);
    }

    #[test]
    fn epsilon_one_is_identity() {
        let p = ObscurityProfile::from_normalized(vec![0.2, 0.9, 0.0, 1.0]).unwrap();
        let sel = select_columns(&p, 1.0).unwrap();
        assert!(sel.removed.is_empty());
        assert_eq!(sel.preserved, vec![0, 1, 2, 3]);
    }

    #[test]
    fn epsilon_out_of_range() {
        let p = ObscurityProfile::from_normalized(vec![0.2, 0.9, 0.0, 1.0]).unwrap();
        for eps in [0.0, -0.3, 1.5, f64::NAN] {
            assert!(select_columns(&p, eps).is_err());
        }
        // round(0.1 * 4) = 0 columns would remain.
        assert!(select_columns(&p, 0.1).is_err());
    }

    #[test]
    fn collisions_are_filled_greedily() {
        // One huge obscure column catches both samples.
        let p = ObscurityProfile::from_normalized(vec![0.0, 1.0, 0.0, 0.2, 0.0]).unwrap();
        // s = [0, 1, 1, 1.2, 1.2], samples at 0.6 and 1.2 -> columns 1 and 3.
        assert_eq!(select_columns_to_width(&p, 3).unwrap().removed, vec![1, 3]);
        let p = ObscurityProfile::from_normalized(vec![0.1, 0.0, 0.0, 1.0, 0.0]).unwrap();
        // s = [0.1, 0.1, 0.1, 1.1, 1.1], samples at 0.55 and 1.1 both hit column 3;
        // the fill takes column 0, the most obscure one left.
        assert_eq!(select_columns_to_width(&p, 3).unwrap().removed, vec![0, 3]);
    }

    #[test]
    fn resample_gathers() {
        let f = FeatureMap::new(1, 1, 5, 1, vec![10., 20., 30., 40., 50.]).unwrap();
        let sel = ColumnSelection { removed: vec![1, 3, 4], preserved: vec![0, 2], source_width: 5 };
        assert_eq!(resample(&f, &sel).unwrap().data(), &[10., 30.]);
        assert_eq!(resample(&f, &ColumnSelection::identity(5)).unwrap(), f);
        assert!(resample(&f, &ColumnSelection::identity(4)).is_err());
    }

    #[test]
    fn retarget_shapes() {
        let f = random_feature_map(3, 6, 16, 3, 4);
        assert_eq!(urs_retarget(&f, 1.0, Axis::Columns).unwrap(), f);
        assert_eq!(urs_retarget(&f, 0.5, Axis::Columns).unwrap().width(), 8);
        let r = urs_retarget(&f, 0.5, Axis::Rows).unwrap();
        assert_eq!((r.height(), r.width()), (3, 16));
    }

    #[test]
    fn rows_equal_transposed_columns() {
        let f = random_feature_map(2, 10, 7, 2, 8);
        let rows = urs_retarget(&f, 0.6, Axis::Rows).unwrap();
        let cols = urs_retarget(&f.transpose_spatial(), 0.6, Axis::Columns).unwrap();
        assert_eq!(rows, cols.transpose_spatial());
    }

    fn profile_strategy() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.0f64..10.0, 2..40)
    }

    proptest! {
        #[test]
        fn removes_exactly_k(sums in profile_strategy(), eps in 0.05f64..1.0) {
            let w = sums.len();
            let m = Grid::new(1, w, sums).unwrap();
            let p = obscurity_profile(&m).unwrap();
            if let Ok(t) = target_width(w, eps) {
                let sel = select_columns(&p, eps).unwrap();
                prop_assert_eq!(sel.removed.len(), w - t);
                prop_assert_eq!(sel.preserved.len(), t);
                prop_assert!(sel.preserved.windows(2).all(|q| q[0] < q[1]));
                let mut all: Vec<_> = sel.removed.iter().chain(&sel.preserved).copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..w).collect::<Vec<_>>());
            }
        }

        #[test]
        fn most_obscure_column_removed_when_samples_are_dense(sums in profile_strategy(), eps in 0.05f64..1.0) {
            // A column of normalized width 1 must catch a sample whenever the
            // spacing s(w)/K is at most 1.
            let w = sums.len();
            let p = obscurity_profile(&Grid::new(1, w, sums).unwrap()).unwrap();
            if let Ok(t) = target_width(w, eps) {
                let k = w - t;
                if k >= 1 && p.total() / k as f64 <= 1.0 {
                    let sel = select_columns(&p, eps).unwrap();
                    let widest = (0..w).find(|&j| p.normalized[j] == 1.0).unwrap();
                    prop_assert!(sel.removed.contains(&widest));
                }
            }
        }
    }
}
