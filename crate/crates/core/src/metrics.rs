//! Objective scores for a retargeted image: the feature remain ratio (FRR)
//! and the feature dissimilarity (FD) over the four pyramid levels.

use serde::{Deserialize, Serialize};

use crate::backbone::{extract_pyramid, FeaturePyramid, WeightsBundle};
use crate::error::{invalid, shape, Result};
use crate::nnf::{patchmatch, warp, NNField, PatchMatchParams};
use crate::tensor::Image;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub frr: f64,
    pub fd: f64,
}

/// Mean over levels of `sum(ret) / sum(orig)`.
pub fn frr(orig: &FeaturePyramid, ret: &FeaturePyramid) -> Result<f64> {
    let mut total = 0.0;
    for (l, (o, r)) in orig.iter().zip(ret.iter()).enumerate() {
        let denom = o.sum();
        if denom == 0.0 {
            return Err(invalid(format!("original level {} has zero total activation", l + 1)));
        }
        total += r.sum() / denom;
    }
    Ok(total / 4.0)
}

fn level_sse(orig: &FeaturePyramid, fields: &[NNField; 4], ret: &FeaturePyramid) -> Result<[(f64, usize); 4]> {
    let mut out = [(0.0, 0); 4];
    for (l, ((o, r), field)) in orig.iter().zip(ret.iter()).zip(fields).enumerate() {
        if (field.height(), field.width()) != (r.height(), r.width()) {
            return Err(shape(format!(
                "level {} field is {}x{} but the retargeted map is {}x{}",
                l + 1,
                field.height(),
                field.width(),
                r.height(),
                r.width()
            )));
        }
        let warped = warp(o, field)?;
        if warped.channels() != r.channels() {
            return Err(shape(format!("level {} channel counts differ", l + 1)));
        }
        let sse = warped.data().iter().zip(r.data()).map(|(a, b)| (a - b) * (a - b)).sum();
        out[l] = (sse, r.len());
    }
    Ok(out)
}

/// Mean over levels of the summed squared difference between the warped
/// original features and the retargeted features. Not normalized by size.
pub fn fd(orig: &FeaturePyramid, fields: &[NNField; 4], ret: &FeaturePyramid) -> Result<f64> {
    Ok(level_sse(orig, fields, ret)?.iter().map(|(s, _)| s).sum::<f64>() / 4.0)
}

/// Like [`fd`] but each level's sum is divided by its element count.
pub fn fd_per_element(orig: &FeaturePyramid, fields: &[NNField; 4], ret: &FeaturePyramid) -> Result<f64> {
    Ok(level_sse(orig, fields, ret)?.iter().map(|(s, n)| s / *n as f64).sum::<f64>() / 4.0)
}

/// Per-level PatchMatch from the retargeted pyramid into the original one,
/// with the default metric and seed 0.
pub fn evaluation_fields(orig: &FeaturePyramid, ret: &FeaturePyramid) -> Result<[NNField; 4]> {
    let params = PatchMatchParams::default();
    let fields: Vec<NNField> = orig.iter().zip(ret.iter()).map(|(o, r)| patchmatch(r, o, &params)).collect::<Result<_>>()?;
    Ok(fields.try_into().expect("four levels"))
}

/// FRR and FD between two pyramids, with evaluation fields from PatchMatch.
pub fn score_pyramids(orig: &FeaturePyramid, ret: &FeaturePyramid) -> Result<Scores> {
    let fields = evaluation_fields(orig, ret)?;
    Ok(Scores { frr: frr(orig, ret)?, fd: fd(orig, &fields, ret)? })
}

/// Scores a retargeted image against its original. Both are fed through the
/// backbone, so both must be at least 32 pixels on each side.
pub fn score(original: &Image, retargeted: &Image, w: &WeightsBundle) -> Result<Scores> {
    score_pyramids(&extract_pyramid(original, w)?, &extract_pyramid(retargeted, w)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{random_feature_map, random_weights, scene};
    use crate::tensor::FeatureMap;

    fn pyramid(seed: u64) -> FeaturePyramid {
        let dims = [(12, 10, 3), (6, 5, 4), (3, 3, 5), (2, 2, 6)];
        FeaturePyramid {
            levels: std::array::from_fn(|l| {
                let (h, w, c) = dims[l];
                random_feature_map(l as u32 + 1, h, w, c, seed + l as u64)
            }),
        }
    }

    fn identity_fields(p: &FeaturePyramid) -> [NNField; 4] {
        std::array::from_fn(|l| {
            let f = &p.levels[l];
            NNField::identity(f.height(), f.width(), f.height(), f.width())
        })
    }

    #[test]
    fn identical_pyramids() {
        let p = pyramid(1);
        assert_eq!(frr(&p, &p).unwrap(), 1.0);
        assert_eq!(fd(&p, &identity_fields(&p), &p).unwrap(), 0.0);
    }

    #[test]
    fn half_mass_gives_half() {
        let p = pyramid(2);
        let mut half = p.clone();
        for l in half.levels.iter_mut() {
            l.data_mut().iter_mut().for_each(|v| *v *= 0.5);
        }
        assert!((frr(&p, &half).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn single_element_difference() {
        let p = pyramid(3);
        let mut q = p.clone();
        let v = q.levels[2].get(1, 1, 2);
        q.levels[2].set(1, 1, 2, v + 0.25);
        let fields = identity_fields(&p);
        assert!((fd(&p, &fields, &q).unwrap() - 0.0625 / 4.0).abs() < 1e-15);
        let n = q.levels[2].len() as f64;
        assert!((fd_per_element(&p, &fields, &q).unwrap() - 0.0625 / n / 4.0).abs() < 1e-15);
    }

    #[test]
    fn frr_ignores_column_order() {
        let p = pyramid(4);
        let mut q = p.clone();
        for l in q.levels.iter_mut() {
            let cols: Vec<usize> = (0..l.width()).rev().collect();
            *l = l.gather_columns(&cols).unwrap();
        }
        assert!((frr(&p, &q).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_original_is_an_error() {
        let mut p = pyramid(5);
        p.levels[1] = FeatureMap::zeros(2, 6, 5, 4);
        assert!(frr(&p, &pyramid(6)).is_err());
    }

    #[test]
    fn mismatched_fields_are_rejected() {
        let p = pyramid(7);
        let mut fields = identity_fields(&p);
        fields[0] = NNField::identity(3, 3, 12, 10);
        assert!(fd(&p, &fields, &p).is_err());
    }

    #[test]
    fn image_self_score() {
        let w = random_weights(&[4, 4, 6, 6, 8, 8, 8, 8, 10], 1);
        let img = scene(32, 40, 1);
        let s = score(&img, &img, &w).unwrap();
        assert_eq!(s.frr, 1.0);
        assert!(s.fd.is_finite() && s.fd >= 0.0);
    }
}
