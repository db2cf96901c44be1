//! Independent reference implementations shared by the integration tests and
//! the acceptance harness. They favour obviousness over speed.

#![allow(dead_code)]

use deepir::backbone::{forward_between, WeightsBundle};
use deepir::nnf::{NNField, PatchMetric};
use deepir::urs::{ObscurityProfile, BOUNDARY_TOLERANCE};
use deepir::{FeatureMap, Grid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TINY_WIDTHS: [usize; 9] = [4, 4, 6, 6, 8, 8, 8, 8, 10];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Removed columns by testing every (column, sample) pair against the
/// right-closed interval rule, then topping up by obscurity.
pub fn urs_oracle(p: &ObscurityProfile, k: usize) -> Vec<usize> {
    let w = p.width();
    if k == 0 {
        return Vec::new();
    }
    let total = p.total();
    let tol = BOUNDARY_TOLERANCE * total.abs();
    let mut removed = vec![false; w];
    for (j, hit) in removed.iter_mut().enumerate() {
        let lo = if j == 0 { 0.0 } else { p.cumulative[j - 1] };
        let hi = p.cumulative[j];
        *hit = (1..=k).any(|r| {
            let x = total * (r as f64 / k as f64);
            lo + tol < x && x <= hi + tol
        });
    }
    let mut order: Vec<usize> = (0..w).collect();
    order.sort_by(|&a, &b| p.normalized[b].total_cmp(&p.normalized[a]).then(a.cmp(&b)));
    let mut count = removed.iter().filter(|&&r| r).count();
    for j in order {
        if count >= k {
            break;
        }
        if !removed[j] {
            removed[j] = true;
            count += 1;
        }
    }
    (0..w).filter(|&j| removed[j]).collect()
}

/// Minimum energy over every 8-connected top-to-bottom path, summed from the
/// top row down.
pub fn seam_oracle(e: &Grid) -> f64 {
    fn walk(e: &Grid, i: usize, j: usize, acc: f64, best: &mut f64) {
        let acc = acc + e.get(i, j);
        if i + 1 == e.height() {
            if acc < *best {
                *best = acc;
            }
            return;
        }
        for dj in [-1isize, 0, 1] {
            let nj = j as isize + dj;
            if nj >= 0 && (nj as usize) < e.width() {
                walk(e, i + 1, nj as usize, acc, best);
            }
        }
    }
    let mut best = f64::INFINITY;
    for j in 0..e.width() {
        walk(e, 0, j, 0.0, &mut best);
    }
    best
}

/// Patch distance written out directly from the definition.
pub fn patch_distance(q: &FeatureMap, s: &FeatureMap, qi: usize, qj: usize, si: usize, sj: usize, metric: PatchMetric) -> f64 {
    let unit = |f: &FeatureMap, i: usize, j: usize| -> Vec<f64> {
        let v: Vec<f64> = (0..f.channels()).map(|c| f.get(i, j, c)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if metric.normalize && n > 0.0 {
            v.iter().map(|x| x / n).collect()
        } else {
            v
        }
    };
    let r = metric.radius as isize;
    let mut total = 0.0;
    for di in -r..=r {
        for dj in -r..=r {
            let (y, x) = (qi as isize + di, qj as isize + dj);
            if y < 0 || x < 0 || y >= q.height() as isize || x >= q.width() as isize {
                continue;
            }
            let sy = (si as isize + di).clamp(0, s.height() as isize - 1) as usize;
            let sx = (sj as isize + dj).clamp(0, s.width() as isize - 1) as usize;
            let a = unit(q, y as usize, x as usize);
            let b = unit(s, sy, sx);
            total += a.iter().zip(&b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>();
        }
    }
    total
}

/// Best distance per query position over all source positions.
pub fn exhaustive_nnf(q: &FeatureMap, s: &FeatureMap, metric: PatchMetric) -> Vec<f64> {
    let mut out = Vec::with_capacity(q.height() * q.width());
    for i in 0..q.height() {
        for j in 0..q.width() {
            let mut best = f64::INFINITY;
            for a in 0..s.height() {
                for b in 0..s.width() {
                    best = best.min(patch_distance(q, s, i, j, a, b, metric));
                }
            }
            out.push(best);
        }
    }
    out
}

/// Outcome of comparing PatchMatch against the exhaustive optimum.
pub struct NnfStats {
    pub at_optimum: f64,
    pub mean_ratio: f64,
}

pub fn nnf_stats(field: &NNField, optimum: &[f64]) -> NnfStats {
    let hits = field.distances().iter().zip(optimum).filter(|(d, o)| (*d - *o).abs() <= 1e-6).count();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    NnfStats { at_optimum: hits as f64 / optimum.len() as f64, mean_ratio: mean(field.distances()) / mean(optimum) }
}

pub fn loss(x: &FeatureMap, target: &FeatureMap, w: &WeightsBundle) -> f64 {
    let y = forward_between(x, w).unwrap();
    y.data().iter().zip(target.data()).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Central-difference check of an analytic gradient.
pub struct GradCheck {
    pub checked: usize,
    pub skipped: usize,
    pub worst_relative: f64,
}

/// Compares `grad` with central differences of `loss`. The loss is piecewise
/// quadratic, so a central difference is exact unless a ReLU or max-pool
/// switch falls inside the stencil; such components are detected by the
/// disagreement between steps `h` and `h/2` and skipped.
pub fn grad_check(x: &FeatureMap, target: &FeatureMap, w: &WeightsBundle, grad: &FeatureMap, h: f64) -> GradCheck {
    let mut out = GradCheck { checked: 0, skipped: 0, worst_relative: 0.0 };
    let cd = |k: usize, step: f64| {
        let mut p = x.clone();
        p.data_mut()[k] += step;
        let mut m = x.clone();
        m.data_mut()[k] -= step;
        (loss(&p, target, w) - loss(&m, target, w)) / (2.0 * step)
    };
    for k in 0..x.len() {
        let g = grad.data()[k];
        if g.abs() <= 1e-6 {
            continue;
        }
        let (full, half) = (cd(k, h), cd(k, h / 2.0));
        let scale = full.abs().max(half.abs()).max(1e-12);
        if (full - half).abs() > 1e-6 * scale {
            out.skipped += 1;
            continue;
        }
        out.checked += 1;
        let rel = (g - full).abs() / g.abs().max(full.abs());
        out.worst_relative = out.worst_relative.max(rel);
    }
    out
}

pub fn random_grid(h: usize, w: usize, seed: u64) -> Grid {
    let mut r = rng(seed);
    Grid::new(h, w, (0..h * w).map(|_| r.gen_range(0.0..10.0)).collect()).unwrap()
}

pub fn random_profile(w: usize, seed: u64) -> ObscurityProfile {
    let mut r = rng(seed);
    let v: Vec<f64> = (0..w)
        .map(|_| match r.gen_range(0..4) {
            0 => 0.0,
            1 => 1.0,
            _ => r.gen_range(0.0..1.0),
        })
        .collect();
    ObscurityProfile::from_normalized(v).unwrap()
}

/// One inversion problem on a 16x16 input grid.
pub struct InversionCase {
    pub name: String,
    pub target: FeatureMap,
    pub init: FeatureMap,
    /// The target is the forward image of some input.
    pub feasible: bool,
}

/// Fifty cases spread over the three level transitions: forty feasible ones
/// started from perturbed or random inputs, and ten random targets.
pub fn inversion_corpus(w: &WeightsBundle) -> Vec<InversionCase> {
    let channels = w.level_channels();
    (0..50u64)
        .map(|seed| {
            let level = 1 + (seed % 3) as u32;
            let c = channels[level as usize - 1];
            let truth = deepir::synth::random_feature_map(level, 16, 16, c, 1000 + seed);
            let noise = deepir::synth::gaussian_feature_map(level, 16, 16, c, 2000 + seed);
            let feasible = seed % 5 != 4;
            let (kind, init) = match seed % 4 {
                3 => ("uniform", deepir::synth::random_feature_map(level, 16, 16, c, 3000 + seed)),
                m => {
                    let sigma = [0.05, 0.2, 0.5][m as usize];
                    let mut x = truth.clone();
                    x.data_mut().iter_mut().zip(noise.data()).for_each(|(v, n)| *v += sigma * n);
                    ("perturbed", x)
                }
            };
            let target = if feasible {
                forward_between(&truth, w).unwrap()
            } else {
                let like = forward_between(&truth, w).unwrap();
                let (h, wd, ch) = like.dims();
                deepir::synth::gaussian_feature_map(level + 1, h, wd, ch, 4000 + seed)
            };
            InversionCase {
                name: format!("case {seed} (level {level}->{}, {}, {kind} init)", level + 1, if feasible { "feasible" } else { "infeasible" }),
                target,
                init,
                feasible,
            }
        })
        .collect()
}
