//! End-to-end retargeting.
//!
//! The deepest pyramid level is resized directly. Each shallower level is then
//! rebuilt from the one above it: the retargeted features are inverted through
//! the network block, the inverted features are matched against the original
//! level with PatchMatch, that field is blended with the exact correspondence
//! of the feature-space operator, and the original features are warped through
//! the blend. The level-1 field is the pixel map, and patch voting produces
//! the output image.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::backbone::{extract_pyramid, pooled, FeaturePyramid, WeightsBundle, MIN_IMAGE_SIDE, PYRAMID_LEVELS};
use crate::baselines::{column_removal_to, crop_to, scl_to, seam_carve_to, IndexMap};
use crate::dump::{write_feature_map, write_field};
use crate::error::{invalid, Error, Result};
use crate::inversion::{invert, InitStrategy, InversionConfig};
use crate::metrics::{score, Scores};
use crate::nnf::{fuse, patchmatch_from, vote_reconstruct, warp, NNField, PatchMatchParams, PatchMetric};
use crate::tensor::{Axis, FeatureMap, Image};
use crate::urs::{target_width, urs_retarget_to_width};

/// Resizing operator applied in feature space.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum FeatureOperator {
    #[default]
    Urs,
    Scl,
    Crop,
    SeamCarving,
    ColumnRemoval,
}

impl FeatureOperator {
    pub const ALL: [FeatureOperator; 5] = [Self::Urs, Self::Scl, Self::Crop, Self::SeamCarving, Self::ColumnRemoval];

    /// Short name used on the command line and in score files.
    pub fn key(self) -> &'static str {
        match self {
            Self::Urs => "urs",
            Self::Scl => "scl",
            Self::Crop => "cr",
            Self::SeamCarving => "sc",
            Self::ColumnRemoval => "colrm",
        }
    }
}

impl fmt::Display for FeatureOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for FeatureOperator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|op| op.key() == s)
            .ok_or_else(|| invalid(format!("unknown operator `{s}` (expected urs, scl, cr, sc or colrm)")))
    }
}

/// Resizes `f` to `target` along `axis` and returns the exact field from the
/// resized grid back into `f`.
pub fn apply_operator(op: FeatureOperator, f: &FeatureMap, target: usize, axis: Axis) -> Result<(FeatureMap, NNField)> {
    let (out, map) = match op {
        FeatureOperator::Urs => {
            let (out, sel) = urs_retarget_to_width(f, target, axis)?;
            let rows = match axis {
                Axis::Columns => f.height(),
                Axis::Rows => f.width(),
            };
            (out, IndexMap::uniform(rows, sel.preserved))
        }
        FeatureOperator::Scl => {
            let r = scl_to(f, target, axis)?;
            (r.output, r.index_map)
        }
        FeatureOperator::Crop => {
            let (r, _) = crop_to(f, target, axis)?;
            (r.output, r.index_map)
        }
        FeatureOperator::SeamCarving => {
            let (r, _) = seam_carve_to(f, target, axis)?;
            (r.output, r.index_map)
        }
        FeatureOperator::ColumnRemoval => {
            let (r, _) = column_removal_to(f, target, axis)?;
            (r.output, r.index_map)
        }
    };
    let field = index_field(&map, axis, f.height(), f.width())?;
    Ok((out, field))
}

/// Converts a column index map into a field on the retargeted grid.
pub fn index_field(map: &IndexMap, axis: Axis, source_height: usize, source_width: usize) -> Result<NNField> {
    let rows = map.rows.len();
    let cols = map.rows.first().map_or(0, Vec::len);
    match axis {
        Axis::Columns => {
            let mapping = (0..rows).flat_map(|i| map.rows[i].iter().map(move |&j| (i, j))).collect();
            NNField::from_mapping(rows, cols, source_height, source_width, mapping)
        }
        Axis::Rows => {
            let mapping = (0..cols).flat_map(|k| (0..rows).map(move |j| (map.rows[j][k], j))).collect();
            NNField::from_mapping(cols, rows, source_height, source_width, mapping)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RetargetConfig {
    pub epsilon: f64,
    pub axis: Axis,
    /// Weight of the inversion-derived field when fusing at levels 1, 2, 3.
    pub alphas: [f64; 3],
    pub seed: u64,
    pub inversion: InversionConfig,
    pub operator: FeatureOperator,
    pub dump_dir: Option<PathBuf>,
    pub match_metric: PatchMetric,
    pub match_iterations: usize,
    /// Patch radius of the final pixel vote (2 gives 5x5 patches).
    pub vote_radius: usize,
    /// Budget for each stage; also bounds every inversion.
    pub stage_timeout: Option<Duration>,
    /// Score the output with FRR and FD (requires at least 32 pixels per side).
    pub compute_metrics: bool,
}

impl Default for RetargetConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.5,
            axis: Axis::Columns,
            alphas: [0.7, 0.8, 0.9],
            seed: 0,
            inversion: InversionConfig::default(),
            operator: FeatureOperator::Urs,
            dump_dir: None,
            match_metric: PatchMetric::default(),
            match_iterations: 5,
            vote_radius: 2,
            stage_timeout: None,
            compute_metrics: true,
        }
    }
}

impl RetargetConfig {
    pub fn validate(&self) -> Result<()> {
        target_width(1, self.epsilon)?;
        if let Some(a) = self.alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(invalid(format!("alpha must be in [0,1], got {a}")));
        }
        self.inversion.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub millis: u64,
}

#[derive(Clone, Debug)]
pub struct RetargetResult {
    pub image: Image,
    /// Output pixel to source pixel.
    pub pixel_map: NNField,
    /// Fused fields at levels 1, 2, 3.
    pub per_layer_fields: [NNField; 3],
    /// `None` when scoring is disabled or the output is too small for the backbone.
    pub metrics: Option<Scores>,
    pub timings: Vec<StageTiming>,
}

impl RetargetResult {
    pub fn total_millis(&self) -> u64 {
        self.timings.iter().map(|t| t.millis).sum()
    }
}

/// Sizes along the retargeted axis for levels 1..=4: the level-1 size is
/// `round(epsilon * extent)` and each deeper level halves it, rounding up,
/// exactly as the pooling layers do.
pub fn level_targets(extent: usize, epsilon: f64) -> Result<[usize; 4]> {
    let t1 = target_width(extent, epsilon)?;
    let mut t = [t1; 4];
    for l in 1..4 {
        t[l] = pooled(t[l - 1]);
    }
    Ok(t)
}

struct Clock {
    timings: Vec<StageTiming>,
    limit: Option<Duration>,
    last: Instant,
}

impl Clock {
    fn new(limit: Option<Duration>) -> Self {
        Self { timings: Vec::new(), limit, last: Instant::now() }
    }

    fn lap(&mut self, stage: impl Into<String>) -> Result<()> {
        let now = Instant::now();
        let spent = now - self.last;
        self.last = now;
        let stage = stage.into();
        if let Some(limit) = self.limit {
            if spent > limit {
                return Err(Error::Timeout { stage, limit_ms: limit.as_millis() });
            }
        }
        self.timings.push(StageTiming { stage, millis: spent.as_millis() as u64 });
        Ok(())
    }
}

struct Dumper<'a> {
    dir: Option<&'a Path>,
    image: &'a Image,
    radius: usize,
}

impl Dumper<'_> {
    fn features(&self, name: &str, f: &FeatureMap) -> Result<()> {
        match self.dir {
            Some(d) => write_feature_map(d.join(format!("{name}.dirf")), f),
            None => Ok(()),
        }
    }

    /// Writes the field and a pixel preview reconstructed through it.
    fn field(&self, name: &str, level: u32, field: &NNField, out_h: usize, out_w: usize) -> Result<()> {
        let Some(d) = self.dir else { return Ok(()) };
        write_field(d.join(format!("{name}.dirn")), field)?;
        let stride = PYRAMID_LEVELS[level as usize - 1].stride;
        let pixels = upsample_field(field, stride, out_h, out_w, self.image.height(), self.image.width())?;
        vote_reconstruct(self.image, &pixels, self.radius)?.save_png(d.join(format!("{name}.png")))
    }

    fn loss(&self, name: &str, trace: &[f64]) -> Result<()> {
        let Some(d) = self.dir else { return Ok(()) };
        let mut csv = String::from("iteration,loss\n");
        for (i, l) in trace.iter().enumerate() {
            csv.push_str(&format!("{i},{l:e}\n"));
        }
        fs::write(d.join(format!("{name}.csv")), csv)?;
        Ok(())
    }
}

/// Nearest-neighbor upsampling of a level field to a finer grid: pixel
/// `(y, x)` follows the cell `(y / s, x / s)` and keeps its offset inside it.
pub fn upsample_field(
    field: &NNField,
    stride: usize,
    height: usize,
    width: usize,
    source_height: usize,
    source_width: usize,
) -> Result<NNField> {
    if stride == 1 && (field.height(), field.width(), field.source_height(), field.source_width()) == (height, width, source_height, source_width) {
        return Ok(field.clone());
    }
    if height.div_ceil(stride) > field.height() || width.div_ceil(stride) > field.width() {
        return Err(invalid("field is too small for the requested grid"));
    }
    let mut mapping = Vec::with_capacity(height * width);
    for y in 0..height {
        for x in 0..width {
            let (a, b) = field.get(y / stride, x / stride);
            mapping.push(((a * stride + y % stride).min(source_height - 1), (b * stride + x % stride).min(source_width - 1)));
        }
    }
    NNField::from_mapping(height, width, source_height, source_width, mapping)
}

fn random_init(like: &FeatureMap, lo: f64, hi: f64, seed: u64) -> FeatureMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w, c) = like.dims();
    let data = (0..h * w * c).map(|_| rng.gen_range(lo..hi)).collect();
    FeatureMap::new(like.layer(), h, w, c, data).expect("dims from an existing map")
}

fn shrink(h: usize, w: usize, axis: Axis, t: usize) -> (usize, usize) {
    match axis {
        Axis::Columns => (h, t),
        Axis::Rows => (t, w),
    }
}

/// Retargets `o` to `round(epsilon * extent)` along the configured axis.
pub fn retarget(o: &Image, w: &WeightsBundle, cfg: &RetargetConfig) -> Result<RetargetResult> {
    cfg.validate()?;
    if let Some(d) = &cfg.dump_dir {
        fs::create_dir_all(d)?;
    }
    let mut clock = Clock::new(cfg.stage_timeout);
    let dump = Dumper { dir: cfg.dump_dir.as_deref(), image: o, radius: cfg.vote_radius };
    let inversion = InversionConfig { time_limit: cfg.stage_timeout.or(cfg.inversion.time_limit), ..cfg.inversion.clone() };

    let pyramid: FeaturePyramid = extract_pyramid(o, w)?;
    clock.lap("pyramid")?;
    for f in pyramid.iter() {
        dump.features(&format!("{}_original", f.layer()), f)?;
    }

    let extent = match cfg.axis {
        Axis::Columns => o.width(),
        Axis::Rows => o.height(),
    };
    let targets = level_targets(extent, cfg.epsilon)?;
    let (out_h, out_w) = shrink(o.height(), o.width(), cfg.axis, targets[0]);

    let (mut current, _) = apply_operator(cfg.operator, pyramid.level(4), targets[3], cfg.axis)?;
    clock.lap("level4_resample")?;
    dump.features("4_retargeted", &current)?;

    let mut fused: Vec<NNField> = Vec::with_capacity(3);
    for level in (1..=3u32).rev() {
        let original = pyramid.level(level);
        let (resampled, analytic) = apply_operator(cfg.operator, original, targets[level as usize - 1], cfg.axis)?;
        clock.lap(format!("level{level}_resample"))?;

        let init = match inversion.init {
            InitStrategy::UrsResized => resampled.clone(),
            InitStrategy::RandomUniform { lo, hi } => random_init(&resampled, lo, hi, cfg.seed ^ u64::from(level)),
        };
        let inv = invert(&current, w, &init, &inversion)?;
        clock.lap(format!("level{level}_inversion"))?;

        let params = PatchMatchParams {
            metric: cfg.match_metric,
            iterations: cfg.match_iterations,
            seed: cfg.seed.wrapping_add(u64::from(level)),
        };
        let matched = patchmatch_from(&inv.features, original, &params, &analytic)?;
        clock.lap(format!("level{level}_match"))?;

        let alpha = cfg.alphas[level as usize - 1];
        let phi = fuse(&matched, &analytic, alpha, &inv.features, original)?;
        current = warp(original, &phi)?;
        clock.lap(format!("level{level}_fuse"))?;

        if dump.dir.is_some() {
            dump.features(&format!("{level}_inverted"), &inv.features)?;
            dump.loss(&format!("{level}_inversion_loss"), &inv.loss_trace)?;
            dump.features(&format!("{level}_resampled"), &resampled)?;
            dump.features(&format!("{level}_fused"), &current)?;
            dump.field(&format!("{level}_matched"), level, &matched, out_h, out_w)?;
            dump.field(&format!("{level}_resampled"), level, &analytic, out_h, out_w)?;
            dump.field(&format!("{level}_fused"), level, &phi, out_h, out_w)?;
            clock.lap(format!("level{level}_dump"))?;
        }
        fused.push(phi);
    }
    fused.reverse();
    let per_layer_fields: [NNField; 3] = fused.try_into().expect("three levels");

    let pixel_map = per_layer_fields[0].clone();
    let image = vote_reconstruct(o, &pixel_map, cfg.vote_radius)?;
    clock.lap("vote")?;

    let metrics = if cfg.compute_metrics && image.height() >= MIN_IMAGE_SIDE && image.width() >= MIN_IMAGE_SIDE {
        let s = score(o, &image, w)?;
        clock.lap("metrics")?;
        Some(s)
    } else {
        None
    };

    Ok(RetargetResult { image, pixel_map, per_layer_fields, metrics, timings: clock.timings })
}
