//! Side-by-side comparison of every feature-space operator inside the
//! retargeting pipeline, plus the plain pixel-space baselines.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::backbone::{WeightsBundle, MIN_IMAGE_SIDE};
use crate::baselines::Method;
use crate::error::Result;
use crate::metrics::{score, Scores};
use crate::pipeline::{retarget, FeatureOperator, RetargetConfig};
use crate::tensor::Image;

/// One scored output.
#[derive(Clone, Debug)]
pub struct Entry {
    pub key: &'static str,
    pub image: Image,
    pub scores: Option<Scores>,
    pub millis: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScoreRecord {
    pub frr: Option<f64>,
    pub fd: Option<f64>,
    pub millis: u64,
}

impl From<&Entry> for ScoreRecord {
    fn from(e: &Entry) -> Self {
        Self { frr: e.scores.map(|s| s.frr), fd: e.scores.map(|s| s.fd), millis: e.millis }
    }
}

#[derive(Clone, Debug)]
pub struct Comparison {
    pub input: Image,
    /// Pipeline outputs, one per feature-space operator.
    pub pipeline: Vec<Entry>,
    /// Pixel-space baselines.
    pub baselines: Vec<Entry>,
}

fn scores_for(o: &Image, r: &Image, w: &WeightsBundle) -> Result<Option<Scores>> {
    if r.height() < MIN_IMAGE_SIDE || r.width() < MIN_IMAGE_SIDE {
        return Ok(None);
    }
    score(o, r, w).map(Some)
}

/// Runs the pipeline once per operator (in parallel) and every pixel
/// baseline, scoring each result against `o`. `cfg.operator` and
/// `cfg.dump_dir` are ignored.
pub fn compare(o: &Image, w: &WeightsBundle, cfg: &RetargetConfig) -> Result<Comparison> {
    let pipeline = FeatureOperator::ALL
        .par_iter()
        .map(|&op| {
            let started = Instant::now();
            let run_cfg = RetargetConfig { operator: op, dump_dir: None, ..cfg.clone() };
            let res = retarget(o, w, &run_cfg)?;
            Ok(Entry { key: op.key(), image: res.image, scores: res.metrics, millis: started.elapsed().as_millis() as u64 })
        })
        .collect::<Result<Vec<_>>>()?;
    let baselines = Method::ALL
        .par_iter()
        .map(|&m| {
            let started = Instant::now();
            let image = m.apply(o, cfg.epsilon, cfg.axis, None)?;
            let millis = started.elapsed().as_millis() as u64;
            let scores = if cfg.compute_metrics { scores_for(o, &image, w)? } else { None };
            Ok(Entry { key: m.key(), image, scores, millis })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Comparison { input: o.clone(), pipeline, baselines })
}

const GUTTER: usize = 4;

/// Two-row contact sheet: the input followed by the pipeline outputs, then
/// the pixel baselines under the pipeline outputs. Cells are top-left aligned
/// on a white background.
pub fn grid(c: &Comparison) -> Image {
    let cell_h = c.input.height();
    let cell_w = c.input.width();
    let cols = 1 + c.pipeline.len().max(c.baselines.len());
    let rows = if c.baselines.is_empty() { 1 } else { 2 };
    let height = rows * cell_h + (rows + 1) * GUTTER;
    let width = cols * cell_w + (cols + 1) * GUTTER;
    let mut planes = vec![255.0; height * width * 3];
    let mut blit = |img: &Image, row: usize, col: usize| {
        let (y0, x0) = (GUTTER + row * (cell_h + GUTTER), GUTTER + col * (cell_w + GUTTER));
        for ch in 0..3 {
            for i in 0..img.height().min(cell_h) {
                for j in 0..img.width().min(cell_w) {
                    planes[(ch * height + y0 + i) * width + x0 + j] = img.get(i, j, ch);
                }
            }
        }
    };
    blit(&c.input, 0, 0);
    for (k, e) in c.pipeline.iter().enumerate() {
        blit(&e.image, 0, k + 1);
    }
    for (k, e) in c.baselines.iter().enumerate() {
        blit(&e.image, 1, k + 1);
    }
    Image::from_fn(height, width, |i, j, ch| planes[(ch * height + i) * width + j])
}

/// Writes `grid.png`, `deepir_<op>.png` and `pixel_<method>.png` for every
/// output, `scores.json` for the pipeline runs and `baselines.json` for the
/// pixel baselines. Both JSON files map names to `{frr, fd, millis}`.
pub fn write_comparison(c: &Comparison, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    grid(c).save_png(dir.join("grid.png"))?;
    let write_group = |entries: &[Entry], prefix: &str, file: &str| -> Result<()> {
        let mut table = BTreeMap::new();
        for e in entries {
            e.image.save_png(dir.join(format!("{prefix}_{}.png", e.key)))?;
            table.insert(e.key, ScoreRecord::from(e));
        }
        let json = serde_json::to_string_pretty(&table).expect("plain data serializes");
        fs::write(dir.join(file), json + "\n")?;
        Ok(())
    };
    write_group(&c.pipeline, "deepir", "scores.json")?;
    write_group(&c.baselines, "pixel", "baselines.json")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inversion::InversionConfig;
    use crate::synth::{random_weights, scene};

    #[test]
    fn writes_every_artifact() {
        let w = random_weights(&[4, 4, 6, 6, 8, 8, 8, 8, 10], 2);
        let img = scene(32, 48, 1);
        let cfg = RetargetConfig {
            epsilon: 0.75,
            inversion: InversionConfig { max_iterations: 10, ..Default::default() },
            ..Default::default()
        };
        let c = compare(&img, &w, &cfg).unwrap();
        assert_eq!(c.pipeline.len(), 5);
        assert!(c.pipeline.iter().all(|e| e.image.width() == 36 && e.scores.is_some()));
        let g = grid(&c);
        assert_eq!((g.height(), g.width()), (2 * 32 + 3 * GUTTER, 6 * 48 + 7 * GUTTER));

        let dir = tempfile::tempdir().unwrap();
        write_comparison(&c, dir.path()).unwrap();
        let scores: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("scores.json")).unwrap()).unwrap();
        let keys: Vec<&str> = scores.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(keys, ["colrm", "cr", "sc", "scl", "urs"]);
        assert!(scores["urs"]["frr"].is_f64() && scores["urs"]["millis"].is_u64());
        assert!(dir.path().join("grid.png").exists() && dir.path().join("pixel_sc.png").exists());
    }
}
