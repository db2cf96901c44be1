//! Full retargeting run with intermediate dumps.
//!
//!     cargo run --release --example retarget_image -- [input.png weights.dirw out_dir]
//!
//! Without arguments a synthetic scene and small random weights are used.

use std::path::PathBuf;

use deepir::backbone::load_weights;
use deepir::pipeline::{retarget, RetargetConfig};
use deepir::synth::{random_weights, scene, SMALL_WIDTHS};
use deepir::Image;

fn main() -> deepir::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (img, w, dir) = match args.as_slice() {
        [input, weights, out] => (Image::load(input)?, load_weights(weights)?, PathBuf::from(out)),
        _ => (scene(128, 128, 5), random_weights(&SMALL_WIDTHS, 7), std::env::temp_dir().join("deepir-retarget")),
    };

    let cfg = RetargetConfig { epsilon: 0.5, dump_dir: Some(dir.join("dump")), ..Default::default() };
    let res = retarget(&img, &w, &cfg)?;
    res.image.save_png(dir.join("output.png"))?;

    println!("{}x{} -> {}x{}", img.height(), img.width(), res.image.height(), res.image.width());
    for t in &res.timings {
        println!("  {:<18} {:>6} ms", t.stage, t.millis);
    }
    if let Some(m) = res.metrics {
        println!("FRR {:.4}  FD {:.2}", m.frr, m.fd);
    }
    for (l, f) in res.per_layer_fields.iter().enumerate() {
        println!("level {} field: {}x{}, mean patch distance {:.4}", l + 1, f.height(), f.width(), f.mean_distance());
    }
    println!("output and per-level previews in {}", dir.display());
    Ok(())
}
