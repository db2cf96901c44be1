//! Runs the pipeline with each feature-space operator plus the pixel
//! baselines and writes a contact sheet and score tables.

use std::path::PathBuf;

use deepir::compare::{compare, write_comparison};
use deepir::pipeline::RetargetConfig;
use deepir::synth::{random_weights, scene, SMALL_WIDTHS};

fn main() -> deepir::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("deepir-compare"));
    let w = random_weights(&SMALL_WIDTHS, 7);
    let img = scene(96, 128, 8);
    let c = compare(&img, &w, &RetargetConfig { epsilon: 0.5, ..Default::default() })?;
    for e in c.pipeline.iter().chain(&c.baselines) {
        let s = e.scores.map_or("-".to_string(), |s| format!("FRR {:.4}  FD {:.2}", s.frr, s.fd));
        println!("{:<6} {:>6} ms  {s}", e.key, e.millis);
    }
    write_comparison(&c, &dir)?;
    println!("grid.png, scores.json and baselines.json in {}", dir.display());
    Ok(())
}
