//! Writes a small random-weight DIRW file and a synthetic test image, enough
//! to drive the `deepir` command line without pretrained weights.
//!
//!     cargo run --example synth_weights -- /tmp/deepir-demo

use std::path::PathBuf;

use deepir::backbone::load_weights;
use deepir::synth::{random_weights, scene, SMALL_WIDTHS};

fn main() -> deepir::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("deepir-demo"));
    std::fs::create_dir_all(&dir)?;

    let weights = random_weights(&SMALL_WIDTHS, 7);
    let path = dir.join("small.dirw");
    weights.save(&path)?;
    let reloaded = load_weights(&path)?;
    println!("wrote {} ({} bytes)", path.display(), weights.to_bytes().len());
    println!("level channels: {:?}", reloaded.level_channels());
    println!("reference widths: {}", reloaded.has_reference_widths());

    let img = scene(128, 160, 1);
    img.save_png(dir.join("scene.png"))?;
    println!("wrote {}", dir.join("scene.png").display());
    println!();
    println!("try: deepir retarget --input {0}/scene.png --weights {0}/small.dirw --epsilon 0.5 --output {0}/out.png", dir.display());
    Ok(())
}
