//! Pixel-space scaling, cropping, seam carving and column removal.

use std::path::PathBuf;

use deepir::baselines::{crop, find_seam, seam_carve, Method};
use deepir::synth::scene;
use deepir::{Axis, Raster};

fn main() -> deepir::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("deepir-baselines"));
    std::fs::create_dir_all(&dir)?;
    let img = scene(96, 128, 4);
    img.save_png(dir.join("input.png"))?;

    let first = find_seam(&img.energy());
    println!("first seam: energy {:.2}, columns {}..={}", first.energy, first.columns.iter().min().unwrap(), first.columns.iter().max().unwrap());

    let (_, offset) = crop(&img, 0.6, Axis::Columns)?;
    println!("automatic crop offset: {offset}");
    let (_, seams) = seam_carve(&img, 0.9, Axis::Columns)?;
    println!("seam energies: {:?}", seams.iter().map(|s| (s.energy * 10.0).round() / 10.0).collect::<Vec<_>>());

    for m in Method::ALL {
        for axis in [Axis::Columns, Axis::Rows] {
            let out = m.apply(&img, 0.6, axis, None)?;
            let name = format!("{}_{}.png", m.key(), if axis == Axis::Columns { "cols" } else { "rows" });
            out.save_png(dir.join(&name))?;
            println!("{name}: {}x{}", out.height(), out.width());
        }
    }
    println!("written to {}", dir.display());
    Ok(())
}
