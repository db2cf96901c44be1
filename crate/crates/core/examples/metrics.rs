//! Feature remain ratio and feature dissimilarity of several retargeting
//! results for the same input.

use deepir::baselines::Method;
use deepir::metrics::score;
use deepir::pipeline::{retarget, RetargetConfig};
use deepir::synth::{random_weights, scene, SMALL_WIDTHS};
use deepir::Axis;

fn main() -> deepir::Result<()> {
    let w = random_weights(&SMALL_WIDTHS, 7);
    let img = scene(96, 96, 6);

    let same = score(&img, &img, &w)?;
    println!("{:<8} FRR {:.4}  FD {:>10.2}", "self", same.frr, same.fd);

    let res = retarget(&img, &w, &RetargetConfig { epsilon: 0.5, ..Default::default() })?;
    let s = res.metrics.expect("output is large enough to score");
    println!("{:<8} FRR {:.4}  FD {:>10.2}", "deepir", s.frr, s.fd);

    for m in Method::ALL {
        let out = m.apply(&img, 0.5, Axis::Columns, None)?;
        let s = score(&img, &out, &w)?;
        println!("{:<8} FRR {:.4}  FD {:>10.2}", m.key(), s.frr, s.fd);
    }
    Ok(())
}
