//! Recovers level-2 features from their level-3 image by L-BFGS and by plain
//! gradient descent.

use deepir::backbone::{extract_pyramid, forward_between};
use deepir::inversion::{invert, InversionConfig, Optimizer};
use deepir::synth::{random_weights, scene, SMALL_WIDTHS};

fn main() -> deepir::Result<()> {
    let w = random_weights(&SMALL_WIDTHS, 7);
    let pyramid = extract_pyramid(&scene(64, 64, 2), &w)?;
    let target = pyramid.level(3);

    // Start from a blurred-out version of the true level-2 features.
    let truth = pyramid.level(2);
    let mean = truth.sum() / truth.len() as f64;
    let mut init = truth.clone();
    init.data_mut().iter_mut().for_each(|v| *v = 0.5 * *v + 0.5 * mean);

    for optimizer in [Optimizer::Lbfgs { history: 10 }, Optimizer::GradientDescent] {
        let cfg = InversionConfig { optimizer, max_iterations: 100, ..Default::default() };
        let inv = invert(target, &w, &init, &cfg)?;
        let trace = &inv.loss_trace;
        println!("{optimizer:?}: {} steps, loss {:.3e} -> {:.3e}", trace.len() - 1, trace[0], inv.final_loss());
        let reproduced = forward_between(&inv.features, &w)?;
        let err: f64 = reproduced.data().iter().zip(target.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!("  max abs error of the reproduced level 3: {err:.3e}");
    }
    Ok(())
}
