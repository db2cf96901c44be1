//! Uniform re-sampling of a cumulative obscurity profile: which columns go.

use deepir::synth::random_feature_map;
use deepir::urs::{importance_map, obscurity_profile, resample, select_columns, ObscurityProfile};
use deepir::FeatureMap;

fn main() -> deepir::Result<()> {
    // A five-column profile whose cumulative sum is 1.2. Removing three
    // columns samples it every 0.4.
    let p = ObscurityProfile::from_normalized(vec![0.1, 0.3, 0.1, 0.4, 0.3])?;
    let sel = select_columns(&p, 0.4)?;
    println!("cumulative: {:?}", p.cumulative);
    println!("removed:    {:?}", sel.removed);
    println!("preserved:  {:?}", sel.preserved);

    // On a feature map the profile comes from channel-summed activations.
    // Bright columns are important, so the dark ones are removed first.
    let base = random_feature_map(4, 6, 12, 8, 3);
    let f = FeatureMap::from_fn(4, 6, 12, 8, |i, j, c| base.get(i, j, c) * if j % 4 == 0 { 4.0 } else { 1.0 });
    let profile = obscurity_profile(&importance_map(&f))?;
    let sel = select_columns(&profile, 0.5)?;
    println!();
    println!("column importance: {:?}", importance_map(&f).column_sums().iter().map(|v| v.round()).collect::<Vec<_>>());
    println!("removed:           {:?}", sel.removed);
    let out = resample(&f, &sel)?;
    println!("{}x{} -> {}x{}", f.height(), f.width(), out.height(), out.width());
    Ok(())
}
