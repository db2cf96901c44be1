mod common;

use common::{random_profile, rng, urs_oracle};
use deepir::urs::{select_columns_to_width, ObscurityProfile};
use rand::Rng;

#[test]
fn selection_matches_interval_oracle() {
    let mut r = rng(5);
    for seed in 0..1000 {
        let w = r.gen_range(2..40);
        let p = random_profile(w, seed);
        let k = r.gen_range(0..w);
        let sel = select_columns_to_width(&p, w - k).unwrap();
        assert_eq!(sel.removed, urs_oracle(&p, k), "profile {:?}, k = {k}", p.normalized);
    }
}

#[test]
fn five_column_worked_example() {
    let p = ObscurityProfile::from_normalized(vec![0.1, 0.3, 0.1, 0.4, 0.3]).unwrap();
    assert!((p.total() - 1.2).abs() < 1e-15);
    let tau = p.total() / 3.0;
    assert!((tau - 0.4).abs() < 1e-15);
    let sel = select_columns_to_width(&p, 2).unwrap();
    assert_eq!(sel.removed, vec![1, 3, 4]);
    assert_eq!(sel.removed, urs_oracle(&p, 3));
}

#[test]
fn exact_boundary_goes_left() {
    // Samples at 1.0 and 2.0 sit exactly on column boundaries.
    let p = ObscurityProfile::from_normalized(vec![1.0, 1.0, 0.0, 1.0]).unwrap();
    let sel = select_columns_to_width(&p, 1).unwrap();
    assert_eq!(sel.removed, vec![0, 1, 3]);
    assert_eq!(sel.removed, urs_oracle(&p, 3));
}
