//! Trained CART trees against the exhaustive integer reference.

mod support {
    pub mod cart_oracle;
}

use grammage_core::domain::RollMeasurement;
use grammage_core::learners::{train_tree, Classifier, TreeParams};
use support::cart_oracle::{compare, grow, predict, random_set};

#[test]
fn depth_two_trees_match_oracle_on_fifty_sets() {
    for seed in 0..50 {
        let set = random_set(seed);
        let ts = set.to_training_set();
        for depth in [1, 2] {
            let params = TreeParams { max_depth: depth, features_per_split: 3 };
            let tree = train_tree(&ts, None, &params, seed).unwrap();
            let rows: Vec<usize> = (0..set.y.len()).collect();
            let oracle = grow(&set, &rows, 0, depth);
            compare(&tree, 0, &oracle).unwrap_or_else(|e| panic!("seed {seed}, depth {depth}: {e}"));
            for (xi, xf) in set.x.iter().zip(&ts.features) {
                let got = tree.predict(&RollMeasurement::from_features(*xf));
                assert_eq!(got, ts.classes[predict(&oracle, xi)], "seed {seed}");
            }
        }
    }
}

#[test]
fn oracle_agrees_off_the_training_grid() {
    let set = random_set(77);
    let ts = set.to_training_set();
    let tree = train_tree(&ts, None, &TreeParams { max_depth: 2, features_per_split: 3 }, 0).unwrap();
    let oracle = grow(&set, &(0..set.y.len()).collect::<Vec<_>>(), 0, 2);
    for a in -3..18 {
        for b in -3..18 {
            let x = [a, b, a - b];
            let got = tree.predict(&RollMeasurement::from_features([a as f64, b as f64, (a - b) as f64]));
            assert_eq!(got, ts.classes[predict(&oracle, &x)]);
        }
    }
}
