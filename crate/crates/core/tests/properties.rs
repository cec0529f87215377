mod common;

use nalgebra::DMatrix;
use plasticity::metrics::stable_rank;
use plasticity::reinit::{prune_indices, PruningKind};
use plasticity::Matrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn svd_stable_rank(m: &Matrix) -> f64 {
    let d = DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice());
    let s = d.singular_values();
    let top = s.max();
    s.iter().map(|v| v * v).sum::<f64>() / (top * top)
}

fn matrix_strategy() -> impl Strategy<Value = Matrix> {
    (1usize..=12, 1usize..=12).prop_flat_map(|(r, c)| {
        prop::collection::vec(-10.0f64..10.0, r * c)
            .prop_map(move |v| Matrix::from_vec(r, c, v).unwrap())
    })
}

proptest! {
    #[test]
    fn threshold_pruning_is_the_filter(
        u in prop::collection::vec(0.0f64..5.0, 1..200),
        k in 1e-3f64..3.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let got = prune_indices(&u, k, PruningKind::Threshold, &mut rng).unwrap();
        let mean = u.iter().sum::<f64>() / u.len() as f64;
        let want: Vec<usize> = (0..u.len()).filter(|&i| u[i] <= k * mean).collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn proportional_pruning_takes_the_lowest(
        u in prop::collection::vec(0.0f64..5.0, 1..200),
        k in 1e-3f64..0.999,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let got = prune_indices(&u, k, PruningKind::Proportional, &mut rng).unwrap();
        let kd = k * u.len() as f64;
        let lo = kd.floor() as usize;
        prop_assert!(got.len() == lo || got.len() == lo + 1);
        let mut seen = got.clone();
        seen.sort_unstable();
        seen.dedup();
        prop_assert_eq!(seen.len(), got.len());
        let worst_pruned = got.iter().map(|&i| u[i]).fold(f64::NEG_INFINITY, f64::max);
        for i in 0..u.len() {
            if !got.contains(&i) {
                prop_assert!(u[i] >= worst_pruned);
            }
        }
    }

    #[test]
    fn stable_rank_is_bounded_and_scale_free(m in matrix_strategy(), c in 0.01f64..100.0) {
        let sr = stable_rank(&m);
        prop_assume!(!sr.all_zero);
        let cap = m.rows().min(m.cols()) as f64;
        prop_assert!(sr.value >= 1.0 - 1e-9 && sr.value <= cap + 1e-9, "{} not in [1, {}]", sr.value, cap);
        let scaled = Matrix::from_vec(m.rows(), m.cols(), m.as_slice().iter().map(|v| v * c).collect()).unwrap();
        let s2 = stable_rank(&scaled).value;
        prop_assert!((s2 - sr.value).abs() <= 1e-7 * sr.value);
        prop_assert!((sr.value - svd_stable_rank(&m)).abs() <= 1e-6);
    }
}

#[test]
fn rank_one_and_zero() {
    let u = [1.0, -2.0, 0.5];
    let v = [3.0, 0.0, 1.0, 4.0];
    let m = Matrix::from_vec(3, 4, u.iter().flat_map(|a| v.iter().map(move |b| a * b)).collect()).unwrap();
    assert!((stable_rank(&m).value - 1.0).abs() < 1e-12);
    let z = stable_rank(&Matrix::zeros(4, 3));
    assert!(z.all_zero);
    assert_eq!(z.value, 0.0);
}
