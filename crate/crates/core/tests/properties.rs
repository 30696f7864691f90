use msgd_core::numerics::{DenseMatrix, RngStream};
use msgd_core::stats::{sliced_w2, w2_1d};
use msgd_core::weights::{BaseDistribution, WeightScheme};
use proptest::prelude::*;

fn vec_pair(len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (prop::collection::vec(-10.0..10.0f64, len), prop::collection::vec(-10.0..10.0f64, len))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn w2_1d_is_symmetric((a, b) in (2usize..40).prop_flat_map(vec_pair)) {
        prop_assert_eq!(w2_1d(&a, &b).unwrap().value, w2_1d(&b, &a).unwrap().value);
        prop_assert_eq!(w2_1d(&a, &a).unwrap().value, 0.0);
    }

    #[test]
    fn w2_1d_triangle(
        (a, b, c) in (2usize..40).prop_flat_map(|n| (
            prop::collection::vec(-10.0..10.0f64, n),
            prop::collection::vec(-10.0..10.0f64, n),
            prop::collection::vec(-10.0..10.0f64, n),
        ))
    ) {
        let d = |x: &[f64], y: &[f64]| w2_1d(x, y).unwrap().value.sqrt();
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-9);
    }

    #[test]
    fn w2_1d_ignores_order(mut a in prop::collection::vec(-10.0..10.0f64, 2..40), seed in any::<u64>()) {
        let original = a.clone();
        let mut s = RngStream::root(seed);
        for i in (1..a.len()).rev() {
            a.swap(i, s.below(i + 1));
        }
        prop_assert_eq!(w2_1d(&a, &original).unwrap().value, 0.0);
    }

    #[test]
    fn sliced_is_symmetric(
        (a, b) in (2usize..20).prop_flat_map(|n| vec_pair(3 * n)),
        seed in any::<u64>(),
    ) {
        let rows = a.len() / 3;
        let ma = DenseMatrix::from_row_major(rows, 3, a).unwrap();
        let mb = DenseMatrix::from_row_major(rows, 3, b).unwrap();
        let ab = sliced_w2(&ma, &mb, 16, &mut RngStream::root(seed)).unwrap().value;
        let ba = sliced_w2(&mb, &ma, 16, &mut RngStream::root(seed)).unwrap().value;
        prop_assert_eq!(ab, ba);
        prop_assert!(ab >= 0.0);
    }

    #[test]
    fn dirichlet_draws_lie_on_the_simplex(n in 3usize..200, frac in 0.0..1.0f64, seed in any::<u64>()) {
        let m = 2 + ((n - 3) as f64 * frac) as usize;
        let scheme = WeightScheme::dirichlet(n, m).unwrap();
        let w = scheme.sample(&mut RngStream::root(seed)).unwrap();
        prop_assert!(w.values().iter().all(|&x| x >= 0.0));
        prop_assert!((w.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn minibatch_draws_pick_exactly_m(n in 1usize..300, frac in 0.0..=1.0f64, seed in any::<u64>()) {
        let m = 1 + ((n - 1) as f64 * frac) as usize;
        let scheme = WeightScheme::minibatch(n, m).unwrap();
        let w = scheme.sample(&mut RngStream::root(seed)).unwrap();
        let picked = w.values().iter().filter(|&&x| x != 0.0).count();
        prop_assert_eq!(picked, m);
        prop_assert!(w.values().iter().all(|&x| x == 0.0 || x == 1.0 / m as f64));
    }

    #[test]
    fn gaussian_weights_are_centred_on_one_over_n_at_full_batch(n in 2usize..100, seed in any::<u64>()) {
        let scheme = WeightScheme::gaussian(n, n, BaseDistribution::Rademacher).unwrap();
        let w = scheme.sample(&mut RngStream::root(seed)).unwrap();
        prop_assert!(w.values().iter().all(|&x| x == 1.0 / n as f64));
    }
}
