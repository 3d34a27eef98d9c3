use lattice_clt::blocks::build_blocks;
use lattice_clt::fields::{covariance, covariance_model, FieldSpec, KernelTap, Marginal};
use lattice_clt::geometry::{correlogram, cross_correlogram, lags_within};
use lattice_clt::numeric::mean_stderr;
use lattice_clt::partial_sums::{second_moment_identity, variance_bound};
use lattice_clt::{IndexSetSpec, Window};
use proptest::prelude::*;

fn set_strategy(d: usize) -> impl Strategy<Value = IndexSetSpec> {
    prop_oneof![
        Just(IndexSetSpec::FullLattice),
        (2u32..5, 0i64..4).prop_map(move |(m, r)| IndexSetSpec::Periodic {
            moduli: vec![m; d],
            residues: vec![vec![r % m as i64; d]],
        }),
        (-3i64..3).prop_map(move |t| IndexSetSpec::HalfSpace { axis: d - 1, threshold: t }),
        (0.05f64..0.95, any::<u64>()).prop_map(|(p, seed)| IndexSetSpec::BernoulliRandom { p, seed }),
        (0.0f64..6.0).prop_map(|radius| IndexSetSpec::Ball { radius }),
    ]
}

fn kernel_strategy() -> impl Strategy<Value = FieldSpec> {
    prop::collection::vec(-2.0f64..2.0, 1..4)
        .prop_map(|w| FieldSpec::moving_average_1d(&w, Marginal::Uniform { half_width: 1.5 }))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn blocks_are_disjoint_and_separated(d in 1usize..3, n in 1u32..20, p in 1u32..12, q in 1u32..6) {
        let w = Window::new(d, n).unwrap();
        prop_assume!(p + q <= w.side() as u32);
        let plan = build_blocks(&w, p, q).unwrap();
        plan.verify().unwrap();
        let labelled = plan.labels().iter().filter(|l| l.is_some()).count() as u64;
        prop_assert_eq!(labelled, plan.block_points);
        prop_assert_eq!(plan.block_points + plan.complement_points, w.size() as u64);
        if plan.blocks.len() > 1 {
            prop_assert_eq!(plan.min_block_distance(), Some(q as i64));
        }
        prop_assert!(plan.lyapunov_factor_exact() <= plan.lyapunov_factor() * (1.0 + 1e-12));
    }

    #[test]
    fn correlogram_is_symmetric_and_bounded(set in set_strategy(1), n in 0u32..40) {
        let w = Window::new(1, n).unwrap();
        let lags: Vec<Vec<i64>> = (-5..=5).map(|k| vec![k]).collect();
        let c = correlogram(&set, &w, &lags).unwrap();
        for k in 1..=5i64 {
            prop_assert_eq!(c.get(&[k]), c.get(&[-k]));
        }
        for e in &c.entries {
            prop_assert!(e.count.numerator <= e.count.denominator);
            prop_assert!(e.count.numerator <= c.get(&[0]).unwrap().numerator);
        }
        prop_assert_eq!(&cross_correlogram(&set, &set, &w, &lags).unwrap().entries, &c.entries);
    }

    #[test]
    fn correlogram_symmetry_in_two_dimensions(set in set_strategy(2), n in 0u32..8) {
        let w = Window::new(2, n).unwrap();
        let lags = lags_within(2, 2);
        let c = correlogram(&set, &w, &lags).unwrap();
        for k in &lags {
            let neg: Vec<i64> = k.iter().map(|x| -x).collect();
            prop_assert_eq!(c.get(k), c.get(&neg));
        }
    }

    #[test]
    fn identity_and_bound_on_random_inputs(field in kernel_strategy(), set in set_strategy(1), n in 0u32..60) {
        let w = Window::new(1, n).unwrap();
        let cov = covariance_model(&field, 1, 0).unwrap();
        let id = second_moment_identity(&cov, &set, &w).unwrap();
        prop_assert!(id.rel_diff <= 1e-12 || id.abs_diff <= 1e-14, "{:?}", id);
        prop_assert!(variance_bound(&cov, &set, &w).unwrap().holds);
    }

    #[test]
    fn moving_average_is_range_dependent(field in kernel_strategy()) {
        let m = field.range() as i64;
        for k in -(m + 3)..=(m + 3) {
            let r = covariance(&field, 0, &[k]).unwrap();
            prop_assert_eq!(r, covariance(&field, 0, &[-k]).unwrap());
            if k.abs() > m {
                prop_assert_eq!(r, 0.0);
            }
        }
    }
}

/// Empirical `E X_a X_b` at two translates of the same lag both match
/// `r(k)`, and pairs beyond the range are uncorrelated.
#[test]
fn sampled_field_is_stationary_and_m_dependent() {
    let field = FieldSpec::MovingAverage {
        kernel: vec![
            KernelTap { offset: vec![0, 0], weight: 1.0 },
            KernelTap { offset: vec![1, 0], weight: 0.5 },
            KernelTap { offset: vec![0, 1], weight: -0.5 },
        ],
        innovation: Marginal::Rademacher,
    };
    let sampler = field.sampler().unwrap();
    let reps = 20_000u64;
    let pairs: [([i64; 2], [i64; 2]); 4] =
        [([0, 0], [1, 0]), ([-3, 2], [-2, 2]), ([0, 0], [1, -1]), ([4, -1], [6, -1])];
    for (a, b) in pairs {
        let k = [b[0] - a[0], b[1] - a[1]];
        let target = covariance(&field, 0, &k).unwrap();
        let prods: Vec<f64> =
            (0..reps).map(|r| sampler.value_at(&a, 0, 3, r) * sampler.value_at(&b, 0, 3, r)).collect();
        let (m, se) = mean_stderr(&prods);
        assert!((m - target).abs() < 5.0 * se.max(1e-3), "pair {a:?} {b:?}: {m} vs {target} (se {se})");
    }
}
