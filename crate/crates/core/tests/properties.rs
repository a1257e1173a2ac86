use prodnormal::exact::{pdf_exact, ProductDistribution, ProductParams, TruncationPolicy};
use prodnormal::montecarlo::{simulate, SimulationConfig};
use prodnormal::specfun::{series_n2k_leading_scaled, series_n2k_scaled};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = ProductParams> {
    (-2.0..2.0f64, -2.0..2.0f64, 0.3..3.0f64, 0.3..3.0f64, -0.9..0.9f64)
        .prop_map(|(mx, my, sx, sy, r)| ProductParams::new(mx, my, sx, sy, r).unwrap())
}

fn density(p: &ProductParams, x: f64) -> f64 {
    pdf_exact(p, x, &TruncationPolicy::default()).unwrap().value
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + 1e-300
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reflection(p in params(), x in 0.05..8.0f64) {
        let r = p.reflected();
        prop_assert!(close(density(&p, -x), density(&r, x), 1e-9));
    }

    #[test]
    fn scaling(p in params(), x in -8.0..8.0f64) {
        prop_assume!(x.abs() > 0.05);
        let s = p.scale();
        let z = p.standardized();
        prop_assert!(close(density(&p, x), density(&z, x / s) / s, 1e-9));
    }

    #[test]
    fn swapping_factors(p in params(), x in -6.0..6.0f64) {
        prop_assume!(x.abs() > 0.05);
        let q = ProductParams::new(p.mu_y(), p.mu_x(), p.sigma_y(), p.sigma_x(), p.rho()).unwrap();
        prop_assert!(close(density(&p, x), density(&q, x), 1e-9));
    }

    #[test]
    fn mean_is_shifted_by_correlation(mx in -1.0..1.0f64, my in -1.0..1.0f64, r in -0.8..0.8f64) {
        let p = ProductParams::standard(mx, my, r).unwrap();
        let dist = ProductDistribution::new(p, TruncationPolicy::default()).unwrap();
        prop_assert!((dist.mean_by_quadrature() - (mx * my + r)).abs() < 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn cdf_is_monotone_and_complements_survival(p in params(), mut xs in prop::collection::vec(-6.0..6.0f64, 4)) {
        let dist = ProductDistribution::new(p, TruncationPolicy::default()).unwrap();
        xs.sort_by(f64::total_cmp);
        let mut last = 0.0;
        for x in xs {
            let c = dist.cdf(x).unwrap();
            prop_assert!((0.0..=1.0).contains(&c));
            prop_assert!(c >= last - 1e-12);
            prop_assert!((c + dist.survival(x).unwrap() - 1.0).abs() < 1e-9);
            last = c;
        }
    }

    #[test]
    fn zero_mean_density_peaks_at_zero(r in -0.9..0.9f64, x in 0.01..5.0f64, step in 0.01..1.0f64) {
        let p = ProductParams::standard(0.0, 0.0, r).unwrap();
        prop_assert!(density(&p, x) > density(&p, x + step));
        prop_assert!(density(&p, -x) > density(&p, -x - step));
    }

    #[test]
    fn chunking_only_permutes_the_stream(seed in any::<u64>(), chunks in 1usize..6) {
        let p = ProductParams::standard(0.5, -0.3, 0.2).unwrap();
        let config = |n_chunks| SimulationConfig {
            n_chunks,
            upper_levels: vec![0.99],
            lower_levels: vec![0.05],
            thresholds: vec![1.0],
            ..SimulationConfig::new(5_000, seed)
        };
        let a = simulate(&p, &config(1)).unwrap();
        let b = simulate(&p, &config(chunks)).unwrap();
        prop_assert_eq!(&a.sorted_top_block, &b.sorted_top_block);
        prop_assert_eq!(&a.sorted_bottom_block, &b.sorted_bottom_block);
        prop_assert_eq!(&a.exceedances, &b.exceedances);
        prop_assert!((a.mean - b.mean).abs() < 1e-12);
        prop_assert!((a.m2 - b.m2).abs() < 1e-9 * a.m2);
    }
}

#[test]
fn moment_series_approaches_its_leading_term() {
    for k in 1..=3 {
        let gap = |x: f64| (series_n2k_scaled(k, x, 1e-15) / series_n2k_leading_scaled(k, x) - 1.0).abs();
        let gaps: Vec<f64> = [1e2, 1e4, 1e6].iter().map(|&x| gap(x)).collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "k={k}: {gaps:?}");
        // the first correction is of relative order x^{-1/2}
        let rate = gaps[1] / gaps[2];
        assert!((8.0..12.0).contains(&rate), "k={k}: {gaps:?}");
    }
}
