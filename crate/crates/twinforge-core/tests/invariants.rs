//! Property tests for invariants that must hold for arbitrary valid inputs.

use proptest::prelude::*;
use twinforge_core::metrics;
use twinforge_core::rom::Normalization;
use twinforge_core::signals::{
    gen_aprbs, gen_multisine, AprbsConfig, MultisineConfig, TimeGrid,
};
use twinforge_core::stats;

proptest! {
    #[test]
    fn aprbs_values_stay_in_range_and_regenerate_bitwise(
        seed in any::<u64>(),
        n_levels in 2usize..7,
        amp_min in 250.0f64..350.0,
        span in 50.0f64..200.0,
    ) {
        let grid = TimeGrid::new(280, 5.0, 0.0).unwrap();
        let cfg = AprbsConfig {
            amp_min,
            amp_max: amp_min + span,
            n_levels,
            hold_min: 100.0,
            hold_max: 1395.0 / (n_levels - 1) as f64,
            ..AprbsConfig::default()
        };
        let a = gen_aprbs(&cfg, &grid, seed).unwrap();
        let b = gen_aprbs(&cfg, &grid, seed).unwrap();
        prop_assert_eq!(&a, &b);
        for &v in &a.values {
            prop_assert!(v >= cfg.amp_min && v <= cfg.amp_max);
        }
        prop_assert_eq!(a.jumps.len(), n_levels - 1);
    }

    #[test]
    fn multisine_hits_its_amplitude_bounds_exactly(
        seed in any::<u64>(),
        n_harmonics in 1usize..6,
    ) {
        let grid = TimeGrid::new(280, 5.0, 0.0).unwrap();
        let cfg = MultisineConfig { n_harmonics, ..MultisineConfig::default() };
        let s = gen_multisine(&cfg, &grid, seed).unwrap();
        let lo = s.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = s.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((lo - cfg.amp_min).abs() < 1e-9);
        prop_assert!((hi - cfg.amp_max).abs() < 1e-9);
    }

    #[test]
    fn normalization_round_trips(
        x in -500.0f64..500.0,
        offset in -100.0f64..100.0,
        scale in 0.01f64..50.0,
    ) {
        let norm = Normalization {
            out_offset: vec![offset],
            out_scale: vec![scale],
            in_offset: offset,
            in_scale: scale,
            time_span: 1.0,
        };
        let z = norm.normalize_output(0, x);
        let back = norm.denormalize_output(0, z);
        prop_assert!((back - x).abs() < 1e-9 * x.abs().max(1.0));
    }

    #[test]
    fn percentile_is_monotone_and_bounded(
        values in proptest::collection::vec(-1e3f64..1e3, 2..40),
        p in 0.0f64..100.0,
        q in 0.0f64..100.0,
    ) {
        let (lo, hi) = (p.min(q), p.max(q));
        let a = stats::percentile(&values, lo);
        let b = stats::percentile(&values, hi);
        prop_assert!(a <= b + 1e-12);
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(a >= min - 1e-12 && b <= max + 1e-12);
    }

    #[test]
    fn error_measures_obey_their_orderings(
        pred in proptest::collection::vec(250.0f64..500.0, 8..40),
        shift in -20.0f64..20.0,
    ) {
        // Reference differs from the prediction by a varying offset so the
        // reference channel is never constant.
        let reference: Vec<f64> = pred
            .iter()
            .enumerate()
            .map(|(k, &v)| v + shift + 0.1 * k as f64)
            .collect();
        let m = metrics::evaluate(&[pred.clone()], &[reference]).unwrap();
        prop_assert!(m.rmse >= 0.0);
        prop_assert!(m.maxe >= m.rmse - 1e-12);
        prop_assert!(m.maxe >= m.mede.abs() - 1e-12);
        prop_assert!(m.iqr >= 0.0);
        prop_assert!(m.r2 <= 1.0 + 1e-12);
    }
}
