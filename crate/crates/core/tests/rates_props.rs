use krigsearch::rates::fit_exponent_from;
use krigsearch::fit_exponent;
use proptest::prelude::*;

fn geometric(n0: u64, k: usize) -> Vec<u64> {
    (0..k).map(|i| n0 << i).collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn pure_power_laws_are_recovered(alpha in -4.0f64..1.0, c in 1e-6f64..1e3, n0 in 2u64..10, k in 3usize..9, log in any::<bool>()) {
        let ns = geometric(n0, k);
        let errs: Vec<f64> = ns
            .iter()
            .map(|&n| c * (n as f64).powf(alpha) * if log { (n as f64).ln().sqrt() } else { 1.0 })
            .collect();
        let r = fit_exponent(&ns, &errs, log).unwrap();
        prop_assert!((r.fitted_slope - alpha).abs() < 1e-9);
        prop_assert!(r.slope_stderr < 1e-8);
    }

    #[test]
    fn slope_is_scale_invariant(errs in prop::collection::vec(1e-6f64..1.0, 5), scale in 1e-3f64..1e3) {
        let ns = geometric(8, 5);
        let scaled: Vec<f64> = errs.iter().map(|e| e * scale).collect();
        let a = fit_exponent(&ns, &errs, false).unwrap().fitted_slope;
        let b = fit_exponent(&ns, &scaled, false).unwrap().fitted_slope;
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn dropping_smallest_n_keeps_power_law_slope(alpha in -3.0f64..0.0, k in 5usize..9) {
        let ns = geometric(4, k);
        let errs: Vec<f64> = ns.iter().map(|&n| (n as f64).powf(alpha)).collect();
        let full = fit_exponent(&ns, &errs, false).unwrap().fitted_slope;
        let sub = fit_exponent(&ns[1..], &errs[1..], false).unwrap().fitted_slope;
        prop_assert!((full - sub).abs() < 1e-9);
    }
}

#[test]
fn burn_in_drops_small_n() {
    let ns = [2u64, 4, 8, 16, 32];
    let errs = [100.0, 50.0, 1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0];
    let r = fit_exponent_from(&ns, &errs, false, 8).unwrap();
    assert!((r.fitted_slope + 1.0).abs() < 1e-12);
    assert_eq!(r.min_n, 8);
    assert_eq!(r.ns.len(), 5);
}

#[test]
fn invalid_series_are_rejected() {
    assert!(fit_exponent(&[1, 2], &[1.0, 0.5], false).is_err());
    assert!(fit_exponent(&[1, 2, 4], &[1.0, 0.0, 0.5], false).is_err());
    assert!(fit_exponent(&[1, 2, 4], &[1.0, 0.5, 0.25], true).is_err());
    assert!(fit_exponent(&[4, 2, 8], &[1.0, 0.5, 0.25], false).is_err());
}
