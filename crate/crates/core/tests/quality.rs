use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use phaselink::noisefloor::published_points;
use phaselink::quality::{assess, gamma_gof_wishart, legacy_indicators};
use phaselink::*;

fn estimated(truth: Vec<f64>, eps: f64, m: usize, seed: u64) -> (CoherenceMatrix, PhaseMagnitude) {
    let c = build_covariance(&CovarianceSpec::rank_one(truth, eps)).unwrap();
    let est = regularize(&estimate_coherence(&sample_ensemble(&c, m, seed).unwrap()).unwrap(), 1e-4).unwrap();
    let pair = decompose(&est);
    (est, pair)
}

#[test]
fn published_tables_refit_to_builtin_models() {
    for method in Method::ALL {
        let fitted = fit_rational(&published_points(method).unwrap()).unwrap();
        let builtin = builtin_model(method).unwrap();
        for n in [20, 40, 60, 95] {
            let (a, b) = (fitted.evaluate(n), builtin.evaluate(n));
            assert!((a - b).abs() < 0.01, "{method} N={n}: {a} vs {b}");
        }
    }
}

#[test]
fn gof_is_clamped_and_monotone() {
    assert_eq!(gamma_gof(0.1, 0.3).unwrap(), 0.0);
    assert_eq!(gamma_gof(1.0, 0.3).unwrap(), 1.0);
    let a = gamma_gof(0.5, 0.3).unwrap();
    let b = gamma_gof(0.7, 0.3).unwrap();
    assert!(0.0 < a && a < b && b < 1.0);
    assert!(gamma_gof(0.5, 1.0).is_err());
}

#[test]
fn wishart_coefficient_prefers_the_truth() {
    let truth: Vec<f64> = (0..10).map(|k| (0.5 * k as f64).cos()).collect();
    let (c, pair) = estimated(truth.clone(), 0.1, 200, 1);
    let reference: Vec<f64> = truth.iter().map(|t| t - truth[0]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let wrong: Vec<f64> = (0..10).map(|_| rng.random_range(-3.0..3.0)).collect();
    let good = gamma_gof_wishart(&c, &pair, &reference).unwrap();
    let bad = gamma_gof_wishart(&c, &pair, &wrong).unwrap();
    assert!((0.0..=1.0).contains(&good) && (0.0..=1.0).contains(&bad));
    assert!(good > bad, "{good} vs {bad}");
}

#[test]
fn assess_reports_high_quality_for_stable_scatterer() {
    let truth: Vec<f64> = (0..24).map(|k| 0.2 * k as f64).collect();
    let (c, pair) = estimated(truth, 0.02, 300, 3);
    let opts = LinkOptions { want_secondary: true, ..Default::default() };
    for method in Method::ALL {
        let w = build_weights(method.scheme, &pair, None).unwrap();
        let r = link(method, &pair, &w, 0, &opts).unwrap();
        let noise = builtin_model(method).unwrap();
        let report = assess(method, &c, &pair, &w, &r, &noise, closure_coefficient(&pair).unwrap()).unwrap();
        assert!(report.gamma_cp > 0.9, "{method}: {report:?}");
        if method != "ed-cw".parse().unwrap() {
            assert!(report.gamma_gof > 0.5, "{method}: {report:?}");
        }
        assert!(report.gamma_amb.unwrap() > 0.3, "{method}: {report:?}");
    }
}

#[test]
fn legacy_indicators_on_perfect_fit() {
    let truth: Vec<f64> = (0..6).map(|k| 0.7 * k as f64).collect();
    let c = build_covariance(&CovarianceSpec::rank_one(truth.clone(), 0.1)).unwrap();
    let pair = decompose(&c);
    let reference: Vec<f64> = truth.iter().map(|t| t - truth[0]).collect();
    let l = legacy_indicators(&pair, &reference).unwrap();
    assert!((l.pta - 1.0).abs() < 1e-9, "{l:?}");
    assert!((l.pta_weighted - 1.0).abs() < 1e-9, "{l:?}");
}
