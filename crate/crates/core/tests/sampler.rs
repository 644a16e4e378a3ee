use proptest::prelude::*;
use simfolio::sampler::*;
use simfolio::Error;

#[test]
fn budget_completion_fills_the_last_weight() {
    let region = FeasibleRegion::simplex(3).unwrap();
    let w = region.complete(&[0.3, 0.5]);
    assert!((w[2] - 0.2).abs() < 1e-15);
    assert!(region.accepts_completed(&w));
}

#[test]
fn box_violation_after_completion_is_rejected() {
    let region = FeasibleRegion::simplex(3).unwrap();
    let w = region.complete(&[0.7, 0.6]);
    assert!((w[2] + 0.3).abs() < 1e-15);
    assert!(!region.accepts_completed(&w));
}

#[test]
fn two_asset_marginal_mean() {
    let region = FeasibleRegion::simplex(2).unwrap();
    let draws = sample_feasible(&region, 10_000, 4).unwrap();
    let mean = draws.iter().map(|w| w[0]).sum::<f64>() / draws.len() as f64;
    assert!((mean - 0.5).abs() < 0.02, "{mean}");
}

#[test]
fn inequalities_are_enforced() {
    let region = FeasibleRegion::simplex(4)
        .unwrap()
        .with_inequality(Inequality::linear("cap", vec![-1.0, -1.0, 0.0, 0.0], 0.4));
    for w in sample_feasible(&region, 2000, 9).unwrap() {
        assert!(w[0] + w[1] <= 0.4 + 1e-12);
    }
}

#[test]
fn empty_region_is_reported() {
    let region = FeasibleRegion::uniform_bounds(3, 0.5, 1.0).unwrap();
    let options = SamplerOptions { min_acceptance: 1e-3, probe_budget: 10_000 };
    let err = sample_stream(&region, 10, 1, 0, &options).unwrap_err();
    assert!(matches!(err, Error::InfeasibleRegion { accepted: 0, .. }));
    assert_eq!(acceptance_rate(&region, 1000, 1), 0.0);
}

#[test]
fn acceptance_rate_matches_area_ratio() {
    // free pair uniform on [-0.5, 1]^2; the completed weight leaves the box
    // on corner triangles of area 0.5 and 0.125, out of 2.25
    let region = FeasibleRegion::uniform_bounds(3, -0.5, 1.0).unwrap();
    let rate = acceptance_rate(&region, 200_000, 3);
    assert!((rate - 13.0 / 18.0).abs() < 0.005, "{rate}");
}

fn region_strategy() -> impl Strategy<Value = (usize, f64, f64)> {
    (2usize..7).prop_flat_map(|n| {
        let cap = 1.0 / n as f64;
        (Just(n), 0.0..cap * 0.8, (cap * 1.2)..1.0)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn samples_are_feasible((n, lo, hi) in region_strategy(), seed in any::<u64>()) {
        let region = FeasibleRegion::uniform_bounds(n, lo, hi).unwrap();
        let draws = sample_feasible(&region, 200, seed).unwrap();
        prop_assert_eq!(draws.len(), 200);
        for w in &draws {
            prop_assert!(region.is_feasible(w));
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(w.iter().all(|x| *x >= lo && *x <= hi));
        }
    }

    #[test]
    fn same_seed_same_samples(n in 2usize..6, seed in any::<u64>(), stream in 0u64..4) {
        let region = FeasibleRegion::simplex(n).unwrap();
        let opts = SamplerOptions::default();
        let a = sample_stream(&region, 50, seed, stream, &opts).unwrap();
        let b = sample_stream(&region, 50, seed, stream, &opts).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn free_regions_stay_in_their_box(dims in 1usize..5, seed in any::<u64>()) {
        let lower: Vec<f64> = (0..dims).map(|j| -(j as f64) - 0.5).collect();
        let upper: Vec<f64> = (0..dims).map(|j| j as f64 + 0.5).collect();
        let region = FeasibleRegion::new(lower.clone(), upper.clone()).unwrap().with_completion(Completion::Free);
        for w in sample_feasible(&region, 100, seed).unwrap() {
            for j in 0..dims {
                prop_assert!(w[j] >= lower[j] && w[j] <= upper[j]);
            }
        }
    }
}
