use proptest::prelude::*;
use sasv_core::metrics::compute_eer;

/// Threshold sweep by direct counting at every distinct score, then the
/// accept-nothing point. Returns `(eer, threshold)`.
fn brute_force_eer(pos: &[f64], neg: &[f64]) -> (f64, f64) {
    let mut thresholds: Vec<f64> = pos.iter().chain(neg).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let rates = |t: f64| {
        let frr = pos.iter().filter(|&&s| s < t).count() as f64 / pos.len() as f64;
        let far = neg.iter().filter(|&&s| s >= t).count() as f64 / neg.len() as f64;
        (frr, far)
    };
    let mut points: Vec<(f64, f64, f64)> = thresholds
        .iter()
        .map(|&t| {
            let (frr, far) = rates(t);
            (t, frr, far)
        })
        .collect();
    points.push((*thresholds.last().unwrap(), 1.0, 0.0));
    let k = points.iter().position(|&(_, frr, far)| frr >= far).unwrap();
    let (t1, frr1, far1) = points[k];
    if k == 0 || frr1 == far1 {
        return (frr1, t1);
    }
    let (t0, frr0, far0) = points[k - 1];
    // solve frr0 + a (frr1 - frr0) = far0 + a (far1 - far0)
    let a = (far0 - frr0) / ((frr1 - frr0) - (far1 - far0));
    (frr0 + a * (frr1 - frr0), t0 + a * (t1 - t0))
}

/// Scores with occasional coarse rounding so that ties are common.
fn score_sets() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..500, 1usize..500, 0.0f64..3.0, any::<bool>()).prop_flat_map(|(np, nn, shift, tie)| {
        let grid = if tie { 10.0 } else { 1e9 };
        let round = move |v: Vec<f64>| {
            v.into_iter()
                .map(|x| (x * grid).round() / grid)
                .collect::<Vec<_>>()
        };
        (
            prop::collection::vec(-3.0f64..3.0 + shift, np).prop_map(round),
            prop::collection::vec(-3.0f64..3.0, nn).prop_map(round),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn matches_brute_force((pos, neg) in score_sets()) {
        let fast = compute_eer(&pos, &neg).unwrap();
        let (eer, threshold) = brute_force_eer(&pos, &neg);
        prop_assert!((fast.eer - eer).abs() <= 1e-9, "{} vs {}", fast.eer, eer);
        prop_assert!((fast.threshold - threshold).abs() <= 1e-9);
        prop_assert!((0.0..=1.0).contains(&fast.eer));
    }

    #[test]
    fn invariant_under_increasing_maps((pos, neg) in score_sets()) {
        let base = compute_eer(&pos, &neg).unwrap().eer;
        let f = |v: &[f64]| v.iter().map(|x| (2.0 * x).exp() + 7.0).collect::<Vec<_>>();
        let mapped = compute_eer(&f(&pos), &f(&neg)).unwrap().eer;
        prop_assert!((base - mapped).abs() <= 1e-12);
    }

    #[test]
    fn negating_and_swapping_classes_keeps_the_eer(
        pos in prop::collection::vec(-5.0f64..5.0, 1..200),
        neg in prop::collection::vec(-5.0f64..5.0, 1..200),
    ) {
        let neg_of = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<_>>();
        let a = compute_eer(&pos, &neg).unwrap().eer;
        let b = compute_eer(&neg_of(&neg), &neg_of(&pos)).unwrap().eer;
        prop_assert!((a - b).abs() <= 1e-9, "{} vs {}", a, b);
    }
}

#[test]
fn separable_and_inverted_extremes() {
    assert_eq!(compute_eer(&[1.0, 2.0], &[-1.0, 0.0]).unwrap().eer, 0.0);
    assert_eq!(compute_eer(&[-1.0, 0.0], &[1.0, 2.0]).unwrap().eer, 1.0);
    assert_eq!(compute_eer(&[0.3; 4], &[0.3; 9]).unwrap().eer, 0.5);
}
