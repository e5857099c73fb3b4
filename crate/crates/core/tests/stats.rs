use emoxai::brainmap::{attribution_map, BrainExplainer, BrainMapConfig, RowExplainer};
use emoxai::decoder::{train, MlpConfig};
use emoxai::explainers::LimeConfig;
use emoxai::preprocess::Dataset;
use emoxai::series::{GazeSample, GazeTrace, SaliencyHeatmap};
use emoxai::stats::{
    attention_correlation_map, ks_distance, null_importances_with, overlap_score, permutation_p,
    spearman, OverlapConfig, TieRule, WindowAggregate,
};
use emoxai::Tensor;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

/// Ranks by counting: 1 + #below + (#equal − 1)/2.
fn counted_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let below = x.iter().filter(|&&u| u < v).count() as f64;
            let equal = x.iter().filter(|&&u| u == v).count() as f64;
            1.0 + below + (equal - 1.0) / 2.0
        })
        .collect()
}

fn textbook_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

proptest! {
    #[test]
    fn spearman_matches_counted_midranks(
        pairs in prop::collection::vec((0u8..6, 0u8..6), 3..40)
    ) {
        let x: Vec<f64> = pairs.iter().map(|p| f64::from(p.0)).collect();
        let y: Vec<f64> = pairs.iter().map(|p| f64::from(p.1)).collect();
        let want = textbook_pearson(&counted_ranks(&x), &counted_ranks(&y));
        let got = spearman(&x, &y).unwrap();
        if want.is_nan() {
            prop_assert!(got.is_nan());
        } else {
            prop_assert!((got - want).abs() < 1e-12, "{} vs {}", got, want);
        }
    }

    #[test]
    fn permutation_p_monotone_and_positive(
        null in prop::collection::vec(-5.0f64..5.0, 1..60),
        a in -6.0f64..6.0,
        b in -6.0f64..6.0,
    ) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (p_lo, p_hi) = (permutation_p(lo, &null), permutation_p(hi, &null));
        prop_assert!(p_hi <= p_lo);
        prop_assert!(p_hi >= 1.0 / (null.len() as f64 + 1.0));
        prop_assert!(p_lo <= 1.0);
    }

    #[test]
    fn ks_symmetric_and_bounded(
        a in prop::collection::vec(-3.0f64..3.0, 1..30),
        b in prop::collection::vec(-3.0f64..3.0, 1..30),
    ) {
        let d = ks_distance(&a, &b).unwrap();
        prop_assert_eq!(d, ks_distance(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(ks_distance(&a, &a).unwrap(), 0.0);
    }
}

fn gaze(w: usize, h: usize, pts: &[(f64, f64)]) -> GazeTrace {
    let samples = pts
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| GazeSample {
            t_seconds: 4.6 + i as f64 * 0.8 / pts.len() as f64,
            x_px: x,
            y_px: y,
            valid: true,
        })
        .collect();
    GazeTrace::new("s", 100.0, w, h, samples).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn overlap_invariant_under_monotone_maps(
        levels in prop::collection::vec(0usize..20, 48),
        steps in prop::collection::vec(0.05f64..10.0, 20),
        offset in -100.0f64..100.0,
        pts in prop::collection::vec((0.0f64..8.0, 0.0f64..6.0), 1..12),
    ) {
        let table: Vec<f64> = steps
            .iter()
            .scan(offset, |acc, s| { *acc += s; Some(*acc) })
            .collect();
        let raw = Tensor::new(vec![6, 8], levels.iter().map(|&l| l as f32).collect()).unwrap();
        let mapped = Tensor::new(vec![6, 8], levels.iter().map(|&l| table[l] as f32).collect()).unwrap();
        let a = SaliencyHeatmap::new(0, raw).unwrap();
        let b = SaliencyHeatmap::new(0, mapped).unwrap();
        let g = gaze(8, 6, &pts);
        for tie_rule in [TieRule::StrictLess, TieRule::Midrank] {
            for aggregate in [WindowAggregate::Mean, WindowAggregate::Max] {
                let cfg = OverlapConfig { window_s: 1.0, tie_rule, aggregate };
                prop_assert_eq!(
                    overlap_score(&a, &g, 5.0, &cfg).unwrap(),
                    overlap_score(&b, &g, 5.0, &cfg).unwrap()
                );
            }
        }
    }
}

#[test]
fn ramp_median_pixel() {
    // 9 distinct values, gaze on the 5th smallest
    let t = Tensor::new(vec![3, 3], (0..9).map(|i| i as f32 * 1.5).collect()).unwrap();
    let h = SaliencyHeatmap::new(0, t).unwrap();
    let s = overlap_score(
        &h,
        &gaze(3, 3, &[(1.5, 1.5)]),
        5.0,
        &OverlapConfig::default(),
    )
    .unwrap()
    .unwrap();
    assert!((s - 0.5).abs() <= 1.0 / 8.0);
}

fn noise_tensor(rows: usize, cols: usize, seed: u64) -> Vec<f32> {
    let mut rng = emoxai::rng::stream(seed);
    (0..rows * cols)
        .map(|_| rng.sample::<f64, _>(StandardNormal) as f32)
        .collect()
}

#[test]
fn independent_attribution_columns_are_near_zero() {
    let (n, r) = (1000, 200);
    let mut rng = emoxai::rng::stream(11);
    let overlaps: Vec<Option<f64>> = (0..n).map(|_| Some(rng.random_range(0.0..1.0))).collect();
    let attr = Tensor::new(vec![n, r], noise_tensor(n, r, 12)).unwrap();
    let map = attention_correlation_map(&overlaps, &attr).unwrap();
    let small = map.iter().filter(|rho| rho.abs() < 0.1).count();
    assert!(small as f64 >= 0.99 * r as f64, "{small}/{r} below 0.1");
}

#[test]
fn tracking_region_is_argmax() {
    let (n, r, planted) = (300, 50, 17);
    let mut rng = emoxai::rng::stream(5);
    let overlaps: Vec<Option<f64>> = (0..n)
        .map(|i| {
            if i % 13 == 0 {
                None
            } else {
                Some(rng.random_range(0.0..1.0))
            }
        })
        .collect();
    let mut data = noise_tensor(n, r, 6);
    for (i, o) in overlaps.iter().enumerate() {
        if let Some(o) = o {
            data[i * r + planted] += (*o as f32) * 3.0;
        }
    }
    let map =
        attention_correlation_map(&overlaps, &Tensor::new(vec![n, r], data).unwrap()).unwrap();
    let best = (0..r).max_by(|&a, &b| map[a].total_cmp(&map[b])).unwrap();
    assert_eq!(best, planted);
}

#[test]
fn pure_noise_observed_inside_null_band() {
    let (n, r) = (120, 24);
    let x: Vec<f64> = noise_tensor(n, r, 30).into_iter().map(f64::from).collect();
    let mut rng = emoxai::rng::stream(31);
    let mut labels: Vec<u8> = (0..n).map(|i| u8::from(i < n / 2)).collect();
    labels.shuffle(&mut rng);
    let ds = Dataset::from_rows("noise", &x, r, labels).unwrap();
    let decoder = MlpConfig {
        hidden_units: vec![8],
        l2_lambda: 0.03,
        max_epochs: 25,
        validation_fraction: 0.0,
        ..MlpConfig::default()
    };
    let brain = BrainMapConfig {
        explainer: BrainExplainer::Lime(LimeConfig {
            n_samples: 300,
            ..LimeConfig::default()
        }),
        n_explain: 15,
        ..BrainMapConfig::default()
    };
    let ex = RowExplainer::new(&ds, &brain).unwrap();
    let observed = attribution_map(&ex, &train(&ds, &decoder).unwrap(), &brain, "m", "s").unwrap();
    let null = null_importances_with(&ds, &decoder, &ex, false, 99, 3).unwrap();
    let inside = (0..r)
        .filter(|&i| {
            let (lo, hi) = null.band(i, 0.025);
            (lo..=hi).contains(&observed.region_scores[i])
        })
        .count();
    assert!(
        inside as f64 >= 0.9 * r as f64,
        "{inside}/{r} inside the band"
    );
}
