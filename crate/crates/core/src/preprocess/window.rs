use crate::series::{AnnotationSeries, RegionTimeSeries};
use crate::{Error, Result, Tensor};

/// Centered sliding mean, emitted every `stride` samples.
///
/// Output `j` averages the input over `[c - window/2, c - window/2 + window)`
/// with `c = j * stride`, truncated at the series boundaries.
pub fn centered_window_mean(series: &[f64], window: usize, stride: usize) -> Vec<f64> {
    assert!(window >= 1 && stride >= 1);
    let n = series.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &v in series {
        acc += v;
        prefix.push(acc);
    }
    let half = window / 2;
    (0..n)
        .step_by(stride)
        .map(|c| {
            let lo = c.saturating_sub(half);
            let hi = (c + window - half).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Converts a duration to a whole number of samples.
pub(crate) fn samples_of(seconds: f64, tr_seconds: f64, what: &str) -> Result<usize> {
    let ratio = seconds / tr_seconds;
    let rounded = ratio.round();
    if (ratio - rounded).abs() > 1e-9 || rounded < 0.0 {
        return Err(Error::invalid(format!(
            "{what} ({seconds} s) must be a whole multiple of the sampling interval ({tr_seconds} s)"
        )));
    }
    Ok(rounded as usize)
}

/// Sliding-window smoothing of annotation time series.
///
/// The output is sampled every `stride_s` seconds.
pub fn smooth_annotations(
    series: &AnnotationSeries,
    window_s: f64,
    stride_s: f64,
) -> Result<AnnotationSeries> {
    let (window, stride) = window_and_stride(window_s, stride_s, series.tr_seconds)?;
    let (a_len, t_len, e_len) = (series.n_annotators(), series.n_times(), series.n_emotions());
    let out_len = t_len.div_ceil(stride);
    let mut out = vec![0.0f32; a_len * out_len * e_len];
    let mut column = vec![0.0f64; t_len];
    for a in 0..a_len {
        for e in 0..e_len {
            for (t, c) in column.iter_mut().enumerate() {
                *c = f64::from(series.get(a, t, e));
            }
            for (j, v) in centered_window_mean(&column, window, stride)
                .into_iter()
                .enumerate()
            {
                out[(a * out_len + j) * e_len + e] = v as f32;
            }
        }
    }
    AnnotationSeries::new(
        series.emotions.clone(),
        stride as f64 * series.tr_seconds,
        Tensor::new(vec![a_len, out_len, e_len], out)?,
    )
}

/// Per-region centered moving average on the native sampling grid.
pub fn moving_average(rts: &RegionTimeSeries, window_s: f64) -> Result<RegionTimeSeries> {
    let (window, _) = window_and_stride(window_s, rts.tr_seconds, rts.tr_seconds)?;
    let (t_len, r_len) = (rts.n_times(), rts.n_regions());
    let values = rts.values();
    let mut out = vec![0.0f32; t_len * r_len];
    let mut column = vec![0.0f64; t_len];
    for r in 0..r_len {
        for (t, c) in column.iter_mut().enumerate() {
            *c = f64::from(values.get2(t, r));
        }
        for (t, v) in centered_window_mean(&column, window, 1)
            .into_iter()
            .enumerate()
        {
            out[t * r_len + r] = v as f32;
        }
    }
    rts.with_values(Tensor::new(vec![t_len, r_len], out)?)
}

fn window_and_stride(window_s: f64, stride_s: f64, tr: f64) -> Result<(usize, usize)> {
    if window_s < tr {
        return Err(Error::invalid(format!(
            "window of {window_s} s is shorter than one sample ({tr} s)"
        )));
    }
    let window = samples_of(window_s, tr, "window")?;
    let stride = samples_of(stride_s, tr, "stride")?;
    if stride == 0 {
        return Err(Error::invalid("stride must be at least one sample"));
    }
    Ok((window, stride))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Direct loop over the window bounds.
    fn brute_force(series: &[f64], window: usize, stride: usize) -> Vec<f64> {
        let n = series.len() as isize;
        let mut out = Vec::new();
        let mut c = 0isize;
        while c < n {
            let start = c - (window / 2) as isize;
            let mut sum = 0.0;
            let mut count = 0;
            for i in start..start + window as isize {
                if i >= 0 && i < n {
                    sum += series[i as usize];
                    count += 1;
                }
            }
            out.push(sum / count as f64);
            c += stride as isize;
        }
        out
    }

    #[test]
    fn constant_series_is_unchanged() {
        let out = centered_window_mean(&[3.0; 12], 5, 1);
        assert!(out.iter().all(|&v| v == 3.0));
    }

    #[test]
    fn impulse_spreads_over_window() {
        let out = centered_window_mean(&[0.0, 0.0, 10.0, 0.0, 0.0], 5, 1);
        assert_eq!(out[2], 2.0);
    }

    #[test]
    fn short_series_uses_truncated_windows() {
        let series = [1.0, 4.0, 7.0];
        let out = centered_window_mean(&series, 5, 1);
        assert_eq!(out, brute_force(&series, 5, 1));
        // every window covers the whole series
        assert_eq!(out, vec![4.0, 4.0, 4.0]);
    }

    #[test]
    fn annotation_smoothing_uses_seconds() {
        let emotions = vec!["happiness".to_string(), "fear".to_string()];
        let data: Vec<f32> = (0..10).flat_map(|t| [t as f32, 1.0]).collect();
        let series =
            AnnotationSeries::new(emotions, 2.0, Tensor::new(vec![1, 10, 2], data).unwrap())
                .unwrap();
        let out = smooth_annotations(&series, 10.0, 4.0).unwrap();
        assert_eq!(out.n_times(), 5);
        assert_eq!(out.tr_seconds, 4.0);
        let col: Vec<f64> = (0..10).map(f64::from).collect();
        let expect = brute_force(&col, 5, 2);
        for j in 0..5 {
            assert!((f64::from(out.get(0, j, 0)) - expect[j]).abs() < 1e-6);
            assert_eq!(out.get(0, j, 1), 1.0);
        }
        assert!(smooth_annotations(&series, 1.0, 2.0).is_err());
        assert!(smooth_annotations(&series, 5.0, 2.0).is_err());
    }

    #[test]
    fn moving_average_matches_column_smoothing() {
        use rand::Rng;
        let mut rng = crate::rng::stream(11);
        let data: Vec<f64> = (0..40 * 3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let rts =
            RegionTimeSeries::new("s", 2.0, Tensor::from_f64(vec![40, 3], &data).unwrap()).unwrap();
        let out = moving_average(&rts, 10.0).unwrap();
        for r in 0..3 {
            let col: Vec<f64> = (0..40)
                .map(|t| f64::from(rts.values().get2(t, r)))
                .collect();
            let expect = brute_force(&col, 5, 1);
            for t in 0..40 {
                assert!((f64::from(out.values().get2(t, r)) - expect[t]).abs() < 1e-6);
            }
        }
    }

    proptest! {
        #[test]
        fn matches_brute_force(series in prop::collection::vec(-100.0f64..100.0, 1..40), window in 1usize..9, stride in 1usize..4) {
            let fast = centered_window_mean(&series, window, stride);
            let slow = brute_force(&series, window, stride);
            prop_assert_eq!(fast.len(), slow.len());
            for (a, b) in fast.iter().zip(&slow) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn bounded_and_shift_equivariant(series in prop::collection::vec(-100.0f64..100.0, 1..40), window in 1usize..9, shift in -50.0f64..50.0) {
            let lo = series.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = series.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let out = centered_window_mean(&series, window, 1);
            let shifted: Vec<f64> = series.iter().map(|v| v + shift).collect();
            let out_shifted = centered_window_mean(&shifted, window, 1);
            for (a, b) in out.iter().zip(&out_shifted) {
                prop_assert!(*a >= lo - 1e-9 && *a <= hi + 1e-9);
                prop_assert!((a + shift - b).abs() < 1e-9);
            }
        }
    }
}
