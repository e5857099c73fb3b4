use crate::{Error, Result};

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a − F_b|`.
///
/// The CDF gap is tracked as the integer `i·n_b − j·n_a`, so the result is
/// the correctly rounded value of the exact rational.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    let a = sorted(a, "first")?;
    let b = sorted(b, "second")?;
    let (na, nb) = (a.len() as i128, b.len() as i128);
    let (mut i, mut j) = (0usize, 0usize);
    let mut best: i128 = 0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        best = best.max((i as i128 * nb - j as i128 * na).abs());
    }
    // once one sample is exhausted the gap only shrinks
    Ok(best as f64 / (na * nb) as f64)
}

/// One-sample KS distance of `p` against Uniform(0, 1).
pub fn ks_uniform(p: &[f64]) -> Result<f64> {
    let p = sorted(p, "sample")?;
    let n = p.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &v) in p.iter().enumerate() {
        let f = v.clamp(0.0, 1.0);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}

fn sorted(x: &[f64], which: &str) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::invalid(format!("{which} sample is empty")));
    }
    if x.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid(format!("{which} sample contains NaN")));
    }
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_example_is_one_third() {
        assert_eq!(
            ks_distance(&[1.0, 2.0, 3.0], &[1.5, 2.5]).unwrap(),
            1.0 / 3.0
        );
    }

    #[test]
    fn extremes() {
        assert_eq!(
            ks_distance(&[1.0, 2.0, 2.0], &[2.0, 1.0, 2.0]).unwrap(),
            0.0
        );
        assert_eq!(ks_distance(&[1.0, 2.0], &[3.0, 4.0, 5.0]).unwrap(), 1.0);
        assert!(ks_distance(&[], &[1.0]).is_err());
    }

    #[test]
    fn uniform_reference() {
        assert!((ks_uniform(&[0.5]).unwrap() - 0.5).abs() < 1e-15);
        let grid: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert!((ks_uniform(&grid).unwrap() - 0.005).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(
            a in prop::collection::vec(-5i32..5, 1..30),
            b in prop::collection::vec(-5i32..5, 1..30),
        ) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let d = ks_distance(&a, &b).unwrap();
            prop_assert_eq!(d, ks_distance(&b, &a).unwrap());
            prop_assert!((0.0..=1.0).contains(&d));
            let self_d = ks_distance(&a, &a).unwrap();
            prop_assert_eq!(self_d, 0.0);
        }
    }
}
