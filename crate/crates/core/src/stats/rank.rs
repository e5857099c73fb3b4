use crate::{Error, Result};

/// Ranks starting at 1; tied values share the mean of their positions.
pub fn midranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && x[order[j]] == x[order[i]] {
            j += 1;
        }
        // positions i+1 ..= j
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

/// Pearson correlation; NaN when either input is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(f64::NAN);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check(x, y)?;
    pearson(&midranks(x), &midranks(y))
}

fn check(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::invalid("correlation needs at least two points"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("correlation inputs must be finite"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reversed_is_minus_one() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
    }

    #[test]
    fn ties_get_midranks() {
        assert_eq!(
            midranks(&[10.0, 20.0, 10.0, 5.0, 20.0, 20.0]),
            vec![2.5, 5.0, 2.5, 1.0, 5.0, 5.0]
        );
    }

    #[test]
    fn constant_input_is_nan() {
        assert!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0])
            .unwrap()
            .is_nan());
        assert!(spearman(&[1.0], &[1.0]).is_err());
        assert!(spearman(&[1.0, 2.0], &[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn monotone_transform_gives_one(x in prop::collection::vec(-1e3f64..1e3, 3..40)) {
            let y: Vec<f64> = x.iter().map(|v| (v / 100.0).exp() + v * 3.0).collect();
            let rho = spearman(&x, &y).unwrap();
            prop_assume!(!rho.is_nan());
            prop_assert!((rho - 1.0).abs() < 1e-12);
        }

        #[test]
        fn symmetric_and_bounded(
            x in prop::collection::vec(0u8..5, 2..30),
            seed in any::<u64>(),
        ) {
            use rand::Rng;
            let mut rng = crate::rng::stream(seed);
            let a: Vec<f64> = x.iter().map(|&v| f64::from(v)).collect();
            let b: Vec<f64> = a.iter().map(|_| f64::from(rng.random_range(0u8..4))).collect();
            let r1 = spearman(&a, &b).unwrap();
            let r2 = spearman(&b, &a).unwrap();
            prop_assert!(r1.is_nan() && r2.is_nan() || r1 == r2);
            prop_assert!(r1.is_nan() || (-1.0..=1.0).contains(&r1));
        }
    }
}
