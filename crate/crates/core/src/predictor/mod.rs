//! The black-box image classifier boundary.
//!
//! Anything that maps RGB rasters to class probabilities implements
//! [`Predictor`]: in-process toys ([`toy`]) and external processes spoken to
//! over newline-delimited JSON ([`client`], wire format in [`protocol`]).

pub mod client;
pub mod conformance;
pub mod protocol;
pub mod toy;

use image::RgbImage;

use crate::Result;

pub use client::{ClientOptions, ProtocolClient};
pub use toy::{builtin, ConstantPredictor, QuadrantBrightness, ScriptedPredictor};

/// Tolerance on `Σ probs = 1` for every reply.
pub const PROB_SUM_TOLERANCE: f64 = 1e-4;

pub trait Predictor {
    fn n_classes(&self) -> usize;

    /// One probability vector per image, in input order.
    fn classify_batch(&mut self, images: &[RgbImage]) -> Result<Vec<Vec<f64>>>;
}

impl<P: Predictor + ?Sized> Predictor for Box<P> {
    fn n_classes(&self) -> usize {
        (**self).n_classes()
    }

    fn classify_batch(&mut self, images: &[RgbImage]) -> Result<Vec<Vec<f64>>> {
        (**self).classify_batch(images)
    }
}

/// Indices of the `k` largest probabilities, largest first; ties go to the
/// lower index.
pub fn topk(probs: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..probs.len()).collect();
    let k = k.min(idx.len());
    let cmp = |&a: &usize, &b: &usize| probs[b].total_cmp(&probs[a]).then(a.cmp(&b));
    if k < idx.len() && k > 0 {
        idx.select_nth_unstable_by(k - 1, cmp);
    }
    idx.truncate(k);
    idx.sort_by(cmp);
    idx
}

/// Checks a reply vector against the class count and the unit-sum invariant.
pub fn validate_probs(probs: &[f64], n_classes: usize) -> std::result::Result<(), String> {
    if probs.len() != n_classes {
        return Err(format!(
            "expected {n_classes} probabilities, got {}",
            probs.len()
        ));
    }
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err("probabilities must be finite and non-negative".into());
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
        return Err(format!("probabilities sum to {sum}, not 1"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn topk_examples() {
        assert_eq!(topk(&[0.1, 0.7, 0.2], 1), vec![1]);
        assert_eq!(topk(&[0.25; 4], 3), vec![0, 1, 2]);
        assert_eq!(topk(&[0.1, 0.7, 0.2], 5), vec![1, 2, 0]);
    }

    #[test]
    fn topk_matches_full_sort() {
        let mut rng = crate::rng::stream(1000);
        for _ in 0..50 {
            let probs: Vec<f64> = (0..1000)
                .map(|_| (rng.random_range(0..200) as f64) / 200.0)
                .collect();
            let mut order: Vec<usize> = (0..1000).collect();
            // stable sort keeps lower indices first among equals
            order.sort_by(|&a, &b| probs[b].partial_cmp(&probs[a]).unwrap());
            assert_eq!(topk(&probs, 3), order[..3].to_vec());
        }
    }

    #[test]
    fn prob_validation() {
        assert!(validate_probs(&[0.5, 0.5], 2).is_ok());
        assert!(validate_probs(&[0.4, 0.4], 2).is_err());
        assert!(validate_probs(&[1.0], 2).is_err());
    }
}
