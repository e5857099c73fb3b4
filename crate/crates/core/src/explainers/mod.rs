//! Model-agnostic attribution.
//!
//! Every explainer returns an [`Explanation`]: per-feature attributions
//! `phi` and a `base_value`. Shapley-based methods satisfy
//! `base_value + Σ phi = f(x)`; LIME reports the surrogate's slope and
//! intercept.

mod image;
mod kernel_shap;
mod lime;
mod segment;
mod shapley;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::decoder::MlpModel;
use crate::Result;

pub use self::image::{
    explain_image, ImageExplainConfig, ImageExplanation, ImageMethod, MAX_SEGMENTS,
};
pub use kernel_shap::{kernel_shap, kernel_shap_game, BackgroundGame, ShapSampling};
pub use lime::{lime_binary, lime_tabular, LimeConfig, LimeTabular};
pub use segment::{segment_image, SegmentMap, SegmentMode, SLIC_COMPACTNESS, SLIC_ITERATIONS};
pub use shapley::{shapley_exact, CoalitionGame, FnGame, TableGame, MAX_EXACT_PLAYERS};

/// Attribution for one input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub method: String,
    pub base_value: f64,
    pub phi: Vec<f64>,
    pub n_samples: usize,
    /// Absent for deterministic (exhaustive) methods.
    pub seed: Option<u64>,
}

impl Explanation {
    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        Ok(serde_json::from_reader(r)?)
    }
}

/// A batch scorer over row-major feature rows.
pub trait TabularModel: Sync {
    fn n_features(&self) -> usize;
    /// One output per row of `rows` (`n × n_features`).
    fn predict(&self, rows: &[f64]) -> Vec<f64>;
}

impl TabularModel for MlpModel {
    fn n_features(&self) -> usize {
        MlpModel::n_features(self)
    }

    fn predict(&self, rows: &[f64]) -> Vec<f64> {
        self.predict_proba(rows)
    }
}

/// Wraps a per-row closure as a [`TabularModel`].
pub struct FnModel<F> {
    m: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnModel<F> {
    pub fn new(n_features: usize, f: F) -> Self {
        Self { m: n_features, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> TabularModel for FnModel<F> {
    fn n_features(&self) -> usize {
        self.m
    }

    fn predict(&self, rows: &[f64]) -> Vec<f64> {
        rows.chunks_exact(self.m).map(&self.f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn explanation_json_fields() {
        let e = Explanation {
            method: "lime".into(),
            base_value: 0.5,
            phi: vec![1.0, -2.0],
            n_samples: 10,
            seed: Some(3),
        };
        let mut buf = Vec::new();
        e.write_json(&mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        for key in ["method", "base_value", "phi", "n_samples", "seed"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(Explanation::read_json(buf.as_slice()).unwrap(), e);
    }
}
