use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brainmap::{aggregate, BrainMapConfig, RowExplainer};
use crate::decoder::{train, MlpConfig};
use crate::preprocess::Dataset;
use crate::{rng, Error, Result};

/// Region importances of shuffled-label models, one row per shuffle.
#[derive(Debug, Clone, PartialEq)]
pub struct NullDistribution {
    samples: Vec<Vec<f64>>,
    pub n_shuffles: usize,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct NullRow {
    shuffle: usize,
    region_id: usize,
    score: f64,
}

impl NullDistribution {
    pub fn new(samples: Vec<Vec<f64>>, seed: u64) -> Result<Self> {
        let r = samples.first().map_or(0, Vec::len);
        if let Some(bad) = samples.iter().position(|s| s.len() != r) {
            return Err(Error::DimensionMismatch {
                expected: r,
                actual: samples[bad].len(),
            }
            .at("shuffle", bad));
        }
        Ok(Self {
            n_shuffles: samples.len(),
            samples,
            seed,
        })
    }

    pub fn n_regions(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    /// Per-shuffle scores, `n_shuffles` rows of length `R`.
    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    /// The `n_shuffles` null values of one region.
    pub fn region(&self, r: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s[r]).collect()
    }

    /// Empirical `(q, 1 − q)` quantiles of one region (nearest rank).
    pub fn band(&self, r: usize, q: f64) -> (f64, f64) {
        let mut v = self.region(r);
        v.sort_by(f64::total_cmp);
        let at = |p: f64| v[((p * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1];
        (at(q), at(1.0 - q))
    }

    /// Long-format CSV `shuffle,region_id,score`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for (shuffle, row) in self.samples.iter().enumerate() {
            for (region_id, &score) in row.iter().enumerate() {
                out.serialize(NullRow {
                    shuffle,
                    region_id,
                    score,
                })?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, seed: u64) -> Result<Self> {
        let mut samples: Vec<Vec<f64>> = Vec::new();
        for (line, row) in csv::Reader::from_reader(r)
            .deserialize::<NullRow>()
            .enumerate()
        {
            let row = row?;
            if row.shuffle == samples.len() {
                samples.push(Vec::new());
            }
            let s = samples
                .get_mut(row.shuffle)
                .filter(|s| s.len() == row.region_id)
                .ok_or_else(|| {
                    Error::invalid("null rows must be ordered by shuffle then region")
                        .at("row", line)
                })?;
            s.push(row.score);
        }
        Self::new(samples, seed)
    }
}

/// A seeded permutation of `labels` that differs from the original.
pub fn permuted_labels(labels: &[u8], seed: u64, shuffle: usize) -> Result<Vec<u8>> {
    if labels.len() < 2 || labels.iter().all(|&l| l == labels[0]) {
        return Err(Error::invalid(
            "labels cannot be shuffled into a different order",
        ));
    }
    let mut rng = rng::substream(seed, &[shuffle as u64]);
    let mut out = labels.to_vec();
    loop {
        out.shuffle(&mut rng);
        if out != labels {
            return Ok(out);
        }
    }
}

/// Retrains on shuffled labels and explains each model with `explainer`.
///
/// Every null model uses `decoder` unchanged, including its seed, so the only
/// difference from the observed model is the label order.
pub fn null_importances_with(
    ds: &Dataset,
    decoder: &MlpConfig,
    explainer: &RowExplainer,
    signed: bool,
    n_shuffles: usize,
    seed: u64,
) -> Result<NullDistribution> {
    if n_shuffles == 0 {
        return Err(Error::invalid("need at least one shuffle"));
    }
    if n_shuffles < 100 {
        log::warn!("{n_shuffles} shuffles are too few for significance at 0.05");
    }
    let samples = (0..n_shuffles)
        .into_par_iter()
        .map(|s| {
            let run = || -> Result<Vec<f64>> {
                let shuffled = ds.with_labels(permuted_labels(ds.labels(), seed, s)?)?;
                let model = train(&shuffled, decoder)?;
                aggregate(&explainer.explain(&model)?, signed)
            };
            run().map_err(|e| e.at("shuffle", s))
        })
        .collect::<Result<Vec<_>>>()?;
    NullDistribution::new(samples, seed)
}

pub fn null_importances(
    ds: &Dataset,
    decoder: &MlpConfig,
    brain: &BrainMapConfig,
    n_shuffles: usize,
    seed: u64,
) -> Result<NullDistribution> {
    let explainer = RowExplainer::new(ds, brain)?;
    null_importances_with(ds, decoder, &explainer, brain.signed, n_shuffles, seed)
}
