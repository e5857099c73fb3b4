//! Region-level attribution maps for a trained decoder.
//!
//! A [`RowExplainer`] fixes the rows to explain, the SHAP background and the
//! LIME perturbation design for one dataset, so the observed model and every
//! shuffled-label model are explained under identical conditions.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::explainers::{kernel_shap, LimeConfig, LimeTabular, ShapSampling, TabularModel};
use crate::preprocess::Dataset;
use crate::series::AttributionMap;
use crate::{rng, Error, Result, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "method")]
pub enum BrainExplainer {
    Lime(LimeConfig),
    Shap {
        n_samples: usize,
        /// Background rows drawn from the dataset (seeded).
        n_background: usize,
    },
}

impl BrainExplainer {
    pub fn tag(&self) -> &'static str {
        match self {
            BrainExplainer::Lime(_) => "lime",
            BrainExplainer::Shap { .. } => "shap",
        }
    }
}

impl Default for BrainExplainer {
    fn default() -> Self {
        BrainExplainer::Lime(LimeConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BrainMapConfig {
    pub explainer: BrainExplainer,
    /// Rows explained per model; 0 explains every row.
    pub n_explain: usize,
    /// Average signed attributions instead of magnitudes.
    pub signed: bool,
    pub seed: u64,
}

impl Default for BrainMapConfig {
    fn default() -> Self {
        Self {
            explainer: BrainExplainer::default(),
            n_explain: 20,
            signed: false,
            seed: 0,
        }
    }
}

enum Engine {
    Lime(LimeTabular),
    Shap {
        background: Vec<f64>,
        n_samples: usize,
    },
}

pub struct RowExplainer {
    engine: Engine,
    rows: Vec<usize>,
    x: Vec<f64>,
    m: usize,
    seed: u64,
}

impl RowExplainer {
    pub fn new(ds: &Dataset, config: &BrainMapConfig) -> Result<Self> {
        let n = ds.n_rows();
        let m = ds.n_features();
        let x = ds.features().to_f64();
        let rows: Vec<usize> = if config.n_explain == 0 || config.n_explain >= n {
            (0..n).collect()
        } else {
            let mut r = index::sample(&mut rng::substream(config.seed, &[1]), n, config.n_explain)
                .into_vec();
            r.sort_unstable();
            r
        };
        let engine = match &config.explainer {
            BrainExplainer::Lime(lime) => {
                let mut mean = vec![0.0; m];
                for row in x.chunks_exact(m) {
                    for (a, v) in mean.iter_mut().zip(row) {
                        *a += v;
                    }
                }
                mean.iter_mut().for_each(|a| *a /= n as f64);
                let mut sd = vec![0.0; m];
                for row in x.chunks_exact(m) {
                    for ((s, v), mu) in sd.iter_mut().zip(row).zip(&mean) {
                        *s += (v - mu) * (v - mu);
                    }
                }
                sd.iter_mut().for_each(|s| *s = (*s / n as f64).sqrt());
                Engine::Lime(LimeTabular::new(
                    &sd,
                    lime,
                    rng::derive_seed(config.seed, &[2]),
                )?)
            }
            BrainExplainer::Shap {
                n_samples,
                n_background,
            } => {
                if *n_background == 0 {
                    return Err(Error::invalid("SHAP needs at least one background row"));
                }
                let k = (*n_background).min(n);
                let mut picks =
                    index::sample(&mut rng::substream(config.seed, &[3]), n, k).into_vec();
                picks.sort_unstable();
                let mut background = Vec::with_capacity(k * m);
                for r in picks {
                    background.extend_from_slice(&x[r * m..(r + 1) * m]);
                }
                Engine::Shap {
                    background,
                    n_samples: *n_samples,
                }
            }
        };
        Ok(Self {
            engine,
            rows,
            x,
            m,
            seed: config.seed,
        })
    }

    /// Dataset rows that get explained.
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    /// Per-row attributions, `rows × R`.
    pub fn explain<M: TabularModel + ?Sized>(&self, model: &M) -> Result<Tensor> {
        if model.n_features() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                actual: model.n_features(),
            });
        }
        let phis: Vec<Vec<f64>> = self
            .rows
            .par_iter()
            .enumerate()
            .map(|(i, &r)| {
                let x = &self.x[r * self.m..(r + 1) * self.m];
                let e = match &self.engine {
                    Engine::Lime(lime) => lime.explain(model, x),
                    Engine::Shap {
                        background,
                        n_samples,
                    } => kernel_shap(
                        model,
                        x,
                        background,
                        ShapSampling::Sampled(*n_samples),
                        rng::derive_seed(self.seed, &[4, r as u64]),
                    ),
                };
                e.map(|e| e.phi).map_err(|e| e.at("row", i))
            })
            .collect::<Result<_>>()?;
        Tensor::from_rows(&phis)
    }
}

/// Region scores: mean over rows of `|phi|` (or of `phi` when `signed`).
pub fn aggregate(per_sample: &Tensor, signed: bool) -> Result<Vec<f64>> {
    let (n, r) = per_sample.shape2()?;
    let mut out = vec![0.0; r];
    for row in per_sample.data().chunks_exact(r) {
        for (o, &v) in out.iter_mut().zip(row) {
            *o += if signed {
                f64::from(v)
            } else {
                f64::from(v.abs())
            };
        }
    }
    out.iter_mut().for_each(|o| *o /= n as f64);
    Ok(out)
}

/// Explains `model` and packages the result as a map.
pub fn attribution_map<M: TabularModel + ?Sized>(
    explainer: &RowExplainer,
    model: &M,
    config: &BrainMapConfig,
    model_tag: &str,
    subject_id: &str,
) -> Result<AttributionMap> {
    let per_sample = explainer.explain(model)?;
    Ok(AttributionMap {
        model_tag: model_tag.to_string(),
        explainer_tag: config.explainer.tag().to_string(),
        subject_id: subject_id.to_string(),
        region_scores: aggregate(&per_sample, config.signed)?,
        per_sample: Some(per_sample),
    })
}
