use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::shapley::CoalitionGame;
use super::{Explanation, TabularModel};
use crate::linalg::WeightedRidge;
use crate::{rng, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LimeConfig {
    pub n_samples: usize,
    /// Kernel width on standardized distance; `None` means `0.75·√M`.
    pub kernel_width: Option<f64>,
    pub ridge_lambda: f64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        Self {
            n_samples: 2000,
            kernel_width: None,
            ridge_lambda: 1.0,
        }
    }
}

/// Tabular LIME with a fixed perturbation design.
///
/// Perturbations are `x + ε ⊙ scale` with `ε ~ N(0, I)`; the first sample is
/// `x` itself. Sample weights `exp(−‖ε‖²/w²)` and the ridge factorization
/// depend only on the seed and scales, so one instance explains any number of
/// rows and models at the cost of the model calls.
#[derive(Debug, Clone)]
pub struct LimeTabular {
    m: usize,
    n: usize,
    seed: u64,
    offsets: Vec<f64>,
    ridge: WeightedRidge,
}

impl LimeTabular {
    /// `feature_std` holds per-feature training standard deviations; zero or
    /// non-finite entries fall back to unit scale with a warning.
    pub fn new(feature_std: &[f64], config: &LimeConfig, seed: u64) -> Result<Self> {
        let m = feature_std.len();
        if m == 0 {
            return Err(Error::invalid("no features to explain"));
        }
        if config.n_samples < 2 * m {
            return Err(Error::invalid(format!(
                "LIME needs at least {} samples for {m} features, got {}",
                2 * m,
                config.n_samples
            )));
        }
        let scale: Vec<f64> = feature_std
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                if s > 0.0 && s.is_finite() {
                    s
                } else {
                    log::warn!("feature {i} has zero variance; perturbing it with unit scale");
                    1.0
                }
            })
            .collect();
        let width = config.kernel_width.unwrap_or(0.75 * (m as f64).sqrt());
        if !(width > 0.0) {
            return Err(Error::invalid("kernel width must be positive"));
        }
        let n = config.n_samples;
        let mut rng = rng::stream(seed);
        let mut offsets = vec![0.0; n * m];
        let mut weights = vec![1.0; n];
        for i in 1..n {
            let mut d2 = 0.0;
            for (j, s) in scale.iter().enumerate() {
                let e: f64 = rng.sample(StandardNormal);
                d2 += e * e;
                offsets[i * m + j] = e * s;
            }
            weights[i] = (-d2 / (width * width)).exp();
        }
        let ridge = WeightedRidge::new(&offsets, n, m, &weights, config.ridge_lambda)?;
        Ok(Self {
            m,
            n,
            seed,
            offsets,
            ridge,
        })
    }

    pub fn n_features(&self) -> usize {
        self.m
    }

    /// Perturbed rows around `x`, row-major `n_samples × M`.
    pub fn perturb(&self, x: &[f64]) -> Vec<f64> {
        let mut rows = self.offsets.clone();
        for row in rows.chunks_exact_mut(self.m) {
            for (v, xv) in row.iter_mut().zip(x) {
                *v += xv;
            }
        }
        rows
    }

    /// Fits the surrogate to model outputs on [`Self::perturb`] rows.
    pub fn fit(&self, outputs: &[f64]) -> Result<Explanation> {
        if outputs.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: outputs.len(),
            });
        }
        let (phi, base) = self.ridge.fit(outputs);
        Ok(Explanation {
            method: "lime".into(),
            base_value: base,
            phi,
            n_samples: self.n,
            seed: Some(self.seed),
        })
    }

    pub fn explain<M: TabularModel + ?Sized>(&self, model: &M, x: &[f64]) -> Result<Explanation> {
        if x.len() != self.m || model.n_features() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                actual: x.len(),
            });
        }
        self.fit(&model.predict(&self.perturb(x)))
    }
}

/// One-shot tabular LIME.
pub fn lime_tabular<M: TabularModel + ?Sized>(
    model: &M,
    x: &[f64],
    feature_std: &[f64],
    config: &LimeConfig,
    seed: u64,
) -> Result<Explanation> {
    LimeTabular::new(feature_std, config, seed)?.explain(model, x)
}

/// LIME over binary interpretable features (e.g. superpixels on/off).
///
/// Samples are uniform random masks, the first being the full coalition;
/// weights use the cosine distance to the full coalition with kernel width
/// `kernel_width` (default 0.25).
pub fn lime_binary<G: CoalitionGame + ?Sized>(
    game: &mut G,
    config: &LimeConfig,
    seed: u64,
) -> Result<Explanation> {
    let m = game.n_players();
    let n = config.n_samples;
    if m == 0 || n < 2 {
        return Err(Error::invalid(
            "LIME needs players and at least two samples",
        ));
    }
    let width = config.kernel_width.unwrap_or(0.25);
    let mut rng = rng::stream(seed);
    let mut masks = vec![true; n * m];
    let mut design = vec![1.0; n * m];
    let mut weights = vec![1.0; n];
    for i in 1..n {
        let mut on = 0usize;
        for j in 0..m {
            let b = rng.random_bool(0.5);
            masks[i * m + j] = b;
            design[i * m + j] = f64::from(u8::from(b));
            on += usize::from(b);
        }
        let cos = if on == 0 {
            0.0
        } else {
            on as f64 / ((on as f64).sqrt() * (m as f64).sqrt())
        };
        let d = 1.0 - cos;
        weights[i] = (-d * d / (width * width)).exp();
    }
    let ridge = WeightedRidge::new(&design, n, m, &weights, config.ridge_lambda)?;
    let y = game.values(&masks, n)?;
    let (phi, base) = ridge.fit(&y);
    Ok(Explanation {
        method: "lime".into(),
        base_value: base,
        phi,
        n_samples: n,
        seed: Some(seed),
    })
}
