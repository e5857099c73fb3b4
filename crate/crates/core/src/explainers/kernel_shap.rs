use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::shapley::{binomial, bits_to_mask, CoalitionGame, MAX_EXACT_PLAYERS};
use super::{Explanation, TabularModel};
use crate::linalg::{gemm, SpdFactor};
use crate::{rng, Error, Result};

/// How KernelSHAP chooses coalitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapSampling {
    /// Every coalition except the empty and full ones, with Shapley kernel
    /// weights. Limited to 20 players.
    Exhaustive,
    /// This many coalitions, drawn in complementary pairs with sizes
    /// distributed by the Shapley kernel; equal regression weights.
    Sampled(usize),
}

/// Rows evaluated per model call when marginalizing over the background.
const ROWS_PER_CALL: usize = 16_384;

/// Kernel-weighted least squares estimate of the Shapley values of `game`.
///
/// The efficiency constraint `base + Σφ = v(full)` is imposed exactly by
/// eliminating the last player from the regression.
pub fn kernel_shap_game<G: CoalitionGame + ?Sized>(
    game: &mut G,
    sampling: ShapSampling,
    seed: u64,
) -> Result<Explanation> {
    let m = game.n_players();
    if m == 0 {
        return Err(Error::invalid("game has no players"));
    }
    let exhaustive = match sampling {
        ShapSampling::Exhaustive => {
            if m > MAX_EXACT_PLAYERS {
                return Err(Error::invalid(format!(
                    "exhaustive KernelSHAP is limited to {MAX_EXACT_PLAYERS} players"
                )));
            }
            true
        }
        ShapSampling::Sampled(n) => {
            if n < m + 2 {
                return Err(Error::invalid(format!(
                    "{n} samples is below the minimum of {} for {m} players",
                    m + 2
                )));
            }
            m <= MAX_EXACT_PLAYERS && (1usize << m) - 2 <= n
        }
    };

    let mut masks: Vec<bool> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    // endpoints first
    masks.extend(std::iter::repeat_n(false, m));
    masks.extend(std::iter::repeat_n(true, m));
    if m > 1 {
        if exhaustive {
            for bits in 1..(1usize << m) - 1 {
                let s = bits.count_ones() as usize;
                bits_to_mask(bits, m, &mut masks);
                weights.push((m - 1) as f64 / (binomial(m, s) * (s * (m - s)) as f64));
            }
        } else if let ShapSampling::Sampled(n) = sampling {
            let sizes: Vec<f64> = (1..m).map(|s| 1.0 / (s * (m - s)) as f64).collect();
            let size_dist = WeightedIndex::new(&sizes).expect("positive weights");
            let mut rng = rng::stream(seed);
            for _ in 0..n / 2 {
                let s = size_dist.sample(&mut rng) + 1;
                let mut mask = vec![false; m];
                for i in index::sample(&mut rng, m, s) {
                    mask[i] = true;
                }
                masks.extend(mask.iter().copied());
                masks.extend(mask.iter().map(|b| !b));
                weights.push(1.0);
                weights.push(1.0);
            }
        }
    }
    let n_coal = weights.len();
    let values = game.values(&masks, n_coal + 2)?;
    let (v0, v_full) = (values[0], values[1]);
    let total = v_full - v0;
    let mut phi = vec![0.0; m];
    if m == 1 {
        phi[0] = total;
    } else {
        let k = m - 1;
        let mut a = vec![0.0; n_coal * k];
        let mut wa = vec![0.0; n_coal * k];
        let mut rhs = vec![0.0; k];
        for c in 0..n_coal {
            let z = &masks[(c + 2) * m..(c + 3) * m];
            let zl = f64::from(u8::from(z[k]));
            let y = values[c + 2] - v0 - zl * total;
            let w = weights[c];
            for j in 0..k {
                let v = f64::from(u8::from(z[j])) - zl;
                a[c * k + j] = v;
                wa[c * k + j] = w * v;
                rhs[j] += w * v * y;
            }
        }
        let mut gram = vec![0.0; k * k];
        gemm(
            k,
            n_coal,
            k,
            1.0,
            &a,
            (1, k as isize),
            &wa,
            (k as isize, 1),
            0.0,
            &mut gram,
        );
        let factor = SpdFactor::new(&gram, k).map_err(|_| {
            Error::Singular(format!(
                "KernelSHAP system with {n_coal} coalitions for {m} players is rank deficient; use more samples"
            ))
        })?;
        let sol = factor.solve(&rhs);
        phi[..k].copy_from_slice(&sol);
        phi[k] = total - sol.iter().sum::<f64>();
    }
    Ok(Explanation {
        method: "kernel_shap".into(),
        base_value: v0,
        phi,
        n_samples: n_coal,
        seed: (!exhaustive).then_some(seed),
    })
}

/// Game whose value is the model output with absent features replaced by
/// background rows, averaged over the background.
pub struct BackgroundGame<'a, M: ?Sized> {
    model: &'a M,
    x: &'a [f64],
    background: &'a [f64],
}

impl<'a, M: TabularModel + ?Sized> BackgroundGame<'a, M> {
    pub fn new(model: &'a M, x: &'a [f64], background: &'a [f64]) -> Result<Self> {
        let m = model.n_features();
        if x.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: x.len(),
            });
        }
        if background.is_empty() || !background.len().is_multiple_of(m) {
            return Err(Error::invalid("background must hold at least one full row"));
        }
        Ok(Self {
            model,
            x,
            background,
        })
    }
}

impl<M: TabularModel + ?Sized> CoalitionGame for BackgroundGame<'_, M> {
    fn n_players(&self) -> usize {
        self.x.len()
    }

    fn values(&mut self, masks: &[bool], n: usize) -> Result<Vec<f64>> {
        let m = self.x.len();
        let n_bg = self.background.len() / m;
        let per_call = (ROWS_PER_CALL / n_bg).max(1);
        let mut out = Vec::with_capacity(n);
        let mut rows = Vec::new();
        for chunk in masks[..n * m].chunks(per_call * m) {
            rows.clear();
            for mask in chunk.chunks_exact(m) {
                for bg in self.background.chunks_exact(m) {
                    rows.extend(
                        mask.iter()
                            .zip(self.x)
                            .zip(bg)
                            .map(|((&keep, &xv), &bv)| if keep { xv } else { bv }),
                    );
                }
            }
            let preds = self.model.predict(&rows);
            out.extend(
                preds
                    .chunks_exact(n_bg)
                    .map(|p| p.iter().sum::<f64>() / n_bg as f64),
            );
        }
        Ok(out)
    }
}

/// KernelSHAP for one tabular row against a background sample.
pub fn kernel_shap<M: TabularModel + ?Sized>(
    model: &M,
    x: &[f64],
    background: &[f64],
    sampling: ShapSampling,
    seed: u64,
) -> Result<Explanation> {
    let mut game = BackgroundGame::new(model, x, background)?;
    kernel_shap_game(&mut game, sampling, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explainers::{shapley_exact, FnModel, TableGame};
    use rand::Rng;

    #[test]
    fn exhaustive_matches_exact_on_random_games() {
        let mut rng = crate::rng::stream(1);
        for m in 1..=8 {
            let table: Vec<f64> = (0..1 << m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut g = TableGame::new(m, table).unwrap();
            let exact = shapley_exact(&mut g).unwrap();
            let approx = kernel_shap_game(&mut g, ShapSampling::Exhaustive, 0).unwrap();
            for (a, b) in exact.phi.iter().zip(&approx.phi) {
                assert!((a - b).abs() < 1e-9, "m={m}");
            }
            assert_eq!(exact.base_value, approx.base_value);
        }
    }

    #[test]
    fn linear_model_with_zero_mean_background() {
        let f = FnModel::new(2, |r: &[f64]| 2.0 * r[0] + 3.0 * r[1]);
        let bg = [1.0, -1.0, -1.0, 1.0, 0.5, 0.5, -0.5, -0.5];
        let e = kernel_shap(&f, &[1.0, 1.0], &bg, ShapSampling::Exhaustive, 0).unwrap();
        assert!(
            (e.phi[0] - 2.0).abs() < 1e-12 && (e.phi[1] - 3.0).abs() < 1e-12,
            "{:?}",
            e.phi
        );
        assert!(e.base_value.abs() < 1e-12);
    }

    #[test]
    fn sampled_mode_keeps_efficiency() {
        let f = FnModel::new(30, |r: &[f64]| {
            r.iter()
                .enumerate()
                .map(|(i, v)| (i as f64) * v * v)
                .sum::<f64>()
                .tanh()
        });
        let mut rng = crate::rng::stream(3);
        let x: Vec<f64> = (0..30).map(|_| rng.random_range(-1.0..1.0)).collect();
        let bg: Vec<f64> = (0..30 * 5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let e = kernel_shap(&f, &x, &bg, ShapSampling::Sampled(400), 7).unwrap();
        let fx = f.predict(&x)[0];
        assert!((e.base_value + e.phi.iter().sum::<f64>() - fx).abs() < 1e-9);
        let again = kernel_shap(&f, &x, &bg, ShapSampling::Sampled(400), 7).unwrap();
        assert_eq!(e, again);
        assert_eq!(e.seed, Some(7));
    }

    #[test]
    fn too_few_samples() {
        let f = FnModel::new(10, |r: &[f64]| r[0]);
        let x = vec![0.0; 10];
        assert!(kernel_shap(&f, &x, &x, ShapSampling::Sampled(5), 0).is_err());
    }
}
