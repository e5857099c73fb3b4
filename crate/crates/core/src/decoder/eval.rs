use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{train, MlpConfig, MlpModel};
use super::network::param_count;
use crate::preprocess::{kfold_split, Dataset, FoldMode, FoldSplit};
use crate::{rng, Error, Result};

/// Trains one model per fold on the other folds' rows. Fold `f` uses the
/// seed derived from `(config.seed, f)`.
pub fn train_folds(ds: &Dataset, folds: &FoldSplit, config: &MlpConfig) -> Result<Vec<MlpModel>> {
    check_folds(ds, folds)?;
    (0..folds.k)
        .into_par_iter()
        .map(|f| {
            let train_ds = ds.select(&folds.train_indices(f))?;
            let cfg = MlpConfig {
                seed: rng::derive_seed(config.seed, &[f as u64]),
                ..config.clone()
            };
            train(&train_ds, &cfg).map_err(|e| e.at("fold", f))
        })
        .collect()
}

fn check_folds(ds: &Dataset, folds: &FoldSplit) -> Result<()> {
    if folds.assignments.len() != ds.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: ds.n_rows(),
            actual: folds.assignments.len(),
        });
    }
    if folds.assignments.iter().any(|&f| f >= folds.k) {
        return Err(Error::invalid("fold id out of range"));
    }
    Ok(())
}

/// Config for a final model trained on every row for a fixed number of
/// epochs: the median over folds of `best_epoch + 1`, with no validation
/// split. Null models trained with the same config then differ from the
/// observed model only in their labels.
pub fn fixed_schedule(config: &MlpConfig, fold_models: &[MlpModel]) -> Result<MlpConfig> {
    let mut epochs: Vec<usize> = fold_models.iter().map(|m| m.best_epoch + 1).collect();
    if epochs.is_empty() {
        return Err(Error::invalid("no fold models"));
    }
    epochs.sort_unstable();
    Ok(MlpConfig {
        max_epochs: epochs[(epochs.len() - 1) / 2],
        validation_fraction: 0.0,
        ..config.clone()
    })
}

/// Fraction of rows where `p ≥ 0.5` agrees with the label.
pub fn accuracy(probs: &[f64], labels: &[u8]) -> f64 {
    if labels.is_empty() {
        return f64::NAN;
    }
    let hits = probs
        .iter()
        .zip(labels)
        .filter(|(&p, &l)| (p >= 0.5) == (l == 1))
        .count();
    hits as f64 / labels.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// Mean over folds of the accuracy on each model's own training rows.
    pub in_sample_acc: f64,
    /// Mean over folds of the held-out accuracy.
    pub out_sample_acc: f64,
    pub fold_in_sample: Vec<f64>,
    pub fold_out_sample: Vec<f64>,
}

pub fn evaluate(models: &[MlpModel], ds: &Dataset, folds: &FoldSplit) -> Result<Evaluation> {
    check_folds(ds, folds)?;
    if models.len() != folds.k {
        return Err(Error::DimensionMismatch {
            expected: folds.k,
            actual: models.len(),
        });
    }
    let probs: Vec<Vec<f64>> = models.iter().map(|m| m.predict_dataset(ds)).collect();
    let labels = ds.labels();
    let mut fold_in = Vec::with_capacity(folds.k);
    let mut fold_out = Vec::with_capacity(folds.k);
    for (f, p) in probs.iter().enumerate() {
        let (mut hit_in, mut n_in, mut hit_out, mut n_out) = (0usize, 0usize, 0usize, 0usize);
        for (i, (&pi, &li)) in p.iter().zip(labels).enumerate() {
            let hit = usize::from((pi >= 0.5) == (li == 1));
            if folds.assignments[i] == f {
                hit_out += hit;
                n_out += 1;
            } else {
                hit_in += hit;
                n_in += 1;
            }
        }
        fold_in.push(hit_in as f64 / n_in.max(1) as f64);
        fold_out.push(hit_out as f64 / n_out.max(1) as f64);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(Evaluation {
        in_sample_acc: mean(&fold_in),
        out_sample_acc: mean(&fold_out),
        fold_in_sample: fold_in,
        fold_out_sample: fold_out,
    })
}

/// Hyperparameter grid. Two-layer cells take every ordered pair of `units`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpace {
    pub hidden_layers: Vec<usize>,
    pub units: Vec<usize>,
    pub l2_lambdas: Vec<f64>,
    /// Supplies every field the grid does not vary.
    pub base: MlpConfig,
}

impl Default for GridSpace {
    fn default() -> Self {
        Self {
            hidden_layers: vec![1, 2],
            units: vec![40, 100],
            l2_lambdas: vec![1e-3],
            base: MlpConfig::default(),
        }
    }
}

impl GridSpace {
    pub fn configs(&self) -> Vec<MlpConfig> {
        let mut out = Vec::new();
        for &layers in &self.hidden_layers {
            let shapes: Vec<Vec<usize>> = match layers {
                0 => vec![vec![]],
                1 => self.units.iter().map(|&u| vec![u]).collect(),
                _ => self
                    .units
                    .iter()
                    .flat_map(|&a| self.units.iter().map(move |&b| vec![a, b]))
                    .collect(),
            };
            for shape in shapes {
                for &l2 in &self.l2_lambdas {
                    out.push(MlpConfig {
                        hidden_units: shape.clone(),
                        l2_lambda: l2,
                        ..self.base.clone()
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub config: MlpConfig,
    pub mean_val_acc: f64,
    pub n_params: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best: MlpConfig,
    pub cells: Vec<GridCell>,
}

/// Total order on configs used for the final tie break.
pub fn config_order(a: &MlpConfig, b: &MlpConfig) -> Ordering {
    let f = |x: f64, y: f64| x.total_cmp(&y);
    a.hidden_units
        .cmp(&b.hidden_units)
        .then(f(a.l2_lambda, b.l2_lambda))
        .then(f(a.learning_rate, b.learning_rate))
        .then(a.batch_size.cmp(&b.batch_size))
        .then(a.max_epochs.cmp(&b.max_epochs))
        .then(a.patience.cmp(&b.patience))
        .then(f(a.validation_fraction, b.validation_fraction))
        .then(a.seed.cmp(&b.seed))
}

/// Picks the cell with the highest mean held-out accuracy; ties go to fewer
/// parameters, then to the smaller config under [`config_order`].
pub fn pick_best(cells: &[GridCell]) -> Option<&GridCell> {
    cells.iter().min_by(|a, b| {
        b.mean_val_acc
            .total_cmp(&a.mean_val_acc)
            .then(a.n_params.cmp(&b.n_params))
            .then_with(|| config_order(&a.config, &b.config))
    })
}

/// Exhaustive k-fold grid search over `configs` on one fold split.
pub fn grid_search(
    ds: &Dataset,
    configs: &[MlpConfig],
    k: usize,
    seed: u64,
    mode: FoldMode,
) -> Result<GridSearchResult> {
    if configs.is_empty() {
        return Err(Error::invalid("empty search space"));
    }
    let folds = kfold_split(ds, k, seed, mode)?;
    let cells: Vec<GridCell> = configs
        .par_iter()
        .enumerate()
        .map(|(i, cfg)| {
            let models = train_folds(ds, &folds, cfg).map_err(|e| e.at("grid cell", i))?;
            let eval = evaluate(&models, ds, &folds)?;
            Ok(GridCell {
                config: cfg.clone(),
                mean_val_acc: eval.out_sample_acc,
                n_params: param_count(&cfg.sizes(ds.n_features())),
            })
        })
        .collect::<Result<_>>()?;
    let best = pick_best(&cells).expect("non-empty").config.clone();
    Ok(GridSearchResult { best, cells })
}
