use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::network::{bce_with_logit, sigmoid, Network};
use crate::preprocess::Dataset;
use crate::{rng, Error, Result};

/// Decoder hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    /// Units per hidden layer. Grid search produces one or two layers; an
    /// empty list gives plain logistic regression.
    pub hidden_units: Vec<usize>,
    pub l2_lambda: f64,
    pub learning_rate: f64,
    /// Rows per Adam step; 0 means full batch.
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Share of training rows held out for early stopping; 0 disables it.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden_units: vec![40],
            l2_lambda: 1e-3,
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 200,
            patience: 10,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_units.len() > 2 {
            return Err(Error::invalid("at most two hidden layers are supported"));
        }
        if self.hidden_units.contains(&0) {
            return Err(Error::invalid("hidden layers need at least one unit"));
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return Err(Error::invalid("l2_lambda must be finite and non-negative"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if !(0.0..0.5).contains(&self.validation_fraction) {
            return Err(Error::invalid("validation_fraction must lie in [0, 0.5)"));
        }
        if self.max_epochs == 0 {
            return Err(Error::invalid("max_epochs must be positive"));
        }
        Ok(())
    }

    /// Layer sizes for `n_inputs` features.
    pub fn sizes(&self, n_inputs: usize) -> Vec<usize> {
        let mut s = vec![n_inputs];
        s.extend(&self.hidden_units);
        s.push(1);
        s
    }
}

/// Per-feature affine standardization fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn identity(n: usize) -> Self {
        Self {
            mean: vec![0.0; n],
            scale: vec![1.0; n],
        }
    }

    /// Mean and population standard deviation; constant features get scale 1.
    pub fn fit(x: &[f64], n_cols: usize) -> Self {
        let n = x.len() / n_cols;
        let mut mean = vec![0.0; n_cols];
        for row in x.chunks_exact(n_cols) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; n_cols];
        for row in x.chunks_exact(n_cols) {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n as f64).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn apply(&self, x: &mut [f64]) {
        let n_cols = self.mean.len();
        for row in x.chunks_exact_mut(n_cols) {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.scale) {
                *v = (*v - m) / s;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training objective (cross-entropy plus penalty) over the epoch's batches.
    pub train_loss: f64,
    /// Cross-entropy on the held-out rows, absent without early stopping.
    pub val_loss: Option<f64>,
}

/// A trained decoder: standardizer, network and training history.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub config: MlpConfig,
    pub standardizer: Standardizer,
    pub network: Network,
    pub history: Vec<EpochRecord>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
}

impl MlpModel {
    pub fn n_features(&self) -> usize {
        self.network.n_inputs()
    }

    /// Positive-class probabilities for `n` row-major rows in raw feature units.
    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let m = self.n_features();
        assert_eq!(x.len() % m, 0, "row length mismatch");
        let mut z = x.to_vec();
        self.standardizer.apply(&mut z);
        self.network
            .logits(&z, x.len() / m)
            .into_iter()
            .map(sigmoid)
            .collect()
    }

    /// Probability for a single feature vector.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                actual: x.len(),
            });
        }
        Ok(self.predict_proba(x)[0])
    }

    pub fn predict_dataset(&self, ds: &Dataset) -> Vec<f64> {
        self.predict_proba(&ds.features().to_f64())
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = Self::B1 * *m + (1.0 - Self::B1) * g;
            *v = Self::B2 * *v + (1.0 - Self::B2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        }
    }
}

fn gather(x: &[f64], n_cols: usize, rows: &[usize], out: &mut Vec<f64>) {
    out.clear();
    for &r in rows {
        out.extend_from_slice(&x[r * n_cols..(r + 1) * n_cols]);
    }
}

fn mean_bce(net: &Network, x: &[f64], y: &[f64]) -> f64 {
    let logits = net.logits(x, y.len());
    logits
        .iter()
        .zip(y)
        .map(|(&z, &t)| bce_with_logit(z, t))
        .sum::<f64>()
        / y.len() as f64
}

/// Trains one decoder on every row of `ds`.
///
/// A seeded `validation_fraction` of the rows is held out; training stops
/// after `patience` epochs without a lower validation cross-entropy and the
/// best epoch's parameters are restored.
pub fn train(ds: &Dataset, config: &MlpConfig) -> Result<MlpModel> {
    config.validate()?;
    let n = ds.n_rows();
    let m = ds.n_features();
    if n < 2 {
        return Err(Error::invalid("need at least two rows to train"));
    }
    let mut rng = rng::substream(config.seed, &[0x7472_6169_6e]);
    let x_raw = ds.features().to_f64();
    let y_all: Vec<f64> = ds.labels().iter().map(|&l| f64::from(l)).collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_val = ((n as f64) * config.validation_fraction).round() as usize;
    let n_val = if n_val == 0 || n - n_val < 1 {
        0
    } else {
        n_val
    };
    let (val_rows, train_rows) = order.split_at(n_val);
    let mut train_rows = train_rows.to_vec();
    let mut val_rows = val_rows.to_vec();
    train_rows.sort_unstable();
    val_rows.sort_unstable();

    let mut train_x = Vec::new();
    gather(&x_raw, m, &train_rows, &mut train_x);
    let standardizer = Standardizer::fit(&train_x, m);
    let mut x = x_raw;
    standardizer.apply(&mut x);
    gather(&x, m, &train_rows, &mut train_x);
    let train_y: Vec<f64> = train_rows.iter().map(|&r| y_all[r]).collect();
    let mut val_x = Vec::new();
    gather(&x, m, &val_rows, &mut val_x);
    let val_y: Vec<f64> = val_rows.iter().map(|&r| y_all[r]).collect();

    let mut net = Network::init(
        config.sizes(m),
        rng::derive_seed(config.seed, &[0x696e_6974]),
    );
    let mut adam = Adam::new(net.params().len(), config.learning_rate);
    let mut grad = vec![0.0; net.params().len()];
    let n_train = train_rows.len();
    let batch = if config.batch_size == 0 {
        n_train
    } else {
        config.batch_size.min(n_train)
    };

    let mut history = Vec::new();
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let mut since_best = 0;
    let mut perm: Vec<usize> = (0..n_train).collect();
    let mut bx = Vec::with_capacity(batch * m);
    let mut by = Vec::with_capacity(batch);
    for epoch in 0..config.max_epochs {
        if batch < n_train {
            perm.shuffle(&mut rng);
        }
        let mut loss_sum = 0.0;
        let mut n_batches = 0;
        for (b, rows) in perm.chunks(batch).enumerate() {
            gather(&train_x, m, rows, &mut bx);
            by.clear();
            by.extend(rows.iter().map(|&r| train_y[r]));
            let loss = net.loss_grad(&bx, &by, rows.len(), config.l2_lambda, &mut grad);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            adam.step(net.params_mut(), &grad);
            loss_sum += loss;
            n_batches += 1;
        }
        let val_loss = (!val_y.is_empty()).then(|| mean_bce(&net, &val_x, &val_y));
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / n_batches as f64,
            val_loss,
        });
        if let Some(vl) = val_loss {
            if !vl.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: n_batches,
                });
            }
            if best.as_ref().is_none_or(|(b, _, _)| vl < *b) {
                best = Some((vl, epoch, net.params().to_vec()));
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= config.patience {
                    break;
                }
            }
        }
    }
    let best_epoch = match best {
        Some((_, epoch, params)) => {
            net.params_mut().copy_from_slice(&params);
            epoch
        }
        None => history.len() - 1,
    };
    Ok(MlpModel {
        config: config.clone(),
        standardizer,
        network: net,
        history,
        best_epoch,
    })
}
