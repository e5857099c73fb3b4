use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::series::{BinaryLabelSeries, RegionTimeSeries};
use crate::{rng, Error, Result, Tensor};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub subject: String,
    pub t_index: usize,
}

/// Labeled feature rows, `N × R`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Tensor,
    labels: Vec<u8>,
    provenance: Vec<Provenance>,
    pub seed_used: Option<u64>,
}

impl Dataset {
    pub fn new(features: Tensor, labels: Vec<u8>, provenance: Vec<Provenance>) -> Result<Self> {
        let (n, _) = features.shape2()?;
        if labels.len() != n || provenance.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: labels.len().min(provenance.len()),
            });
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::invalid("labels must be 0 or 1"));
        }
        Ok(Self {
            features,
            labels,
            provenance,
            seed_used: None,
        })
    }

    /// Builds a dataset from flat row-major values; provenance is the row
    /// position under `subject`.
    pub fn from_rows(subject: &str, x: &[f64], n_cols: usize, labels: Vec<u8>) -> Result<Self> {
        let n = labels.len();
        let prov = (0..n)
            .map(|t| Provenance {
                subject: subject.to_string(),
                t_index: t,
            })
            .collect();
        Self::new(Tensor::from_f64(vec![n, n_cols], x)?, labels, prov)
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.dims()[1]
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn row(&self, i: usize) -> &[f32] {
        self.features.row(i)
    }

    /// `(negatives, positives)`.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&l| l == 1).count();
        (self.labels.len() - pos, pos)
    }

    /// Rows `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let r = self.n_features();
        let mut data = Vec::with_capacity(indices.len() * r);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        let mut out = Self::new(
            Tensor::new(vec![indices.len().max(1), r], data)
                .map_err(|_| Error::invalid("empty selection"))?,
            indices.iter().map(|&i| self.labels[i]).collect(),
            indices
                .iter()
                .map(|&i| self.provenance[i].clone())
                .collect(),
        )?;
        out.seed_used = self.seed_used;
        Ok(out)
    }

    pub fn with_labels(&self, labels: Vec<u8>) -> Result<Self> {
        let mut out = Self::new(self.features.clone(), labels, self.provenance.clone())?;
        out.seed_used = self.seed_used;
        Ok(out)
    }

    /// Concatenates datasets with the same feature count (e.g. several subjects).
    pub fn concat(parts: &[Dataset]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::invalid("nothing to concatenate"))?;
        let r = first.n_features();
        let mut data = Vec::new();
        let mut labels = Vec::new();
        let mut prov = Vec::new();
        for p in parts {
            if p.n_features() != r {
                return Err(Error::DimensionMismatch {
                    expected: r,
                    actual: p.n_features(),
                });
            }
            data.extend_from_slice(p.features.data());
            labels.extend_from_slice(&p.labels);
            prov.extend_from_slice(&p.provenance);
        }
        Self::new(Tensor::new(vec![labels.len(), r], data)?, labels, prov)
    }
}

/// Pairs feature rows with labels, honouring the series' label offset and the
/// label mask. Rows without a usable label are dropped.
pub fn build_dataset(rts: &RegionTimeSeries, labels: &BinaryLabelSeries) -> Result<Dataset> {
    if (labels.tr_seconds - rts.tr_seconds).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "labels sampled every {} s but features every {} s; resample first",
            labels.tr_seconds, rts.tr_seconds
        )));
    }
    let r = rts.n_regions();
    let mut data = Vec::new();
    let mut ys = Vec::new();
    let mut prov = Vec::new();
    for t in rts.label_offset..rts.n_times() {
        if let Some(y) = labels.get(t - rts.label_offset) {
            data.extend_from_slice(rts.values().row(t));
            ys.push(y);
            prov.push(Provenance {
                subject: rts.subject_id.clone(),
                t_index: t,
            });
        }
    }
    if ys.is_empty() {
        return Err(Error::invalid("no usable labelled rows"));
    }
    Dataset::new(Tensor::new(vec![ys.len(), r], data)?, ys, prov)
}

/// Subsamples the majority class down to the minority count, then shuffles
/// the rows. Both steps draw from one stream seeded by `seed`.
pub fn undersample(ds: &Dataset, seed: u64) -> Result<Dataset> {
    let (neg, pos): (Vec<usize>, Vec<usize>) = {
        let mut neg = Vec::new();
        let mut pos = Vec::new();
        for (i, &l) in ds.labels().iter().enumerate() {
            if l == 1 {
                pos.push(i)
            } else {
                neg.push(i)
            }
        }
        (neg, pos)
    };
    if neg.is_empty() || pos.is_empty() {
        return Err(Error::invalid(format!(
            "cannot balance: {} negatives, {} positives",
            neg.len(),
            pos.len()
        )));
    }
    let mut rng = rng::stream(seed);
    let (minority, majority) = if pos.len() <= neg.len() {
        (pos, neg)
    } else {
        (neg, pos)
    };
    let mut picked: Vec<usize> = index::sample(&mut rng, majority.len(), minority.len())
        .into_iter()
        .map(|k| majority[k])
        .collect();
    picked.sort_unstable();
    let mut rows = minority;
    rows.extend(picked);
    rows.sort_unstable();
    rows.shuffle(&mut rng);
    let mut out = ds.select(&rows)?;
    out.seed_used = Some(seed);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FoldMode {
    #[default]
    Shuffled,
    Blocked,
}

/// Fold id per dataset row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub k: usize,
    pub assignments: Vec<usize>,
}

impl FoldSplit {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Assigns rows to `k` folds.
///
/// `Shuffled` permutes rows with the seeded stream and deals them round-robin.
/// `Blocked` cuts each subject's rows, ordered by time, into `k` contiguous
/// runs; the runs that get one extra row rotate across subjects so overall
/// fold sizes still differ by at most one.
pub fn kfold_split(ds: &Dataset, k: usize, seed: u64, mode: FoldMode) -> Result<FoldSplit> {
    let n = ds.n_rows();
    if k < 2 {
        return Err(Error::invalid("need at least two folds"));
    }
    if n < k {
        return Err(Error::invalid(format!("{n} rows cannot fill {k} folds")));
    }
    let mut assignments = vec![0usize; n];
    match mode {
        FoldMode::Shuffled => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng::stream(seed));
            for (pos, &row) in order.iter().enumerate() {
                assignments[row] = pos % k;
            }
        }
        FoldMode::Blocked => {
            let mut subjects: Vec<&str> =
                ds.provenance().iter().map(|p| p.subject.as_str()).collect();
            subjects.sort_unstable();
            subjects.dedup();
            let mut extra_start = 0;
            for subject in subjects {
                let mut rows: Vec<usize> = (0..n)
                    .filter(|&i| ds.provenance()[i].subject == subject)
                    .collect();
                rows.sort_by_key(|&i| (ds.provenance()[i].t_index, i));
                let base = rows.len() / k;
                let rem = rows.len() % k;
                let mut sizes = vec![base; k];
                for i in 0..rem {
                    sizes[(extra_start + i) % k] += 1;
                }
                extra_start = (extra_start + rem) % k;
                let mut cursor = 0;
                for (fold, &size) in sizes.iter().enumerate() {
                    for &row in &rows[cursor..cursor + size] {
                        assignments[row] = fold;
                    }
                    cursor += size;
                }
            }
        }
    }
    Ok(FoldSplit { k, assignments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy(n_pos: usize, n_neg: usize) -> Dataset {
        let n = n_pos + n_neg;
        let data: Vec<f32> = (0..n * 2).map(|v| v as f32).collect();
        let labels: Vec<u8> = (0..n).map(|i| u8::from(i < n_pos)).collect();
        let prov = (0..n)
            .map(|i| Provenance {
                subject: "s1".into(),
                t_index: i,
            })
            .collect();
        Dataset::new(Tensor::new(vec![n, 2], data).unwrap(), labels, prov).unwrap()
    }

    #[test]
    fn undersample_balances() {
        let out = undersample(&toy(70, 30), 1).unwrap();
        assert_eq!(out.class_counts(), (30, 30));
        assert_eq!(out.seed_used, Some(1));
    }

    #[test]
    fn undersample_keeps_balanced_rows() {
        let ds = toy(10, 10);
        let out = undersample(&ds, 4).unwrap();
        let mut a: Vec<usize> = out.provenance().iter().map(|p| p.t_index).collect();
        a.sort_unstable();
        assert_eq!(a, (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn undersample_is_deterministic() {
        let ds = toy(50, 13);
        assert_eq!(undersample(&ds, 9).unwrap(), undersample(&ds, 9).unwrap());
        assert!(undersample(&toy(5, 0), 9).is_err());
    }

    #[test]
    fn ten_rows_five_folds() {
        let split = kfold_split(&toy(5, 5), 5, 3, FoldMode::Shuffled).unwrap();
        assert_eq!(split.fold_sizes(), vec![2; 5]);
        assert_eq!(
            split,
            kfold_split(&toy(5, 5), 5, 3, FoldMode::Shuffled).unwrap()
        );
        assert!(kfold_split(&toy(2, 2), 5, 3, FoldMode::Shuffled).is_err());
    }

    #[test]
    fn blocked_folds_are_contiguous() {
        let split = kfold_split(&toy(11, 12), 5, 0, FoldMode::Blocked).unwrap();
        for f in 0..5 {
            let idx = split.test_indices(f);
            assert!(
                idx.windows(2).all(|w| w[1] == w[0] + 1),
                "fold {f}: {idx:?}"
            );
        }
    }

    #[test]
    fn build_respects_offset_and_mask() {
        let rts = RegionTimeSeries::new(
            "s",
            2.0,
            Tensor::from_f64(vec![4, 1], &[0.0, 1.0, 2.0, 3.0]).unwrap(),
        )
        .unwrap();
        let rts = crate::preprocess::lag_shift(&rts, 2.0).unwrap();
        let labels =
            BinaryLabelSeries::new("x", 2.0, vec![1, 0, 1, 1], vec![true, false, true, true])
                .unwrap();
        let ds = build_dataset(&rts, &labels).unwrap();
        // rows 1..4 pair with labels 0..3; label 1 is masked
        assert_eq!(ds.labels(), &[1, 1]);
        assert_eq!(
            ds.provenance()
                .iter()
                .map(|p| p.t_index)
                .collect::<Vec<_>>(),
            vec![1, 3]
        );
        assert_eq!(ds.row(1), &[3.0]);
    }

    proptest! {
        #[test]
        fn folds_partition_rows(n_pos in 1usize..30, n_neg in 1usize..30, k in 2usize..6, seed in any::<u64>(), blocked in any::<bool>()) {
            prop_assume!(n_pos + n_neg >= k);
            let ds = toy(n_pos, n_neg);
            let mode = if blocked { FoldMode::Blocked } else { FoldMode::Shuffled };
            let split = kfold_split(&ds, k, seed, mode).unwrap();
            let sizes = split.fold_sizes();
            prop_assert_eq!(sizes.iter().sum::<usize>(), ds.n_rows());
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }

        #[test]
        fn undersample_rows_come_from_input(n_pos in 1usize..40, n_neg in 1usize..40, seed in any::<u64>()) {
            let ds = toy(n_pos, n_neg);
            let out = undersample(&ds, seed).unwrap();
            let (a, b) = out.class_counts();
            prop_assert_eq!(a, b);
            for i in 0..out.n_rows() {
                let t = out.provenance()[i].t_index;
                prop_assert_eq!(out.row(i), ds.row(t));
                prop_assert_eq!(out.labels()[i], ds.labels()[t]);
            }
        }
    }
}
