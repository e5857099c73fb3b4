use serde::{Deserialize, Serialize};

use super::NullDistribution;
use crate::series::AttributionMap;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionSignificance {
    pub p: f64,
    pub significant: bool,
}

/// One-sided plus-one permutation p-value: `(1 + #{null ≥ observed}) / (1 + n)`.
pub fn permutation_p(observed: f64, null: &[f64]) -> f64 {
    let ge = null.iter().filter(|&&v| v >= observed).count();
    (1 + ge) as f64 / (1 + null.len()) as f64
}

pub fn significance(
    map: &AttributionMap,
    null: &NullDistribution,
    alpha: f64,
) -> Result<Vec<RegionSignificance>> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha {alpha} outside [0, 1]")));
    }
    let r = map.region_scores.len();
    if null.n_regions() != r {
        return Err(Error::DimensionMismatch {
            expected: r,
            actual: null.n_regions(),
        });
    }
    Ok((0..r)
        .map(|i| {
            let p = permutation_p(map.region_scores[i], &null.region(i));
            RegionSignificance {
                p,
                significant: p <= alpha,
            }
        })
        .collect())
}
