use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rank::spearman;
use crate::atlas::{Atlas, Hemisphere};
use crate::{rng, Error, Result};

pub const DEFAULT_N_PERM: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinResult {
    pub rho: f64,
    pub p: f64,
    pub n_perm: usize,
    pub seed: u64,
}

/// Precomputed spin reassignments for one atlas.
///
/// Permutation `k` maps each region to the region whose rotated position is
/// nearest, so `spun[i] = map[perm[i]]`. Rotations are uniform on SO(3)
/// (normalized Gaussian quaternions); the right hemisphere uses the x-mirror
/// of the left rotation.
#[derive(Debug, Clone)]
pub struct SpinNull {
    perms: Vec<Vec<usize>>,
    pub seed: u64,
}

impl SpinNull {
    pub fn new(atlas: &Atlas, n_perm: usize, seed: u64) -> Result<Self> {
        if n_perm == 0 {
            return Err(Error::invalid("need at least one spin permutation"));
        }
        let mut left = Vec::new();
        let mut right = Vec::new();
        let mut sub = Vec::new();
        for r in atlas.regions() {
            let c = || {
                r.sphere_coord
                    .map(|c| (r.id, Vector3::from(c)))
                    .ok_or_else(|| {
                        Error::invalid(format!(
                            "region {} ({}) has no sphere coordinates",
                            r.id, r.name
                        ))
                    })
            };
            match r.hemisphere {
                Hemisphere::Left => left.push(c()?),
                Hemisphere::Right => right.push(c()?),
                Hemisphere::Subcortical => sub.push(r.id),
            }
        }
        let mirror = Matrix3::from_diagonal(&Vector3::new(-1.0, 1.0, 1.0));
        let perms = (0..n_perm)
            .into_par_iter()
            .map(|k| {
                let mut rng = rng::substream(seed, &[k as u64]);
                let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
                let rot = UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]))
                    .to_rotation_matrix()
                    .into_inner();
                let mut perm: Vec<usize> = (0..atlas.len()).collect();
                reassign(&left, &rot, &mut perm);
                reassign(&right, &(mirror * rot * mirror), &mut perm);
                let mut shuffled = sub.clone();
                shuffled.shuffle(&mut rng);
                for (&to, &from) in sub.iter().zip(&shuffled) {
                    perm[to] = from;
                }
                perm
            })
            .collect();
        Ok(Self { perms, seed })
    }

    pub fn n_perm(&self) -> usize {
        self.perms.len()
    }

    pub fn perms(&self) -> &[Vec<usize>] {
        &self.perms
    }

    /// Spearman correlation with a two-sided spin p-value. The map that sorts
    /// first is the one rotated, so swapping the arguments changes nothing.
    pub fn test(&self, a: &[f64], b: &[f64]) -> Result<SpinResult> {
        let n = self.perms[0].len();
        for m in [a, b] {
            if m.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: m.len(),
                });
            }
        }
        let rho = spearman(a, b)?;
        if rho.is_nan() {
            return Err(Error::invalid("spin test on a constant map"));
        }
        let (spun, fixed) = if a
            .iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .is_some_and(|o| o.is_gt())
        {
            (b, a)
        } else {
            (a, b)
        };
        let hits = self
            .perms
            .par_iter()
            .map_init(
                || vec![0.0; n],
                |buf, perm| -> Result<bool> {
                    for (v, &j) in buf.iter_mut().zip(perm) {
                        *v = spun[j];
                    }
                    let r = spearman(buf, fixed)?;
                    // a spin that collapses the map to a constant cannot beat rho
                    Ok(!r.is_nan() && r.abs() >= rho.abs())
                },
            )
            .collect::<Result<Vec<bool>>>()?
            .into_iter()
            .filter(|&h| h)
            .count();
        Ok(SpinResult {
            rho,
            p: (1 + hits) as f64 / (1 + self.n_perm()) as f64,
            n_perm: self.n_perm(),
            seed: self.seed,
        })
    }
}

fn reassign(regions: &[(usize, Vector3<f64>)], rot: &Matrix3<f64>, perm: &mut [usize]) {
    let rotated: Vec<Vector3<f64>> = regions.iter().map(|(_, c)| rot * c).collect();
    for (id, c) in regions {
        // nearest on the unit sphere = largest dot product
        let mut best = 0;
        let mut best_dot = f64::NEG_INFINITY;
        for (k, r) in rotated.iter().enumerate() {
            let d = r.dot(c);
            if d > best_dot {
                best_dot = d;
                best = k;
            }
        }
        perm[*id] = regions[best].0;
    }
}

pub fn spin_test(
    a: &[f64],
    b: &[f64],
    atlas: &Atlas,
    n_perm: usize,
    seed: u64,
) -> Result<SpinResult> {
    SpinNull::new(atlas, n_perm, seed)?.test(a, b)
}
