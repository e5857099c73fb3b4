use crate::{Error, Result};

use super::Explanation;

/// Largest player count accepted by [`shapley_exact`].
pub const MAX_EXACT_PLAYERS: usize = 20;

/// A cooperative game over `M` players.
///
/// Coalitions are passed as row-major `n × M` boolean masks so that
/// implementations can evaluate many coalitions in one batch.
pub trait CoalitionGame {
    fn n_players(&self) -> usize;
    fn values(&mut self, masks: &[bool], n: usize) -> Result<Vec<f64>>;
}

/// Game given by a closure over one mask.
pub struct FnGame<F> {
    m: usize,
    f: F,
}

impl<F: FnMut(&[bool]) -> f64> FnGame<F> {
    pub fn new(m: usize, f: F) -> Self {
        Self { m, f }
    }
}

impl<F: FnMut(&[bool]) -> f64> CoalitionGame for FnGame<F> {
    fn n_players(&self) -> usize {
        self.m
    }

    fn values(&mut self, masks: &[bool], n: usize) -> Result<Vec<f64>> {
        Ok(masks
            .chunks_exact(self.m)
            .take(n)
            .map(|c| (self.f)(c))
            .collect())
    }
}

/// Game given by a full value table indexed by the coalition bitmask
/// (bit `i` set when player `i` is present).
#[derive(Debug, Clone, PartialEq)]
pub struct TableGame {
    m: usize,
    table: Vec<f64>,
}

impl TableGame {
    pub fn new(m: usize, table: Vec<f64>) -> Result<Self> {
        if m > MAX_EXACT_PLAYERS || table.len() != 1 << m {
            return Err(Error::invalid(format!(
                "a {m}-player table needs 2^{m} entries"
            )));
        }
        Ok(Self { m, table })
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }
}

impl CoalitionGame for TableGame {
    fn n_players(&self) -> usize {
        self.m
    }

    fn values(&mut self, masks: &[bool], n: usize) -> Result<Vec<f64>> {
        Ok(masks
            .chunks_exact(self.m)
            .take(n)
            .map(|c| self.table[mask_to_bits(c)])
            .collect())
    }
}

pub(crate) fn mask_to_bits(mask: &[bool]) -> usize {
    mask.iter()
        .enumerate()
        .fold(0, |acc, (i, &b)| acc | (usize::from(b) << i))
}

pub(crate) fn bits_to_mask(bits: usize, m: usize, out: &mut Vec<bool>) {
    out.extend((0..m).map(|i| bits >> i & 1 == 1));
}

/// Exact Shapley values by full enumeration of the `2^M` coalitions.
pub fn shapley_exact<G: CoalitionGame + ?Sized>(game: &mut G) -> Result<Explanation> {
    let m = game.n_players();
    if m == 0 {
        return Err(Error::invalid("game has no players"));
    }
    if m > MAX_EXACT_PLAYERS {
        return Err(Error::invalid(format!(
            "{m} players is too many for exact enumeration (limit {MAX_EXACT_PLAYERS}); use kernel_shap"
        )));
    }
    let n = 1usize << m;
    let mut masks = Vec::with_capacity(n * m);
    for bits in 0..n {
        bits_to_mask(bits, m, &mut masks);
    }
    let v = game.values(&masks, n)?;
    // |S|!(M−|S|−1)!/M! for |S| = 0..M−1
    let mut weight = vec![0.0; m];
    for (s, w) in weight.iter_mut().enumerate() {
        *w = 1.0 / (m as f64 * binomial(m - 1, s));
    }
    let mut phi = vec![0.0; m];
    for bits in 0..n {
        let s = bits.count_ones() as usize;
        for (i, p) in phi.iter_mut().enumerate() {
            if bits >> i & 1 == 0 {
                *p += weight[s] * (v[bits | 1 << i] - v[bits]);
            }
        }
    }
    Ok(Explanation {
        method: "shapley_exact".into(),
        base_value: v[0],
        phi,
        n_samples: n,
        seed: None,
    })
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
