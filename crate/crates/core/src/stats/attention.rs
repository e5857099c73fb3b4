use super::rank::spearman;
use crate::{Error, Result, Tensor};

/// Fewest frames with both an overlap score and attributions.
pub const MIN_ALIGNED_FRAMES: usize = 10;

/// Nearest TR for each frame after the hemodynamic lag: `round((t + lag)/tr)`.
/// Frames past the end of the scan map to `None`.
pub fn frame_tr_indices(
    frame_times: &[f64],
    lag_s: f64,
    tr: f64,
    n_trs: usize,
) -> Vec<Option<usize>> {
    frame_times
        .iter()
        .map(|&t| {
            let k = ((t + lag_s) / tr).round();
            (k >= 0.0 && (k as usize) < n_trs).then_some(k as usize)
        })
        .collect()
}

/// Attribution rows for each frame. `row_t_index[i]` is the TR of row `i` of
/// `attr`; frames whose TR has no row get a zero row and `false` in the mask.
pub fn gather_rows(
    attr: &Tensor,
    row_t_index: &[usize],
    frame_trs: &[Option<usize>],
) -> Result<(Tensor, Vec<bool>)> {
    let (n, r) = attr.shape2()?;
    if row_t_index.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: row_t_index.len(),
        });
    }
    let lookup: std::collections::HashMap<usize, usize> = row_t_index
        .iter()
        .enumerate()
        .map(|(i, &t)| (t, i))
        .collect();
    let mut out = vec![0f32; frame_trs.len() * r];
    let mut present = vec![false; frame_trs.len()];
    for (f, tr) in frame_trs.iter().enumerate() {
        if let Some(&row) = tr.and_then(|t| lookup.get(&t)) {
            out[f * r..(f + 1) * r].copy_from_slice(attr.row(row));
            present[f] = true;
        }
    }
    Ok((Tensor::new(vec![frame_trs.len(), r], out)?, present))
}

/// Per-region Spearman correlation between frame overlap scores and the
/// region's attribution at each frame. Frames with a `None` overlap are
/// dropped; a constant column yields NaN.
pub fn attention_correlation_map(overlaps: &[Option<f64>], attr: &Tensor) -> Result<Vec<f64>> {
    let (n, r) = attr.shape2()?;
    if overlaps.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: overlaps.len(),
        });
    }
    let kept: Vec<(usize, f64)> = overlaps
        .iter()
        .enumerate()
        .filter_map(|(i, o)| o.map(|v| (i, v)))
        .collect();
    if kept.len() < MIN_ALIGNED_FRAMES {
        return Err(Error::invalid(format!(
            "{} aligned frames; at least {MIN_ALIGNED_FRAMES} are needed",
            kept.len()
        )));
    }
    let y: Vec<f64> = kept.iter().map(|&(_, v)| v).collect();
    let mut col = vec![0.0; kept.len()];
    (0..r)
        .map(|c| {
            for (slot, &(i, _)) in col.iter_mut().zip(&kept) {
                *slot = f64::from(attr.get2(i, c));
            }
            spearman(&y, &col).map_err(|e| e.at("region", c))
        })
        .collect()
}
