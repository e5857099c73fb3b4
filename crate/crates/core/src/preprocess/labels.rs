use crate::series::{AnnotationSeries, BinaryLabelSeries, RegionTimeSeries};
use crate::{Error, Result};

use super::window::samples_of;

/// Labels a time point positive when at least one annotator rated the target
/// emotion strictly above every other emotion. Ties are not dominant.
pub fn binarize_dominance(
    series: &AnnotationSeries,
    target_emotion: &str,
) -> Result<BinaryLabelSeries> {
    let target = series
        .emotion_index(target_emotion)
        .ok_or_else(|| Error::invalid(format!("unknown emotion {target_emotion:?}")))?;
    let (a_len, t_len, e_len) = (series.n_annotators(), series.n_times(), series.n_emotions());
    let values: Vec<u8> = (0..t_len)
        .map(|t| {
            let dominant = (0..a_len).any(|a| {
                let v = series.get(a, t, target);
                (0..e_len)
                    .filter(|&e| e != target)
                    .all(|e| v > series.get(a, t, e))
            });
            u8::from(dominant)
        })
        .collect();
    BinaryLabelSeries::new(target_emotion, series.tr_seconds, values, vec![true; t_len])
}

/// Shifts the label pairing so feature row `t` pairs with the label at `t − lag`.
pub fn lag_shift(rts: &RegionTimeSeries, lag_s: f64) -> Result<RegionTimeSeries> {
    let steps = samples_of(lag_s, rts.tr_seconds, "lag")?;
    if steps + rts.label_offset >= rts.n_times() {
        return Err(Error::invalid(format!(
            "lag of {lag_s} s leaves no samples in a series of length {}",
            rts.n_times()
        )));
    }
    let mut out = rts.clone();
    out.label_offset += steps;
    Ok(out)
}
