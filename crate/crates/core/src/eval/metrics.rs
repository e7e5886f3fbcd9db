//! Per-epoch metric post-processing: the masking rule for epochs right after
//! a discriminator update and the trailing moving average used for reporting.
//! Originals are kept alongside flags; replacement and smoothing happen on
//! copies.

use crate::error::{S2iError, S2iResult};

#[derive(Clone, Debug, PartialEq)]
pub struct MaskRule {
    /// Epoch offsets after each discriminator-update epoch to replace
    /// (e.g. [1, 2] masks the two following epochs). Empty disables masking.
    pub offsets: Vec<usize>,
    /// How many prior unmasked epochs feed the replacement mean.
    pub lookback: usize,
}

impl MaskRule {
    pub fn disabled() -> Self {
        MaskRule {
            offsets: Vec::new(),
            lookback: 5,
        }
    }

    /// The reporting convention for epoch-cadence discriminator updates:
    /// drop the two epochs right after each update, substituting the mean of
    /// the five prior kept epochs.
    pub fn epoch_cadence() -> Self {
        MaskRule {
            offsets: vec![1, 2],
            lookback: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricSeries {
    /// Original per-epoch values, never overwritten.
    pub values: Vec<f64>,
    /// True where the masking rule replaced the value.
    pub masked: Vec<bool>,
    /// Values after replacement, before smoothing.
    pub processed: Vec<f64>,
    /// Trailing moving average of `processed` over min(window, available).
    pub smoothed: Vec<f64>,
    pub window: usize,
}

/// Applies masking then a trailing moving average. `d_update_epochs` are
/// 1-indexed epochs whose following offsets get masked; series index i holds
/// epoch i+1.
pub fn epoch_metrics(
    values: &[f64],
    window: usize,
    d_update_epochs: &[usize],
    rule: &MaskRule,
) -> S2iResult<MetricSeries> {
    if values.is_empty() {
        return Err(S2iError::Data("metric series is empty".into()));
    }
    if window < 1 {
        return Err(S2iError::Config("moving-average window must be >= 1".into()));
    }

    let n = values.len();
    let mut masked = vec![false; n];
    for &e in d_update_epochs {
        for &off in &rule.offsets {
            let epoch = e + off;
            if epoch >= 1 && epoch <= n {
                masked[epoch - 1] = true;
            }
        }
    }

    let mut processed = values.to_vec();
    for i in 0..n {
        if !masked[i] {
            continue;
        }
        let mut prior = Vec::with_capacity(rule.lookback);
        for j in (0..i).rev() {
            if !masked[j] {
                prior.push(values[j]);
                if prior.len() == rule.lookback {
                    break;
                }
            }
        }
        // No prior unmasked epoch: keep the original, flag stays set.
        if !prior.is_empty() {
            processed[i] = prior.iter().sum::<f64>() / prior.len() as f64;
        }
    }

    // Each window is summed directly; a sliding add/subtract sum would
    // accumulate rounding drift over long series.
    let mut smoothed = Vec::with_capacity(n);
    for i in 0..n {
        let lo = (i + 1).saturating_sub(window);
        let slice = &processed[lo..=i];
        smoothed.push(slice.iter().sum::<f64>() / slice.len() as f64);
    }

    Ok(MetricSeries {
        values: values.to_vec(),
        masked,
        processed,
        smoothed,
        window,
    })
}

/// Mean of the processed series over the 1-indexed inclusive epoch interval,
/// clamped to the available range.
pub fn range_average(series: &MetricSeries, start: usize, end: usize) -> S2iResult<f64> {
    let n = series.processed.len();
    let lo = start.max(1);
    let hi = end.min(n);
    if lo > hi {
        return Err(S2iError::Data(format!(
            "epoch range [{start}, {end}] does not intersect 1..={n}"
        )));
    }
    let slice = &series.processed[lo - 1..hi];
    Ok(slice.iter().sum::<f64>() / slice.len() as f64)
}
