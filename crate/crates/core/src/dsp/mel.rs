//! Triangular Mel filterbank on the HTK mel scale.
//!
//! Band edges are spaced uniformly in mel between `mel_fmin` and `mel_fmax`;
//! each band is a triangle in linear frequency evaluated at the FFT bin
//! centers, peaking at 1 at its center edge. Construction fails if any band
//! would capture no energy (all-zero row), which happens when the FFT
//! resolution is too coarse for the requested band density.

use crate::error::{S2iError, S2iResult};

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

#[derive(Clone, Debug)]
pub struct MelFilterbank {
    pub n_mels: usize,
    pub n_bins: usize,
    /// Row-major [n_mels, n_bins] triangle weights.
    pub weights: Vec<f64>,
    /// Band center frequencies in Hz, one per row.
    pub centers_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn build(
        sample_rate: u32,
        fft_size: usize,
        n_mels: usize,
        fmin: f64,
        fmax: f64,
    ) -> S2iResult<Self> {
        if n_mels == 0 {
            return Err(S2iError::Config("n_mels must be positive".into()));
        }
        let nyquist = sample_rate as f64 / 2.0;
        if !(0.0..nyquist).contains(&fmin) || fmax <= fmin || fmax > nyquist {
            return Err(S2iError::Config(format!(
                "mel range [{fmin}, {fmax}] invalid for nyquist {nyquist}"
            )));
        }
        let n_bins = fft_size / 2 + 1;
        let mel_lo = hz_to_mel(fmin);
        let mel_hi = hz_to_mel(fmax);
        // n_mels + 2 edges: left, center, right per band, shared with neighbors
        let edges_hz: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_mels + 1) as f64))
            .collect();

        let bin_hz = sample_rate as f64 / fft_size as f64;
        let mut weights = vec![0.0f64; n_mels * n_bins];
        for m in 0..n_mels {
            let (left, center, right) = (edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]);
            let mut any = false;
            for k in 0..n_bins {
                let f = k as f64 * bin_hz;
                let w = if f <= left || f >= right {
                    0.0
                } else if f <= center {
                    (f - left) / (center - left)
                } else {
                    (right - f) / (right - center)
                };
                if w > 0.0 {
                    any = true;
                }
                weights[m * n_bins + k] = w;
            }
            if !any {
                return Err(S2iError::Config(format!(
                    "mel band {m} (center {:.1} Hz) captures no FFT bin; \
                     raise fft_size or lower n_mels",
                    center
                )));
            }
        }
        Ok(MelFilterbank {
            n_mels,
            n_bins,
            weights,
            centers_hz: edges_hz[1..=n_mels].to_vec(),
        })
    }

    /// Band energies for one power-spectrum row.
    pub fn apply(&self, power: &[f64]) -> S2iResult<Vec<f64>> {
        if power.len() != self.n_bins {
            return Err(S2iError::shape(
                "mel filterbank apply",
                format!("{} bins", self.n_bins),
                format!("{} bins", power.len()),
            ));
        }
        Ok((0..self.n_mels)
            .map(|m| {
                let row = &self.weights[m * self.n_bins..(m + 1) * self.n_bins];
                row.iter().zip(power.iter()).map(|(w, p)| w * p).sum()
            })
            .collect())
    }
}
