//! Mono WAV adapters. Clips are written as 32-bit float; reading accepts
//! 16-bit PCM and 32-bit float, mono only.

use std::path::Path;

use crate::error::{S2iError, S2iResult};

pub fn write_wav_mono(path: &Path, samples: &[f64], sample_rate: u32) -> S2iResult<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path, spec)
        .map_err(|e| S2iError::format(path.display().to_string(), e.to_string()))?;
    for &s in samples {
        writer
            .write_sample(s as f32)
            .map_err(|e| S2iError::format(path.display().to_string(), e.to_string()))?;
    }
    writer
        .finalize()
        .map_err(|e| S2iError::format(path.display().to_string(), e.to_string()))?;
    Ok(())
}

pub fn read_wav_mono(path: &Path) -> S2iResult<(Vec<f64>, u32)> {
    let mut reader = hound::WavReader::open(path)
        .map_err(|e| S2iError::format(path.display().to_string(), e.to_string()))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(S2iError::format(
            path.display().to_string(),
            format!("expected mono, got {} channels", spec.channels),
        ));
    }
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<Result<_, _>>()
            .map_err(|e| S2iError::format(path.display().to_string(), e.to_string()))?,
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<Result<_, _>>()
            .map_err(|e| S2iError::format(path.display().to_string(), e.to_string()))?,
        (fmt, bits) => {
            return Err(S2iError::format(
                path.display().to_string(),
                format!("unsupported sample format {fmt:?}/{bits}-bit"),
            ))
        }
    };
    Ok((samples, spec.sample_rate))
}
