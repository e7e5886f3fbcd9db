//! Spectrogram binary format.
//!
//! Layout: magic "S2IS", version u32, rows u32, cols u32, normalized u8,
//! then rows*cols f32 values little-endian, row-major. Values are stored at
//! f32; a spectrogram loaded from disk and written back is byte-identical.
//! Normalization min/max live in a decimal-text sidecar next to the dataset.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::dsp::{NormStats, Spectrogram};
use crate::error::{S2iError, S2iResult};

const MAGIC: &[u8; 4] = b"S2IS";
const VERSION: u32 = 1;

pub fn write_spectrogram(path: &Path, spec: &Spectrogram) -> S2iResult<()> {
    let mut buf = Vec::with_capacity(17 + spec.data.len() * 4);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(spec.rows as u32).to_le_bytes());
    buf.extend_from_slice(&(spec.cols as u32).to_le_bytes());
    buf.push(spec.normalized as u8);
    for &v in &spec.data {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| S2iError::io(path.display().to_string(), e))
}

pub fn read_spectrogram(path: &Path) -> S2iResult<Spectrogram> {
    let p = path.display().to_string();
    let mut file = fs::File::open(path).map_err(|e| S2iError::io(p.clone(), e))?;
    let mut header = [0u8; 17];
    file.read_exact(&mut header)
        .map_err(|_| S2iError::format(p.clone(), "truncated header"))?;
    if &header[..4] != MAGIC {
        return Err(S2iError::format(p, "bad magic, not a spectrogram file"));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(S2iError::format(p, format!("unsupported version {version}")));
    }
    let rows = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    let normalized = match header[16] {
        0 => false,
        1 => true,
        other => return Err(S2iError::format(p, format!("bad normalized flag {other}"))),
    };
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| S2iError::format(p.clone(), "dimension overflow"))?;
    let mut payload = vec![0u8; n * 4];
    file.read_exact(&mut payload)
        .map_err(|_| S2iError::format(p.clone(), "truncated payload"))?;
    let mut tail = [0u8; 1];
    if file.read(&mut tail).map_err(|e| S2iError::io(p.clone(), e))? != 0 {
        return Err(S2iError::format(p, "trailing bytes after payload"));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Spectrogram::new(rows, cols, data, normalized)
}

/// Decimal text, full round-trip precision: "min <v>\nmax <v>\n".
pub fn write_norm_stats(path: &Path, stats: NormStats) -> S2iResult<()> {
    let mut f = fs::File::create(path).map_err(|e| S2iError::io(path.display().to_string(), e))?;
    write!(f, "min {}\nmax {}\n", stats.min, stats.max)
        .map_err(|e| S2iError::io(path.display().to_string(), e))
}

pub fn read_norm_stats(path: &Path) -> S2iResult<NormStats> {
    let p = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| S2iError::io(p.clone(), e))?;
    let mut min = None;
    let mut max = None;
    for line in text.lines() {
        let mut parts = line.split_whitespace();
        match (parts.next(), parts.next()) {
            (Some("min"), Some(v)) => {
                min = Some(v.parse::<f64>().map_err(|_| {
                    S2iError::format(p.clone(), format!("bad min value {v:?}"))
                })?)
            }
            (Some("max"), Some(v)) => {
                max = Some(v.parse::<f64>().map_err(|_| {
                    S2iError::format(p.clone(), format!("bad max value {v:?}"))
                })?)
            }
            (None, _) => {}
            _ => return Err(S2iError::format(p, format!("unrecognized stats line {line:?}"))),
        }
    }
    match (min, max) {
        (Some(min), Some(max)) => Ok(NormStats { min, max }),
        _ => Err(S2iError::format(p, "stats file missing min or max")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_byte_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.s2is");
        let spec = Spectrogram::new(
            3,
            4,
            (0..12).map(|i| (i as f64 * 0.37).sin()).collect(),
            false,
        )
        .unwrap();
        write_spectrogram(&path, &spec).unwrap();
        let bytes1 = fs::read(&path).unwrap();

        let loaded = read_spectrogram(&path).unwrap();
        assert_eq!((loaded.rows, loaded.cols, loaded.normalized), (3, 4, false));
        // values live at f32 precision once stored
        for (&a, &b) in loaded.data.iter().zip(spec.data.iter()) {
            assert_eq!(a, b as f32 as f64);
        }

        let path2 = dir.path().join("b.s2is");
        write_spectrogram(&path2, &loaded).unwrap();
        assert_eq!(bytes1, fs::read(&path2).unwrap(), "second write must be byte-identical");
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.s2is");

        fs::write(&path, b"NOPE").unwrap();
        assert!(read_spectrogram(&path).is_err(), "bad magic");

        let mut buf = Vec::new();
        buf.extend_from_slice(b"S2IS");
        buf.extend_from_slice(&1u32.to_le_bytes());
        buf.extend_from_slice(&2u32.to_le_bytes());
        buf.extend_from_slice(&2u32.to_le_bytes());
        buf.push(0);
        buf.extend_from_slice(&[0u8; 8]); // only 2 of 4 values
        fs::write(&path, &buf).unwrap();
        assert!(read_spectrogram(&path).is_err(), "truncated payload");

        let mut buf2 = buf.clone();
        buf2.extend_from_slice(&[0u8; 12]); // completes 4 values + 4 extra bytes
        fs::write(&path, &buf2).unwrap();
        assert!(read_spectrogram(&path).is_err(), "trailing bytes");
    }

    #[test]
    fn stats_sidecar_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stats.txt");
        let stats = NormStats {
            min: -23.025850929940457,
            max: 10.38712466525,
        };
        write_norm_stats(&path, stats).unwrap();
        let back = read_norm_stats(&path).unwrap();
        assert_eq!(back, stats, "decimal text must round-trip f64 exactly");
    }
}
