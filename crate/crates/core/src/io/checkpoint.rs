//! Checkpoint container.
//!
//! Layout, all integers little-endian:
//!   magic "S2IC" | version u32 | schema_hash u64
//!   | schema_json (u32 len + bytes) | meta_json (u32 len + bytes)
//!   | tensor_count u32
//!   | per tensor: name (u32 len + utf8) | rank u32 | dims u32* | f32 data
//!
//! The schema hash is FNV-1a 64 over the schema JSON, recomputed on read.
//! Optimizer velocities are stored as ordinary tensors under the reserved
//! "opt/" prefix. Counters and RNG positions that do not fit f32 live in the
//! meta JSON as exact decimal strings.

use std::fs;
use std::io::Read;
use std::path::Path;

use crate::error::{S2iError, S2iResult};

pub const OPT_PREFIX: &str = "opt/";
const MAGIC: &[u8; 4] = b"S2IC";
const VERSION: u32 = 1;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointData {
    pub schema_json: String,
    pub meta_json: String,
    /// (name, dims, row-major values)
    pub tensors: Vec<(String, Vec<usize>, Vec<f32>)>,
}

impl CheckpointData {
    pub fn schema_hash(&self) -> u64 {
        fnv1a64(self.schema_json.as_bytes())
    }

    pub fn tensor(&self, name: &str) -> Option<&(String, Vec<usize>, Vec<f32>)> {
        self.tensors.iter().find(|(n, _, _)| n == name)
    }
}

fn push_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

pub fn write_checkpoint(path: &Path, data: &CheckpointData) -> S2iResult<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&data.schema_hash().to_le_bytes());
    push_str(&mut buf, &data.schema_json);
    push_str(&mut buf, &data.meta_json);
    buf.extend_from_slice(&(data.tensors.len() as u32).to_le_bytes());
    for (name, dims, values) in &data.tensors {
        let n: usize = dims.iter().product();
        if n != values.len() {
            return Err(S2iError::shape(
                format!("checkpoint tensor {name}"),
                format!("{n} values for dims {dims:?}"),
                format!("{}", values.len()),
            ));
        }
        push_str(&mut buf, name);
        buf.extend_from_slice(&(dims.len() as u32).to_le_bytes());
        for &d in dims {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    // write-then-rename so a crash never leaves a half-written checkpoint
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, &buf).map_err(|e| S2iError::io(tmp.display().to_string(), e))?;
    fs::rename(&tmp, path).map_err(|e| S2iError::io(path.display().to_string(), e))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a str,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> S2iResult<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(S2iError::format(self.path, "truncated checkpoint"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> S2iResult<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> S2iResult<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> S2iResult<String> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| S2iError::format(self.path, "invalid utf-8 in checkpoint string"))
    }
}

pub fn read_checkpoint(path: &Path) -> S2iResult<CheckpointData> {
    let p = path.display().to_string();
    let mut file = fs::File::open(path).map_err(|e| S2iError::io(p.clone(), e))?;
    let mut buf = Vec::new();
    file.read_to_end(&mut buf).map_err(|e| S2iError::io(p.clone(), e))?;
    let mut r = Reader {
        buf: &buf,
        pos: 0,
        path: &p,
    };
    if r.take(4)? != MAGIC {
        return Err(S2iError::format(p, "bad magic, not a checkpoint"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(S2iError::format(p, format!("unsupported checkpoint version {version}")));
    }
    let stored_hash = r.u64()?;
    let schema_json = r.string()?;
    if fnv1a64(schema_json.as_bytes()) != stored_hash {
        return Err(S2iError::format(p, "schema hash mismatch, checkpoint corrupt"));
    }
    let meta_json = r.string()?;
    let count = r.u32()? as usize;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let name = r.string()?;
        let rank = r.u32()? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u32()? as usize);
        }
        let n: usize = dims.iter().product();
        let raw = r.take(n * 4)?;
        let values = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        tensors.push((name, dims, values));
    }
    if r.pos != buf.len() {
        return Err(S2iError::format(p, "trailing bytes after last tensor"));
    }
    Ok(CheckpointData {
        schema_json,
        meta_json,
        tensors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CheckpointData {
        CheckpointData {
            schema_json: r#"{"profile":"tiny","f":16}"#.to_string(),
            meta_json: r#"{"iteration":50}"#.to_string(),
            tensors: vec![
                ("enc/conv0/weight".into(), vec![2, 1, 3, 3], (0..18).map(|i| i as f32 * 0.5).collect()),
                ("enc/conv0/bias".into(), vec![2], vec![0.1, -0.2]),
                (format!("{OPT_PREFIX}enc/0"), vec![2], vec![0.0, 0.0]),
            ],
        }
    }

    #[test]
    fn round_trip_preserves_everything() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.s2ic");
        let data = sample();
        write_checkpoint(&path, &data).unwrap();
        let back = read_checkpoint(&path).unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn writes_are_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.s2ic");
        let p2 = dir.path().join("b.s2ic");
        write_checkpoint(&p1, &sample()).unwrap();
        write_checkpoint(&p2, &sample()).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    }

    #[test]
    fn corrupted_schema_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.s2ic");
        write_checkpoint(&path, &sample()).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        // flip one byte inside the schema json (offset 16 is past the hash)
        bytes[20] ^= 0xff;
        fs::write(&path, &bytes).unwrap();
        assert!(read_checkpoint(&path).is_err());
    }

    #[test]
    fn dim_value_mismatch_is_rejected_on_write() {
        let dir = tempfile::tempdir().unwrap();
        let bad = CheckpointData {
            schema_json: "{}".into(),
            meta_json: "{}".into(),
            tensors: vec![("x".into(), vec![3], vec![1.0, 2.0])],
        };
        assert!(write_checkpoint(&dir.path().join("x.s2ic"), &bad).is_err());
    }
}
