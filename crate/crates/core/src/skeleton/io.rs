//! Skeleton file formats.
//!
//! JSON: `{frame_rate, labels, persons, dims, coords}` with `coords` nested
//! `[t][n][m][d]` and `labels[0]` the class label. A dataset file wraps a
//! list of such records. Binary: magic `SKEL0001`, then `t, n, m, d` as
//! little-endian `u32`, then `f32` coordinates in `t`-major order.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::skeleton::SkeletonSequence;
use crate::{Error, Result};

pub const SKELETON_MAGIC: &[u8; 8] = b"SKEL0001";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonJson {
    pub frame_rate: f64,
    pub labels: Vec<usize>,
    pub persons: usize,
    pub dims: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject_id: Option<String>,
    pub coords: Vec<Vec<Vec<Vec<f64>>>>,
}

impl SkeletonJson {
    pub fn from_sequence(seq: &SkeletonSequence) -> Self {
        let [t, n, m, d] = seq.shape();
        let coords = (0..t)
            .map(|ti| {
                (0..n).map(|ni| (0..m).map(|mi| (0..d).map(|di| seq.get(ti, ni, mi, di)).collect()).collect()).collect()
            })
            .collect();
        Self {
            frame_rate: seq.frame_rate(),
            labels: vec![seq.label()],
            persons: m,
            dims: d,
            subject_id: Some(seq.subject_id().to_string()),
            coords,
        }
    }

    pub fn to_sequence(&self) -> Result<SkeletonSequence> {
        let t = self.coords.len();
        let n = self.coords.first().map_or(0, |f| f.len());
        let mut flat = Vec::with_capacity(t * n * self.persons * self.dims);
        for (ti, frame) in self.coords.iter().enumerate() {
            if frame.len() != n {
                return Err(Error::Shape(format!("frame {ti} has {} key points, expected {n}", frame.len())));
            }
            for point in frame {
                if point.len() != self.persons {
                    return Err(Error::Shape(format!(
                        "frame {ti} lists {} persons, header says {}",
                        point.len(),
                        self.persons
                    )));
                }
                for person in point {
                    if person.len() != self.dims {
                        return Err(Error::Shape(format!(
                            "frame {ti} has {}D coordinates, header says {}D",
                            person.len(),
                            self.dims
                        )));
                    }
                    flat.extend_from_slice(person);
                }
            }
        }
        let label = *self.labels.first().ok_or_else(|| Error::Data("skeleton record has no label".into()))?;
        SkeletonSequence::new(
            flat,
            t,
            n,
            self.persons,
            self.dims,
            self.frame_rate,
            label,
            self.subject_id.clone().unwrap_or_default(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonDataset {
    pub sequences: Vec<SkeletonJson>,
}

pub fn save_dataset(path: impl AsRef<Path>, sequences: &[SkeletonSequence]) -> Result<()> {
    let ds = SkeletonDataset { sequences: sequences.iter().map(SkeletonJson::from_sequence).collect() };
    std::fs::write(path, serde_json::to_vec(&ds)?)?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<SkeletonSequence>> {
    let ds: SkeletonDataset = serde_json::from_slice(&std::fs::read(path)?)?;
    ds.sequences.iter().map(SkeletonJson::to_sequence).collect()
}

pub fn load_sequence_json(path: impl AsRef<Path>) -> Result<SkeletonSequence> {
    let rec: SkeletonJson = serde_json::from_slice(&std::fs::read(path)?)?;
    rec.to_sequence()
}

/// Writes the packed binary variant. Coordinates are narrowed to `f32`.
pub fn write_binary<W: Write>(mut w: W, seq: &SkeletonSequence) -> Result<()> {
    w.write_all(SKELETON_MAGIC)?;
    for dim in seq.shape() {
        w.write_all(&(dim as u32).to_le_bytes())?;
    }
    for &c in seq.coords() {
        w.write_all(&(c as f32).to_le_bytes())?;
    }
    Ok(())
}

/// Reads the packed binary variant. The format carries no frame rate or
/// label, so the caller supplies them.
pub fn read_binary<R: Read>(mut r: R, frame_rate: f64, label: usize) -> Result<SkeletonSequence> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < 24 || &bytes[..8] != SKELETON_MAGIC {
        return Err(Error::corrupt("skeleton file", "missing SKEL0001 header"));
    }
    let dim = |i: usize| u32::from_le_bytes(bytes[8 + 4 * i..12 + 4 * i].try_into().unwrap()) as usize;
    let (t, n, m, d) = (dim(0), dim(1), dim(2), dim(3));
    let count = t
        .checked_mul(n)
        .and_then(|x| x.checked_mul(m))
        .and_then(|x| x.checked_mul(d))
        .ok_or_else(|| Error::corrupt("skeleton file", "header dimensions overflow"))?;
    let payload = &bytes[24..];
    if payload.len() != count * 4 {
        return Err(Error::corrupt(
            "skeleton file",
            format!("payload has {} bytes, header implies {}", payload.len(), count * 4),
        ));
    }
    let coords = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect();
    SkeletonSequence::new(coords, t, n, m, d, frame_rate, label, "")
}
