use crate::{Error, Result};

/// A time series of key-point coordinates, stored `[t][n][m][d]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSequence {
    coords: Vec<f64>,
    frames: usize,
    keypoints: usize,
    persons: usize,
    dims: usize,
    frame_rate: f64,
    label: usize,
    subject_id: String,
}

impl SkeletonSequence {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        coords: Vec<f64>,
        frames: usize,
        keypoints: usize,
        persons: usize,
        dims: usize,
        frame_rate: f64,
        label: usize,
        subject_id: impl Into<String>,
    ) -> Result<Self> {
        if frames < 2 {
            return Err(Error::Data(format!("sequence needs at least 2 frames, got {frames}")));
        }
        if keypoints < 2 {
            return Err(Error::Data(format!("sequence needs at least 2 key points, got {keypoints}")));
        }
        if persons == 0 {
            return Err(Error::Data("sequence needs at least one person".into()));
        }
        if dims != 2 && dims != 3 {
            return Err(Error::Data(format!("coordinates must be 2D or 3D, got {dims}D")));
        }
        if !(frame_rate.is_finite() && frame_rate > 0.0) {
            return Err(Error::Data(format!("frame rate must be positive, got {frame_rate}")));
        }
        let expected = frames * keypoints * persons * dims;
        if coords.len() != expected {
            return Err(Error::Shape(format!(
                "coordinate buffer has {} values, expected {expected} for [{frames}][{keypoints}][{persons}][{dims}]",
                coords.len()
            )));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::Data(format!("non-finite coordinate at flat index {i}")));
        }
        Ok(Self { coords, frames, keypoints, persons, dims, frame_rate, label, subject_id: subject_id.into() })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn keypoints(&self) -> usize {
        self.keypoints
    }

    pub fn persons(&self) -> usize {
        self.persons
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    /// `[t, n, m, d]`
    pub fn shape(&self) -> [usize; 4] {
        [self.frames, self.keypoints, self.persons, self.dims]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    #[inline]
    pub fn index(&self, t: usize, n: usize, m: usize, d: usize) -> usize {
        ((t * self.keypoints + n) * self.persons + m) * self.dims + d
    }

    #[inline]
    pub fn get(&self, t: usize, n: usize, m: usize, d: usize) -> f64 {
        self.coords[self.index(t, n, m, d)]
    }

    /// Same metadata, new coordinates.
    pub fn with_coords(&self, coords: Vec<f64>) -> Result<Self> {
        Self::new(
            coords,
            self.frames,
            self.keypoints,
            self.persons,
            self.dims,
            self.frame_rate,
            self.label,
            self.subject_id.clone(),
        )
    }

    pub fn with_label(mut self, label: usize) -> Self {
        self.label = label;
        self
    }

    /// Frames `[start, end)` as a new sequence.
    pub fn slice_frames(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.frames {
            return Err(Error::Data(format!("frame range {start}..{end} outside sequence of {} frames", self.frames)));
        }
        let stride = self.keypoints * self.persons * self.dims;
        Self::new(
            self.coords[start * stride..end * stride].to_vec(),
            end - start,
            self.keypoints,
            self.persons,
            self.dims,
            self.frame_rate,
            self.label,
            self.subject_id.clone(),
        )
    }

    /// Relabels key points: old key point `v` becomes `perm[v]`.
    pub fn permute_keypoints(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.keypoints)?;
        let mut out = vec![0.0; self.coords.len()];
        for t in 0..self.frames {
            for (v, &nv) in perm.iter().enumerate() {
                for m in 0..self.persons {
                    for d in 0..self.dims {
                        let dst = ((t * self.keypoints + nv) * self.persons + m) * self.dims + d;
                        out[dst] = self.get(t, v, m, d);
                    }
                }
            }
        }
        self.with_coords(out)
    }

    /// Frames in reverse order.
    pub fn time_reversed(&self) -> Result<Self> {
        let stride = self.keypoints * self.persons * self.dims;
        let mut out = Vec::with_capacity(self.coords.len());
        for t in (0..self.frames).rev() {
            out.extend_from_slice(&self.coords[t * stride..(t + 1) * stride]);
        }
        self.with_coords(out)
    }
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::Shape(format!("permutation has {} entries, expected {n}", perm.len())));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return Err(Error::Data(format!("{perm:?} is not a permutation of 0..{n}")));
        }
        seen[p] = true;
    }
    Ok(())
}
