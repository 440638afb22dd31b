use serde::{Deserialize, Serialize};

use crate::skeleton::SkeletonSequence;
use crate::{Error, Result};

/// One declarative preprocessing step. Steps run in list order, per person.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum PreprocessStep {
    /// Translate so the geometric median position of `keypoint` is the origin.
    Center { keypoint: usize },
    /// Scale about the origin so the median length of segment `from -> to`
    /// equals `length`.
    Scale { from: usize, to: usize, length: f64 },
    /// Rotate about the origin so the geometric median of the `from -> to`
    /// vectors points along +x.
    AxisAlign { from: usize, to: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub steps: Vec<PreprocessStep>,
}

impl PreprocessConfig {
    /// Center on a pelvis point and rescale by twice the trunk length.
    pub fn centered_trunk(pelvis: usize, neck: usize) -> Self {
        Self {
            steps: vec![
                PreprocessStep::Center { keypoint: pelvis },
                PreprocessStep::Scale { from: pelvis, to: neck, length: 0.5 },
            ],
        }
    }

    /// Center on the spine, align the shoulder line with x, unit-scale a
    /// reference segment.
    pub fn aligned_spine(spine: usize, left_shoulder: usize, right_shoulder: usize) -> Self {
        Self {
            steps: vec![
                PreprocessStep::Center { keypoint: spine },
                PreprocessStep::AxisAlign { from: left_shoulder, to: right_shoulder },
                PreprocessStep::Scale { from: left_shoulder, to: right_shoulder, length: 1.0 },
            ],
        }
    }
}

pub fn preprocess(seq: &SkeletonSequence, config: &PreprocessConfig) -> Result<SkeletonSequence> {
    let [_, n, _, _] = seq.shape();
    for step in &config.steps {
        let referenced: &[usize] = match step {
            PreprocessStep::Center { keypoint } => std::slice::from_ref(keypoint),
            PreprocessStep::Scale { from, to, .. } | PreprocessStep::AxisAlign { from, to } => &[*from, *to][..],
        };
        if let Some(bad) = referenced.iter().find(|&&k| k >= n) {
            return Err(Error::Config(format!("preprocessing references key point {bad}, sequence has {n}")));
        }
    }

    let mut coords = seq.coords().to_vec();
    let view = Layout::of(seq);
    for step in &config.steps {
        for person in 0..view.persons {
            match *step {
                PreprocessStep::Center { keypoint } => center(&mut coords, &view, person, keypoint),
                PreprocessStep::Scale { from, to, length } => scale(&mut coords, &view, person, from, to, length)?,
                PreprocessStep::AxisAlign { from, to } => axis_align(&mut coords, &view, person, from, to)?,
            }
        }
    }
    seq.with_coords(coords)
}

struct Layout {
    frames: usize,
    keypoints: usize,
    persons: usize,
    dims: usize,
}

impl Layout {
    fn of(seq: &SkeletonSequence) -> Self {
        let [frames, keypoints, persons, dims] = seq.shape();
        Self { frames, keypoints, persons, dims }
    }

    #[inline]
    fn at(&self, t: usize, n: usize, m: usize) -> usize {
        ((t * self.keypoints + n) * self.persons + m) * self.dims
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let len = values.len();
    if len % 2 == 1 {
        values[len / 2]
    } else {
        0.5 * (values[len / 2 - 1] + values[len / 2])
    }
}

/// Geometric median (Weiszfeld iteration with the Vardi-Zhang correction
/// for iterates landing on a data point). Unlike the per-axis median it
/// commutes with rotations, which keeps centering and alignment idempotent.
fn geometric_median(points: &[[f64; 3]]) -> [f64; 3] {
    let len = points.len() as f64;
    let mut y = [0.0; 3];
    for p in points {
        for d in 0..3 {
            y[d] += p[d] / len;
        }
    }
    let spread = points.iter().map(|p| dist(p, &y)).fold(0.0, f64::max);
    if spread == 0.0 {
        return y;
    }
    let tiny = 1e-14 * spread;
    for _ in 0..10_000 {
        let mut num = [0.0; 3];
        let mut den = 0.0;
        let mut coincident = 0.0;
        for p in points {
            let r = dist(p, &y);
            if r <= tiny {
                coincident += 1.0;
                continue;
            }
            for d in 0..3 {
                num[d] += p[d] / r;
            }
            den += 1.0 / r;
        }
        if den == 0.0 {
            break;
        }
        let t = [num[0] / den, num[1] / den, num[2] / den];
        let next = if coincident > 0.0 {
            let pull = [(t[0] - y[0]) * den, (t[1] - y[1]) * den, (t[2] - y[2]) * den];
            let r = (pull[0] * pull[0] + pull[1] * pull[1] + pull[2] * pull[2]).sqrt();
            if r <= coincident {
                break;
            }
            let a = coincident / r;
            [(1.0 - a) * t[0] + a * y[0], (1.0 - a) * t[1] + a * y[1], (1.0 - a) * t[2] + a * y[2]]
        } else {
            t
        };
        let step = dist(&next, &y);
        y = next;
        if step <= 1e-15 * spread {
            break;
        }
    }
    y
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn point(coords: &[f64], base: usize, dims: usize) -> [f64; 3] {
    let mut p = [0.0; 3];
    p[..dims].copy_from_slice(&coords[base..base + dims]);
    p
}

fn center(coords: &mut [f64], l: &Layout, m: usize, keypoint: usize) {
    let points: Vec<[f64; 3]> = (0..l.frames).map(|t| point(coords, l.at(t, keypoint, m), l.dims)).collect();
    let origin = geometric_median(&points);
    for t in 0..l.frames {
        for n in 0..l.keypoints {
            let base = l.at(t, n, m);
            for d in 0..l.dims {
                coords[base + d] -= origin[d];
            }
        }
    }
}

fn segment_lengths(coords: &[f64], l: &Layout, m: usize, from: usize, to: usize) -> Vec<f64> {
    (0..l.frames)
        .map(|t| {
            let (a, b) = (l.at(t, from, m), l.at(t, to, m));
            (0..l.dims).map(|d| (coords[b + d] - coords[a + d]).powi(2)).sum::<f64>().sqrt()
        })
        .collect()
}

fn scale(coords: &mut [f64], l: &Layout, m: usize, from: usize, to: usize, length: f64) -> Result<()> {
    let med = median(&mut segment_lengths(coords, l, m, from, to));
    if med <= 0.0 || !med.is_finite() {
        return Err(Error::Data(format!("reference segment {from}->{to} has zero median length")));
    }
    let factor = length / med;
    for t in 0..l.frames {
        for n in 0..l.keypoints {
            let base = l.at(t, n, m);
            for d in 0..l.dims {
                coords[base + d] *= factor;
            }
        }
    }
    Ok(())
}

fn axis_align(coords: &mut [f64], l: &Layout, m: usize, from: usize, to: usize) -> Result<()> {
    let segments: Vec<[f64; 3]> = (0..l.frames)
        .map(|t| {
            let (a, b) = (point(coords, l.at(t, from, m), l.dims), point(coords, l.at(t, to, m), l.dims));
            [b[0] - a[0], b[1] - a[1], b[2] - a[2]]
        })
        .collect();
    let dir = geometric_median(&segments);
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= 0.0 {
        return Err(Error::Data(format!("alignment segment {from}->{to} has zero median direction")));
    }
    let u = [dir[0] / norm, dir[1] / norm, dir[2] / norm];
    let rot = rotation_to_x(u, l.dims);
    for t in 0..l.frames {
        for n in 0..l.keypoints {
            let base = l.at(t, n, m);
            let p = [coords[base], coords[base + 1], if l.dims == 3 { coords[base + 2] } else { 0.0 }];
            for d in 0..l.dims {
                coords[base + d] = rot[d][0] * p[0] + rot[d][1] * p[1] + rot[d][2] * p[2];
            }
        }
    }
    Ok(())
}

/// Rotation taking unit vector `u` onto +x (in the xy-plane for 2D data).
fn rotation_to_x(u: [f64; 3], dims: usize) -> [[f64; 3]; 3] {
    if dims == 2 {
        let (c, s) = (u[0], u[1]);
        return [[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]];
    }
    // Rodrigues rotation about axis u x e_x.
    let axis = [0.0, u[2], -u[1]];
    let sin = (axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let cos = u[0];
    if sin < 1e-15 {
        if cos > 0.0 {
            return [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        }
        // Opposite direction: half turn about z.
        return [[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]];
    }
    let k = [axis[0] / sin, axis[1] / sin, axis[2] / sin];
    let kx = [[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]];
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let kk: f64 = (0..3).map(|q| kx[i][q] * kx[q][j]).sum();
            r[i][j] = if i == j { 1.0 } else { 0.0 } + sin * kx[i][j] + (1.0 - cos) * kk;
        }
    }
    r
}
