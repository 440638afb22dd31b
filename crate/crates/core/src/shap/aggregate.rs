use serde::{Deserialize, Serialize};

use super::{Attribution, Granularity, PlayerPartition};
use crate::{Error, Result};

/// Attribution spread over the full `[f, k, t, n, m]` input.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseAttribution {
    pub class_index: usize,
    pub shape: [usize; 5],
    pub data: Vec<f64>,
}

/// Spreads each player's value evenly over the input cells it owns, so
/// the dense total equals the player total.
pub fn to_dense(attr: &Attribution, shape: [usize; 5]) -> Result<DenseAttribution> {
    let [f, k, t, n, m] = shape;
    let partition = PlayerPartition::new(attr.granularity, f, n)?;
    if attr.phi.len() != partition.n_players() {
        return Err(Error::Shape(format!(
            "{} values for {} players of shape {shape:?}",
            attr.phi.len(),
            partition.n_players()
        )));
    }
    let mut cells = vec![0usize; partition.n_players()];
    for fi in 0..f {
        for v in 0..n {
            cells[partition.player_of(fi, v)] += 1;
        }
    }
    let per_cell = (k * t * m) as f64;
    let owners = partition.owner_map(shape);
    let data = owners.iter().map(|&p| attr.phi[p] / (cells[p] as f64 * per_cell)).collect();
    Ok(DenseAttribution { class_index: attr.class_index, shape, data })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Merge `f` and `k`, keep the first half of the frames (the padded
    /// half is discarded) and the first person.
    Ntu,
    /// Merge `f` and `k` and keep the first person.
    Cp,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ntu" => Ok(Self::Ntu),
            "cp" => Ok(Self::Cp),
            other => Err(Error::Config(format!("unknown aggregation scheme {other:?}"))),
        }
    }
}

/// Aggregated attribution laid out `[f·k][t][n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Reduced {
    pub class_index: usize,
    pub groups: usize,
    pub group_channels: usize,
    pub frames: usize,
    pub keypoints: usize,
    pub data: Vec<f64>,
    pub warnings: Vec<String>,
}

pub fn aggregate(dense: &DenseAttribution, scheme: Scheme) -> Result<Reduced> {
    let [f, k, t, n, m] = dense.shape;
    let mut warnings = Vec::new();
    let frames = match scheme {
        Scheme::Cp => t,
        Scheme::Ntu => {
            if t % 2 == 1 {
                warnings.push(format!("odd frame count {t}; the last frame is dropped before halving"));
            }
            t / 2
        }
    };
    if frames == 0 {
        return Err(Error::Shape(format!("no frames left after aggregating {t} frames")));
    }
    let mut data = Vec::with_capacity(f * k * frames * n);
    for c in 0..f * k {
        for ti in 0..frames {
            for v in 0..n {
                data.push(dense.data[((c * t + ti) * n + v) * m]);
            }
        }
    }
    Ok(Reduced { class_index: dense.class_index, groups: f, group_channels: k, frames, keypoints: n, data, warnings })
}

impl Reduced {
    pub fn shape(&self) -> [usize; 3] {
        [self.groups * self.group_channels, self.frames, self.keypoints]
    }

    #[inline]
    pub fn get(&self, c: usize, t: usize, n: usize) -> f64 {
        self.data[(c * self.frames + t) * self.keypoints + n]
    }

    /// `[f·k][n]` averaged over frames.
    pub fn mean_over_time(&self) -> Vec<f64> {
        let [c_all, t, n] = self.shape();
        let mut out = vec![0.0; c_all * n];
        for c in 0..c_all {
            for ti in 0..t {
                for v in 0..n {
                    out[c * n + v] += self.get(c, ti, v);
                }
            }
        }
        out.iter_mut().for_each(|x| *x /= t as f64);
        out
    }

    /// `[f][t][n]`: the `k` channels of each group summed.
    pub fn group_maps(&self) -> Vec<Vec<f64>> {
        let (t, n, k) = (self.frames, self.keypoints, self.group_channels);
        (0..self.groups)
            .map(|g| {
                let mut out = vec![0.0; t * n];
                for c in g * k..(g + 1) * k {
                    for ti in 0..t {
                        for v in 0..n {
                            out[ti * n + v] += self.get(c, ti, v);
                        }
                    }
                }
                out
            })
            .collect()
    }

    /// Total attribution per group (`φJ, φV, φB, φA` in stacking order).
    pub fn group_totals(&self) -> Vec<f64> {
        self.group_maps().iter().map(|m| m.iter().sum()).collect()
    }

    pub fn total(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Per key point: channels summed, frames averaged.
    pub fn keypoint_scores(&self) -> Vec<f64> {
        let [c_all, t, n] = self.shape();
        let mut out = vec![0.0; n];
        for c in 0..c_all {
            for ti in 0..t {
                for (v, o) in out.iter_mut().enumerate() {
                    *o += self.get(c, ti, v);
                }
            }
        }
        out.iter_mut().for_each(|x| *x /= t as f64);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Important,
    Unimportant,
}

/// Key points by score: descending for important, ascending for
/// unimportant; ties go to the lower index either way.
pub fn rank_keypoints(scores: &[f64], direction: Direction) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        let ord = match direction {
            Direction::Important => scores[b].total_cmp(&scores[a]),
            Direction::Unimportant => scores[a].total_cmp(&scores[b]),
        };
        ord.then(a.cmp(&b))
    });
    order
}

/// Per-key-point values of one attribution; groups are summed for
/// group-by-key-point players.
pub fn keypoint_values(attr: &Attribution, groups: usize, keypoints: usize) -> Result<Vec<f64>> {
    let partition = PlayerPartition::new(attr.granularity, groups, keypoints)?;
    if attr.granularity == Granularity::PerGroup {
        return Err(Error::Config("per-group players carry no key-point values".into()));
    }
    if attr.phi.len() != partition.n_players() {
        return Err(Error::Shape("attribution does not match the partition".into()));
    }
    let mut out = vec![0.0; keypoints];
    for (p, &v) in attr.phi.iter().enumerate() {
        out[partition.keypoint_of(p).expect("key-point granularity")] += v;
    }
    Ok(out)
}

/// Mean per-key-point values of class `class` over the attributions of
/// samples whose label is that class.
pub fn class_keypoint_scores(
    attributions: &[Attribution],
    labels: &[usize],
    class: usize,
    groups: usize,
    keypoints: usize,
) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; keypoints];
    let mut count = 0usize;
    for a in attributions.iter().filter(|a| a.class_index == class) {
        let label = *labels
            .get(a.sample_index)
            .ok_or_else(|| Error::Data(format!("no label for sample {}", a.sample_index)))?;
        if label != class {
            continue;
        }
        for (s, v) in acc.iter_mut().zip(keypoint_values(a, groups, keypoints)?) {
            *s += v;
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::Data(format!("no explained samples of class {class}")));
    }
    acc.iter_mut().for_each(|s| *s /= count as f64);
    Ok(acc)
}
