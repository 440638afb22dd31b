use serde::{Deserialize, Serialize};

use crate::features::{FeatureTensor, Group};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    /// One player per key point, covering every group.
    PerKeypoint,
    /// One player per feature group, covering every key point.
    PerGroup,
    /// One player per (group, key point) pair, group-major.
    PerKeypointGroup,
}

impl std::str::FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_keypoint" | "keypoint" => Ok(Self::PerKeypoint),
            "per_group" | "group" => Ok(Self::PerGroup),
            "per_keypoint_group" | "keypoint_group" => Ok(Self::PerKeypointGroup),
            other => Err(Error::Config(format!("unknown player granularity {other:?}"))),
        }
    }
}

/// Maps players to the `(f, n)` cells they own; each cell spans every
/// `k`, `t` and `m`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayerPartition {
    granularity: Granularity,
    groups: usize,
    keypoints: usize,
}

impl PlayerPartition {
    pub fn new(granularity: Granularity, groups: usize, keypoints: usize) -> Result<Self> {
        if groups == 0 || keypoints == 0 {
            return Err(Error::Config("player partition needs groups and key points".into()));
        }
        Ok(Self { granularity, groups, keypoints })
    }

    pub fn for_tensor(granularity: Granularity, x: &FeatureTensor) -> Self {
        Self { granularity, groups: x.groups(), keypoints: x.keypoints() }
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn keypoints(&self) -> usize {
        self.keypoints
    }

    pub fn n_players(&self) -> usize {
        match self.granularity {
            Granularity::PerKeypoint => self.keypoints,
            Granularity::PerGroup => self.groups,
            Granularity::PerKeypointGroup => self.groups * self.keypoints,
        }
    }

    /// Player owning group `f` at key point `n`.
    pub fn player_of(&self, f: usize, n: usize) -> usize {
        match self.granularity {
            Granularity::PerKeypoint => n,
            Granularity::PerGroup => f,
            Granularity::PerKeypointGroup => f * self.keypoints + n,
        }
    }

    /// The `(f, n)` cells of a player.
    pub fn cells(&self, player: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for f in 0..self.groups {
            for n in 0..self.keypoints {
                if self.player_of(f, n) == player {
                    out.push((f, n));
                }
            }
        }
        out
    }

    /// Key point of a player, when it has exactly one.
    pub fn keypoint_of(&self, player: usize) -> Option<usize> {
        match self.granularity {
            Granularity::PerKeypoint => Some(player),
            Granularity::PerGroup => None,
            Granularity::PerKeypointGroup => Some(player % self.keypoints),
        }
    }

    /// Group of a player, when it has exactly one.
    pub fn group_of(&self, player: usize) -> Option<Group> {
        match self.granularity {
            Granularity::PerKeypoint => None,
            Granularity::PerGroup => Group::ALL.get(player).copied(),
            Granularity::PerKeypointGroup => Group::ALL.get(player / self.keypoints).copied(),
        }
    }

    pub fn label(&self, player: usize) -> String {
        match (self.group_of(player), self.keypoint_of(player)) {
            (Some(g), Some(n)) => format!("{}{n}", g.name()),
            (Some(g), None) => g.name().to_string(),
            (None, Some(n)) => format!("kp{n}"),
            (None, None) => format!("p{player}"),
        }
    }

    pub(crate) fn check_tensor(&self, x: &FeatureTensor) -> Result<()> {
        if x.groups() != self.groups || x.keypoints() != self.keypoints {
            return Err(Error::Shape(format!(
                "partition covers {} groups × {} key points, tensor is {:?}",
                self.groups,
                self.keypoints,
                x.shape()
            )));
        }
        Ok(())
    }

    /// Player of every flat tensor index.
    pub(crate) fn owner_map(&self, shape: [usize; 5]) -> Vec<usize> {
        let [f, k, t, n, m] = shape;
        let mut out = Vec::with_capacity(f * k * t * n * m);
        for fi in 0..f {
            for _ in 0..k * t {
                for v in 0..n {
                    let p = self.player_of(fi, v);
                    out.extend(std::iter::repeat_n(p, m));
                }
            }
        }
        out
    }
}
