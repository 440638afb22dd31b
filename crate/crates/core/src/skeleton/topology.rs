use std::collections::VecDeque;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::hashing::json_hash;
use crate::skeleton::sequence::check_permutation;
use crate::{Error, Result};

/// How `A + I` is split into the partitions `A_j` summed over by the graph
/// convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionStrategy {
    /// One partition, `A + I`.
    Uniform,
    /// Self loops and one-hop neighbours.
    Distance,
    /// Root, centripetal and centrifugal groups relative to a center key point.
    Spatial,
}

impl PartitionStrategy {
    pub fn num_partitions(self) -> usize {
        match self {
            PartitionStrategy::Uniform => 1,
            PartitionStrategy::Distance => 2,
            PartitionStrategy::Spatial => 3,
        }
    }
}

impl std::str::FromStr for PartitionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "distance" => Ok(Self::Distance),
            "spatial" => Ok(Self::Spatial),
            other => Err(Error::Config(format!("unknown partition strategy `{other}`"))),
        }
    }
}

/// Dense row-major `n x n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Shape("matrix rows must all have length n".into()));
        }
        Ok(Self { n, data: rows.concat() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.n + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.n + c] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row_sum(&self, r: usize) -> f64 {
        self.data[r * self.n..(r + 1) * self.n].iter().sum()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|r| (0..self.n).all(|c| (self.get(r, c) - self.get(c, r)).abs() <= tol))
    }

    pub fn add(&self, other: &SquareMatrix) -> SquareMatrix {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        SquareMatrix { n: self.n, data }
    }

    fn permuted(&self, perm: &[usize]) -> SquareMatrix {
        let mut out = SquareMatrix::zeros(self.n);
        for r in 0..self.n {
            for c in 0..self.n {
                out.set(perm[r], perm[c], self.get(r, c));
            }
        }
        out
    }
}

/// On-disk topology description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologyFile {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
    pub strategy: PartitionStrategy,
    #[serde(default)]
    pub center: Option<usize>,
}

impl TopologyFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn build(&self) -> Result<GraphTopology> {
        let edges: Vec<(usize, usize)> = self.edges.iter().map(|e| (e[0], e[1])).collect();
        build_topology(&edges, self.n, self.strategy, self.center)
    }
}

/// Skeleton graph with its adjacency partitions and degree normalizers.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphTopology {
    n: usize,
    edges: Vec<(usize, usize)>,
    strategy: PartitionStrategy,
    center: Option<usize>,
    adjacency: SquareMatrix,
    partitions: Vec<SquareMatrix>,
    degree_norms: Vec<Vec<f64>>,
    parents: Vec<Option<usize>>,
}

/// Builds `A`, the partitions `A_j` with `sum_j A_j = A + I`, and the
/// diagonal normalizers `(row degree of A_j)^{-1/2}`.
///
/// Edges are undirected `(parent, child)` pairs and must form a forest.
pub fn build_topology(
    edges: &[(usize, usize)],
    n: usize,
    strategy: PartitionStrategy,
    center: Option<usize>,
) -> Result<GraphTopology> {
    if n == 0 {
        return Err(Error::Topology("graph needs at least one key point".into()));
    }
    let mut adjacency = SquareMatrix::zeros(n);
    let mut uf: Vec<usize> = (0..n).collect();
    fn find(uf: &mut [usize], mut x: usize) -> usize {
        while uf[x] != x {
            uf[x] = uf[uf[x]];
            x = uf[x];
        }
        x
    }
    for &(a, b) in edges {
        if a >= n || b >= n {
            return Err(Error::Topology(format!("edge ({a}, {b}) references a key point >= {n}")));
        }
        if a == b {
            return Err(Error::Topology(format!("self-loop on key point {a}")));
        }
        if adjacency.get(a, b) != 0.0 {
            return Err(Error::Topology(format!("duplicate edge ({a}, {b})")));
        }
        let (ra, rb) = (find(&mut uf, a), find(&mut uf, b));
        if ra == rb {
            return Err(Error::Topology(format!("edge ({a}, {b}) closes a cycle")));
        }
        uf[ra] = rb;
        adjacency.set(a, b, 1.0);
        adjacency.set(b, a, 1.0);
    }
    if let Some(c) = center {
        if c >= n {
            return Err(Error::Topology(format!("center key point {c} out of range 0..{n}")));
        }
    }

    let identity = SquareMatrix::identity(n);
    let partitions = match strategy {
        PartitionStrategy::Uniform => vec![adjacency.add(&identity)],
        PartitionStrategy::Distance => vec![identity, adjacency.clone()],
        PartitionStrategy::Spatial => {
            let c = center.ok_or_else(|| Error::Topology("spatial partitioning requires a center key point".into()))?;
            let hops = hop_distances(&adjacency, c);
            let mut root = SquareMatrix::zeros(n);
            let mut centripetal = SquareMatrix::zeros(n);
            let mut centrifugal = SquareMatrix::zeros(n);
            for r in 0..n {
                for col in 0..n {
                    if r != col && adjacency.get(r, col) == 0.0 {
                        continue;
                    }
                    // Unreachable key points carry usize::MAX and land in root.
                    match hops[col].cmp(&hops[r]) {
                        std::cmp::Ordering::Equal => root.set(r, col, 1.0),
                        std::cmp::Ordering::Less => centripetal.set(r, col, 1.0),
                        std::cmp::Ordering::Greater => centrifugal.set(r, col, 1.0),
                    }
                }
            }
            vec![root, centripetal, centrifugal]
        }
    };
    let degree_norms = partitions
        .iter()
        .map(|a| {
            (0..n)
                .map(|r| {
                    let d = a.row_sum(r);
                    if d > 0.0 {
                        d.powf(-0.5)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let parents = tree_parents(&adjacency, center.unwrap_or(0));

    Ok(GraphTopology { n, edges: edges.to_vec(), strategy, center, adjacency, partitions, degree_norms, parents })
}

fn hop_distances(adjacency: &SquareMatrix, source: usize) -> Vec<usize> {
    let n = adjacency.n();
    let mut dist = vec![usize::MAX; n];
    dist[source] = 0;
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        for v in 0..n {
            if adjacency.get(u, v) != 0.0 && dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// BFS parents from `root`; other components are rooted at their lowest index.
fn tree_parents(adjacency: &SquareMatrix, root: usize) -> Vec<Option<usize>> {
    let n = adjacency.n();
    let mut parent = vec![None; n];
    let mut visited = vec![false; n];
    let roots = std::iter::once(root).chain(0..n);
    for r in roots {
        if visited[r] {
            continue;
        }
        visited[r] = true;
        let mut queue = VecDeque::from([r]);
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if adjacency.get(u, v) != 0.0 && !visited[v] {
                    visited[v] = true;
                    parent[v] = Some(u);
                    queue.push_back(v);
                }
            }
        }
    }
    parent
}

impl GraphTopology {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn strategy(&self) -> PartitionStrategy {
        self.strategy
    }

    pub fn center(&self) -> Option<usize> {
        self.center
    }

    pub fn adjacency(&self) -> &SquareMatrix {
        &self.adjacency
    }

    pub fn num_partitions(&self) -> usize {
        self.partitions.len()
    }

    pub fn partitions(&self) -> &[SquareMatrix] {
        &self.partitions
    }

    /// Diagonal of `Λ_j^{-1/2}`.
    pub fn degree_norms(&self, j: usize) -> &[f64] {
        &self.degree_norms[j]
    }

    /// Parent of `v` in the rooted skeleton tree; `None` for roots.
    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parents[v]
    }

    /// `Λ_j^{-1/2} (A_j ⊙ E_j) Λ_j^{-1/2}` for an edge-importance diagonal
    /// (off-diagonal entries of `E_j` are 1). `None` means `E_j` is all ones.
    pub fn normalized(&self, j: usize, edge_diag: Option<&[f64]>) -> SquareMatrix {
        let a = &self.partitions[j];
        let lam = &self.degree_norms[j];
        let mut out = SquareMatrix::zeros(self.n);
        for r in 0..self.n {
            for c in 0..self.n {
                let e = match edge_diag {
                    Some(d) if r == c => d[r],
                    _ => 1.0,
                };
                out.set(r, c, lam[r] * (a.get(r, c) * e) * lam[c]);
            }
        }
        out
    }

    pub fn to_file(&self) -> TopologyFile {
        TopologyFile {
            n: self.n,
            edges: self.edges.iter().map(|&(a, b)| [a, b]).collect(),
            strategy: self.strategy,
            center: self.center,
        }
    }

    /// SHA-256 of the topology file encoding.
    pub fn hash(&self) -> String {
        json_hash(&self.to_file()).expect("topology file always serializes")
    }

    /// Relabels key points: old key point `v` becomes `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<GraphTopology> {
        check_permutation(perm, self.n)?;
        let edges: Vec<(usize, usize)> = self.edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect();
        let mut out = build_topology(&edges, self.n, self.strategy, self.center.map(|c| perm[c]))?;
        // Rebuilt partitions equal the permuted originals; keep the permuted
        // originals so the relabeling is exact even for ties in root choice.
        out.partitions = self.partitions.iter().map(|a| a.permuted(perm)).collect();
        let mut norms = vec![vec![0.0; self.n]; self.partitions.len()];
        for (j, lam) in self.degree_norms.iter().enumerate() {
            for v in 0..self.n {
                norms[j][perm[v]] = lam[v];
            }
        }
        out.degree_norms = norms;
        Ok(out)
    }
}

/// Topologies shipped with the crate.
pub mod builtin {
    use super::TopologyFile;

    const NTU_RGBD_25: &str = include_str!("../../assets/topologies/ntu_rgbd_25.json");
    const INFANT_29: &str = include_str!("../../assets/topologies/infant_29.json");

    /// 25-joint Kinect v2 skeleton, centered on the spine joint.
    pub fn ntu_rgbd_25() -> TopologyFile {
        serde_json::from_str(NTU_RGBD_25).expect("bundled topology parses")
    }

    /// 29-point 2D infant skeleton, centered on the mid-pelvis point.
    pub fn infant_29() -> TopologyFile {
        serde_json::from_str(INFANT_29).expect("bundled topology parses")
    }
}
