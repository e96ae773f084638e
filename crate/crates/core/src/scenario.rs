//! Network topology, cluster structure, ground truth and streaming data.

use std::collections::BTreeSet;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{Error, Result};
use crate::rng::{Purpose, Streams};
use crate::Vector;

/// Raw description of a network: node count, undirected edges and a cluster
/// partition. Node ids are zero-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopologySpec {
    pub num_nodes: usize,
    pub edges: Vec<(usize, usize)>,
    pub clusters: Vec<Vec<usize>>,
}

/// A validated multi-task network.
///
/// Neighborhoods are closed: `neighbors(n)` always contains `n`. The
/// same-cluster part `same_cluster(n)` and the cross-cluster part
/// `other_cluster(n)` partition it.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    cluster_of: Vec<usize>,
    clusters: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    same_cluster: Vec<Vec<usize>>,
    other_cluster: Vec<Vec<usize>>,
    warnings: Vec<String>,
}

pub fn build_topology(spec: &TopologySpec) -> Result<Topology> {
    let n = spec.num_nodes;
    if n == 0 {
        return Err(Error::Topology("network has no nodes".into()));
    }

    let mut cluster_of = vec![usize::MAX; n];
    let mut clusters = Vec::with_capacity(spec.clusters.len());
    for (m, members) in spec.clusters.iter().enumerate() {
        if members.is_empty() {
            return Err(Error::Topology(format!("cluster {} is empty", m + 1)));
        }
        let mut sorted = members.clone();
        sorted.sort_unstable();
        for &node in &sorted {
            if node >= n {
                return Err(Error::Topology(format!("cluster {} references unknown node {}", m + 1, node + 1)));
            }
            if cluster_of[node] != usize::MAX {
                return Err(Error::Topology(format!(
                    "node {} belongs to clusters {} and {}",
                    node + 1,
                    cluster_of[node] + 1,
                    m + 1
                )));
            }
            cluster_of[node] = m;
        }
        clusters.push(sorted);
    }
    if let Some(orphan) = cluster_of.iter().position(|&c| c == usize::MAX) {
        return Err(Error::Topology(format!("node {} is in no cluster", orphan + 1)));
    }

    let mut adjacency: Vec<BTreeSet<usize>> = (0..n).map(|i| BTreeSet::from([i])).collect();
    let mut edges = BTreeSet::new();
    for &(a, b) in &spec.edges {
        if a >= n || b >= n {
            return Err(Error::Topology(format!("edge ({}, {}) references an unknown node", a + 1, b + 1)));
        }
        if a == b {
            continue;
        }
        adjacency[a].insert(b);
        adjacency[b].insert(a);
        edges.insert((a.min(b), a.max(b)));
    }

    let neighbors: Vec<Vec<usize>> = adjacency.iter().map(|s| s.iter().copied().collect()).collect();
    let same_cluster: Vec<Vec<usize>> = (0..n)
        .map(|i| neighbors[i].iter().copied().filter(|&l| cluster_of[l] == cluster_of[i]).collect())
        .collect();
    let other_cluster: Vec<Vec<usize>> = (0..n)
        .map(|i| neighbors[i].iter().copied().filter(|&l| cluster_of[l] != cluster_of[i]).collect())
        .collect();

    let mut warnings = Vec::new();
    for i in 0..n {
        if same_cluster[i].len() == 1 && clusters[cluster_of[i]].len() > 1 {
            warnings.push(format!("node {} has no same-cluster neighbors", i + 1));
        }
    }
    for (m, members) in clusters.iter().enumerate() {
        if !cluster_connected(members, &same_cluster) {
            warnings.push(format!("cluster {} is not connected", m + 1));
        }
    }

    Ok(Topology {
        cluster_of,
        clusters,
        edges: edges.into_iter().collect(),
        neighbors,
        same_cluster,
        other_cluster,
        warnings,
    })
}

fn cluster_connected(members: &[usize], same_cluster: &[Vec<usize>]) -> bool {
    let mut seen = BTreeSet::from([members[0]]);
    let mut stack = vec![members[0]];
    while let Some(v) = stack.pop() {
        for &w in &same_cluster[v] {
            if seen.insert(w) {
                stack.push(w);
            }
        }
    }
    seen.len() == members.len()
}

impl Topology {
    pub fn num_nodes(&self) -> usize {
        self.cluster_of.len()
    }

    pub fn num_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn cluster_of(&self, node: usize) -> usize {
        self.cluster_of[node]
    }

    pub fn cluster(&self, m: usize) -> &[usize] {
        &self.clusters[m]
    }

    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    /// Undirected edges as `(min, max)` pairs, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Closed neighborhood N_n (contains `node`).
    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[node]
    }

    /// N_n^+ = N_n ∩ C_n (contains `node`).
    pub fn same_cluster(&self, node: usize) -> &[usize] {
        &self.same_cluster[node]
    }

    /// N_n^- = N_n \ C_n.
    pub fn other_cluster(&self, node: usize) -> &[usize] {
        &self.other_cluster[node]
    }

    /// Same-cluster neighbors excluding the node itself.
    pub fn peers(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.same_cluster[node].iter().copied().filter(move |&l| l != node)
    }

    pub fn num_peers(&self, node: usize) -> usize {
        self.same_cluster[node].len() - 1
    }

    pub fn are_neighbors(&self, a: usize, b: usize) -> bool {
        self.neighbors[a].binary_search(&b).is_ok()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }
}

/// Per-cluster targets and their per-node expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    cluster_targets: Vec<Vector>,
    node_targets: Vec<Vector>,
}

impl GroundTruth {
    pub fn from_cluster_targets(topology: &Topology, cluster_targets: Vec<Vector>) -> Result<Self> {
        if cluster_targets.len() != topology.num_clusters() {
            return Err(Error::Config(format!(
                "expected {} cluster targets, got {}",
                topology.num_clusters(),
                cluster_targets.len()
            )));
        }
        let dim = cluster_targets[0].len();
        if let Some(bad) = cluster_targets.iter().find(|w| w.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: bad.len() });
        }
        let node_targets = (0..topology.num_nodes())
            .map(|n| cluster_targets[topology.cluster_of(n)].clone())
            .collect();
        Ok(Self { cluster_targets, node_targets })
    }

    pub fn dim(&self) -> usize {
        self.cluster_targets[0].len()
    }

    pub fn cluster_target(&self, m: usize) -> &Vector {
        &self.cluster_targets[m]
    }

    pub fn target(&self, node: usize) -> &Vector {
        &self.node_targets[node]
    }

    pub fn node_targets(&self) -> &[Vector] {
        &self.node_targets
    }

    /// col{w_n^o}, length L·N.
    pub fn stacked(&self) -> Vector {
        let dim = self.dim();
        Vector::from_fn(dim * self.node_targets.len(), |i, _| self.node_targets[i / dim][i % dim])
    }
}

/// Draws w_m^o = base + δ_m with δ_m uniform in the ball of radius
/// `similarity_radius`.
pub fn make_ground_truth<R: Rng + ?Sized>(
    topology: &Topology,
    base: &Vector,
    similarity_radius: f64,
    rng: &mut R,
) -> Result<GroundTruth> {
    if base.is_empty() {
        return Err(Error::Config("ground-truth base vector is empty".into()));
    }
    if similarity_radius.is_nan() || similarity_radius < 0.0 {
        return Err(Error::Config("similarity radius must be nonnegative".into()));
    }
    let dim = base.len();
    let targets = (0..topology.num_clusters())
        .map(|_| {
            let dir = Vector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
            let norm = dir.norm();
            let scale: f64 = rng.random::<f64>().powf(1.0 / dim as f64) * similarity_radius;
            if norm > 0.0 && scale > 0.0 {
                base + dir * (scale / norm)
            } else {
                base.clone()
            }
        })
        .collect();
    GroundTruth::from_cluster_targets(topology, targets)
}

/// Per-node regressor and noise variances.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalParams {
    dim: usize,
    regressor_variance: Vec<f64>,
    noise_variance: Vec<f64>,
}

impl SignalParams {
    pub fn new(dim: usize, regressor_variance: Vec<f64>, noise_variance: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("dimension must be positive".into()));
        }
        if regressor_variance.len() != noise_variance.len() {
            return Err(Error::Config("regressor and noise variance lists differ in length".into()));
        }
        if regressor_variance.iter().chain(&noise_variance).any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::Config("all variances must be strictly positive".into()));
        }
        Ok(Self { dim, regressor_variance, noise_variance })
    }

    /// Draws σ²_{u,n} ~ U[regressor] and σ²_{z,n} ~ U[noise] for every node.
    pub fn draw<R: Rng + ?Sized>(
        num_nodes: usize,
        dim: usize,
        regressor: (f64, f64),
        noise: (f64, f64),
        rng: &mut R,
    ) -> Result<Self> {
        let uniform = |(lo, hi): (f64, f64)| {
            Uniform::new_inclusive(lo, hi).map_err(|e| Error::Config(format!("bad variance range [{lo}, {hi}]: {e}")))
        };
        let ru = uniform(regressor)?;
        let rz = uniform(noise)?;
        let regressor_variance = (0..num_nodes).map(|_| ru.sample(rng)).collect();
        let noise_variance = (0..num_nodes).map(|_| rz.sample(rng)).collect();
        Self::new(dim, regressor_variance, noise_variance)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_nodes(&self) -> usize {
        self.regressor_variance.len()
    }

    pub fn regressor_variance(&self, node: usize) -> f64 {
        self.regressor_variance[node]
    }

    pub fn noise_variance(&self, node: usize) -> f64 {
        self.noise_variance[node]
    }
}

/// One clean observation d = uᵀw° + z.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub d: f64,
    pub u: Vector,
    pub noise: f64,
}

impl Measurement {
    pub fn from_parts(u: Vector, target: &Vector, noise: f64) -> Self {
        let d = u.dot(target) + noise;
        Self { d, u, noise }
    }
}

/// Draws u ~ N(0, σ²_u I_L), z ~ N(0, σ²_z) and returns d = uᵀ w_n° + z.
pub fn sample_measurement<R: Rng + ?Sized>(
    node: usize,
    truth: &GroundTruth,
    params: &SignalParams,
    rng: &mut R,
) -> Measurement {
    let su = params.regressor_variance(node).sqrt();
    let sz = params.noise_variance(node).sqrt();
    let u = Vector::from_fn(params.dim(), |_, _| su * rng.sample::<f64, _>(StandardNormal));
    let z = sz * rng.sample::<f64, _>(StandardNormal);
    Measurement::from_parts(u, truth.target(node), z)
}

/// Topology, signal model and targets of one experiment. Immutable and
/// shareable across concurrent runs.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub topology: Topology,
    pub signal: SignalParams,
    pub truth: GroundTruth,
}

impl Scenario {
    pub fn new(topology: Topology, signal: SignalParams, truth: GroundTruth) -> Result<Self> {
        if signal.num_nodes() != topology.num_nodes() {
            return Err(Error::Config(format!(
                "signal parameters cover {} nodes, topology has {}",
                signal.num_nodes(),
                topology.num_nodes()
            )));
        }
        if signal.dim() != truth.dim() {
            return Err(Error::DimensionMismatch { expected: signal.dim(), got: truth.dim() });
        }
        Ok(Self { topology, signal, truth })
    }

    pub fn num_nodes(&self) -> usize {
        self.topology.num_nodes()
    }

    pub fn dim(&self) -> usize {
        self.signal.dim()
    }

    /// The measurement of `node` at time `t` in run `run`; a pure function
    /// of `(root seed, run, node, t)`.
    pub fn measurement(&self, streams: &Streams, run: u64, node: usize, t: u64) -> Measurement {
        let mut rng = streams.node_stream(Purpose::Measurement, run, node, t);
        sample_measurement(node, &self.truth, &self.signal, &mut rng)
    }
}
