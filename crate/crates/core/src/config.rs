//! Experiment configuration (TOML). Node ids in files are 1-based.

use std::path::Path;

use serde::Deserialize;

use crate::attacks::{ActiveWindow, AttackKind, AttackPlan, Perturbation, Targets};
use crate::detector::DetectorParams;
use crate::diffusion::{AdaptWeights, AlgoParams, Algorithm, DetectionMode, ThresholdRule};
use crate::error::{Error, Result};
use crate::rng::{Purpose, Streams};
use crate::scenario::{build_topology, make_ground_truth, GroundTruth, Scenario, SignalParams, TopologySpec};
use crate::wsvdd::{KernelParams, SolverOptions};
use crate::Vector;

/// The reference experiment: 15 nodes in three clusters.
pub const REFERENCE_TOML: &str = include_str!("../configs/reference.toml");

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    #[serde(default = "one")]
    pub runs: u64,
    pub iterations: u64,
    #[serde(default = "default_algorithm")]
    pub algorithm: AlgorithmName,
    /// Worker threads; 0 uses every available core.
    #[serde(default)]
    pub workers: usize,
    pub topology: TopologySection,
    pub signal: SignalSection,
    pub truth: TruthSection,
    pub params: ParamsSection,
    #[serde(default)]
    pub detector: DetectorSection,
    #[serde(default)]
    pub attack: AttackSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn one() -> u64 {
    1
}

fn default_algorithm() -> AlgorithmName {
    AlgorithmName::Proposed
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmName {
    Proposed,
    Mdlms,
    Nclms,
}

impl From<AlgorithmName> for Algorithm {
    fn from(a: AlgorithmName) -> Self {
        match a {
            AlgorithmName::Proposed => Algorithm::Proposed,
            AlgorithmName::Mdlms => Algorithm::Mdlms,
            AlgorithmName::Nclms => Algorithm::Nclms,
        }
    }
}

impl std::str::FromStr for AlgorithmName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(Self::Proposed),
            "mdlms" => Ok(Self::Mdlms),
            "nclms" => Ok(Self::Nclms),
            _ => Err(Error::Config(format!("unknown algorithm '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    pub nodes: usize,
    pub clusters: Vec<Vec<usize>>,
    #[serde(default)]
    pub edges: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSection {
    pub dim: usize,
    #[serde(default = "default_regressor_range")]
    pub regressor_variance_range: [f64; 2],
    #[serde(default = "default_noise_range")]
    pub noise_variance_range: [f64; 2],
    /// Per-node overrides; when present, must list every node.
    pub regressor_variance: Option<Vec<f64>>,
    pub noise_variance: Option<Vec<f64>>,
}

fn default_regressor_range() -> [f64; 2] {
    [0.8, 1.2]
}

fn default_noise_range() -> [f64; 2] {
    [0.01, 0.04]
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthSection {
    #[serde(default)]
    pub base: Vec<f64>,
    #[serde(default)]
    pub similarity_radius: f64,
    /// Explicit per-cluster targets; overrides base and radius.
    pub targets: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdaptWeightsName {
    Identity,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectionName {
    Wsvdd,
    AcceptAll,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdName {
    PolledHalf,
    PeersHalf,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub step_size: f64,
    pub regularization: f64,
    #[serde(default = "unit")]
    pub ratio: f64,
    /// c_ln of the M-DLMS baseline.
    #[serde(default = "default_adapt")]
    pub adapt_weights: AdaptWeightsName,
    #[serde(default = "default_detection")]
    pub detection: DetectionName,
    #[serde(default = "default_threshold")]
    pub threshold_rule: ThresholdName,
    /// Defaults to window + 1.
    pub warmup: Option<u64>,
}

fn unit() -> f64 {
    1.0
}

fn default_adapt() -> AdaptWeightsName {
    AdaptWeightsName::Uniform
}

fn default_detection() -> DetectionName {
    DetectionName::Wsvdd
}

fn default_threshold() -> ThresholdName {
    ThresholdName::PolledHalf
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorSection {
    pub window: usize,
    pub penalty: f64,
    pub gamma: f64,
    pub secure_weight: f64,
    pub received_weight: f64,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for DetectorSection {
    fn default() -> Self {
        Self {
            window: 2,
            penalty: 0.4,
            gamma: 50.0,
            secure_weight: 0.9,
            received_weight: 0.4,
            tol: 1e-6,
            max_sweeps: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackName {
    None,
    Fdi,
    Link,
    Both,
}

impl From<AttackName> for AttackKind {
    fn from(a: AttackName) -> Self {
        match a {
            AttackName::None => AttackKind::None,
            AttackName::Fdi => AttackKind::Fdi,
            AttackName::Link => AttackKind::Link,
            AttackName::Both => AttackKind::Both,
        }
    }
}

impl std::str::FromStr for AttackName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "fdi" => Ok(Self::Fdi),
            "link" => Ok(Self::Link),
            "both" => Ok(Self::Both),
            _ => Err(Error::Config(format!("unknown attack '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackSection {
    pub kind: AttackName,
    /// Fixed attacked nodes; ignored when `count` is set.
    pub nodes: Vec<usize>,
    pub candidates: Vec<usize>,
    pub count: Option<usize>,
    /// Additional compromised directed links (sender, receiver).
    pub links: Vec<[usize; 2]>,
    pub fdi_variance: f64,
    pub link_variance: f64,
    pub onset: u64,
    pub end: Option<u64>,
}

impl Default for AttackSection {
    fn default() -> Self {
        Self {
            kind: AttackName::None,
            nodes: Vec::new(),
            candidates: Vec::new(),
            count: None,
            links: Vec::new(),
            fdi_variance: 3.0,
            link_variance: 0.5,
            onset: 0,
            end: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
    /// Write the long per-(run, t, node) trace.
    pub trace: bool,
    /// Steps averaged for the steady-state MSD.
    pub steady_window: u64,
    /// First step counted in the detection tallies.
    pub detection_start: u64,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into(), trace: false, steady_window: 200, detection_start: 0 }
    }
}

/// Everything a Monte Carlo experiment needs, resolved and validated.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub scenario: Scenario,
    pub plan: AttackPlan,
    pub algorithm: Algorithm,
    pub params: AlgoParams,
    pub streams: Streams,
    pub runs: u64,
    pub iterations: u64,
    pub workers: usize,
    pub output: OutputSection,
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn reference() -> Self {
        Self::from_toml(REFERENCE_TOML).expect("reference config parses")
    }

    pub fn topology_spec(&self) -> Result<TopologySpec> {
        let n = self.topology.nodes;
        let idx = |id: usize, what: &str| -> Result<usize> {
            if id == 0 || id > n {
                Err(Error::Config(format!("{what} refers to node {id}, valid ids are 1..={n}")))
            } else {
                Ok(id - 1)
            }
        };
        let clusters = self
            .topology
            .clusters
            .iter()
            .map(|c| c.iter().map(|&id| idx(id, "cluster")).collect())
            .collect::<Result<_>>()?;
        let edges = self
            .topology
            .edges
            .iter()
            .map(|[a, b]| Ok((idx(*a, "edge")?, idx(*b, "edge")?)))
            .collect::<Result<_>>()?;
        Ok(TopologySpec { num_nodes: n, edges, clusters })
    }

    pub fn detector_params(&self) -> Result<DetectorParams> {
        let d = &self.detector;
        let params = DetectorParams {
            window: d.window,
            penalty: d.penalty,
            kernel: KernelParams::new(d.gamma)?,
            secure_weight: d.secure_weight,
            received_weight: d.received_weight,
            solver: SolverOptions { tol: d.tol, max_sweeps: d.max_sweeps, record_objective: false },
        };
        params.validate()?;
        Ok(params)
    }

    pub fn algo_params(&self) -> Result<AlgoParams> {
        let p = &self.params;
        let params = AlgoParams {
            step_size: p.step_size,
            regularization: p.regularization,
            ratio: p.ratio,
            adapt_weights: match p.adapt_weights {
                AdaptWeightsName::Identity => AdaptWeights::Identity,
                AdaptWeightsName::Uniform => AdaptWeights::Uniform,
            },
            detection: match p.detection {
                DetectionName::Wsvdd => DetectionMode::Wsvdd,
                DetectionName::AcceptAll => DetectionMode::AcceptAll,
            },
            threshold_rule: match p.threshold_rule {
                ThresholdName::PolledHalf => ThresholdRule::PolledHalf,
                ThresholdName::PeersHalf => ThresholdRule::PeersHalf,
            },
            detector: self.detector_params()?,
            warmup: p.warmup.unwrap_or(self.detector.window as u64 + 1),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn attack_plan(&self) -> Result<AttackPlan> {
        let a = &self.attack;
        let n = self.topology.nodes;
        let zero_based = |ids: &[usize]| -> Result<Vec<usize>> {
            ids.iter()
                .map(|&id| {
                    if id == 0 || id > n {
                        Err(Error::Config(format!("attack refers to node {id}, valid ids are 1..={n}")))
                    } else {
                        Ok(id - 1)
                    }
                })
                .collect()
        };
        let targets = match a.count {
            Some(count) => Targets::Random { candidates: zero_based(&a.candidates)?, count },
            None => Targets::Fixed(zero_based(&a.nodes)?),
        };
        let mut extra_links = Vec::with_capacity(a.links.len());
        for [s, r] in &a.links {
            let v = zero_based(&[*s, *r])?;
            extra_links.push((v[0], v[1]));
        }
        if let Some(end) = a.end {
            if end <= a.onset {
                return Err(Error::Config(format!("attack end {end} must follow onset {}", a.onset)));
            }
        }
        for (name, var) in [("fdi", a.fdi_variance), ("link", a.link_variance)] {
            if !(var >= 0.0 && var.is_finite()) {
                return Err(Error::Config(format!("{name} variance must be nonnegative, got {var}")));
            }
        }
        Ok(AttackPlan {
            kind: a.kind.into(),
            targets,
            extra_links,
            fdi: Perturbation::Gaussian { variance: a.fdi_variance },
            link: Perturbation::Gaussian { variance: a.link_variance },
            window: ActiveWindow { start: a.onset, end: a.end },
        })
    }

    /// Topology, variances and targets. Random parts are drawn once per
    /// experiment from the root seed.
    pub fn scenario(&self) -> Result<Scenario> {
        let topology = build_topology(&self.topology_spec()?)?;
        let n = topology.num_nodes();
        let streams = Streams::new(self.seed);
        let s = &self.signal;
        if s.dim == 0 {
            return Err(Error::Config("signal dimension must be positive".into()));
        }
        let mut rng = streams.stream(Purpose::Signal, 0, 0, 0, 0);
        let [ru, rz] = [s.regressor_variance_range, s.noise_variance_range];
        let drawn = SignalParams::draw(n, s.dim, (ru[0], ru[1]), (rz[0], rz[1]), &mut rng)?;
        let pick = |over: &Option<Vec<f64>>, what: &str, fallback: Vec<f64>| -> Result<Vec<f64>> {
            match over {
                Some(v) if v.len() != n => {
                    Err(Error::Config(format!("{what} lists {} values for {n} nodes", v.len())))
                }
                Some(v) => Ok(v.clone()),
                None => Ok(fallback),
            }
        };
        let regressor = pick(&s.regressor_variance, "regressor_variance", (0..n).map(|k| drawn.regressor_variance(k)).collect())?;
        let noise = pick(&s.noise_variance, "noise_variance", (0..n).map(|k| drawn.noise_variance(k)).collect())?;
        let signal = SignalParams::new(s.dim, regressor, noise)?;

        let truth = match &self.truth.targets {
            Some(targets) => {
                let targets = targets.iter().map(|t| Vector::from_vec(t.clone())).collect();
                GroundTruth::from_cluster_targets(&topology, targets)?
            }
            None => {
                if self.truth.base.len() != s.dim {
                    return Err(Error::DimensionMismatch { expected: s.dim, got: self.truth.base.len() });
                }
                let mut rng = streams.stream(Purpose::GroundTruth, 0, 0, 0, 0);
                let base = Vector::from_vec(self.truth.base.clone());
                make_ground_truth(&topology, &base, self.truth.similarity_radius, &mut rng)?
            }
        };
        Scenario::new(topology, signal, truth)
    }

    /// Validates every section and resolves the experiment.
    pub fn build(&self) -> Result<Experiment> {
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        let scenario = self.scenario()?;
        let plan = self.attack_plan()?;
        let streams = Streams::new(self.seed);
        // surfaces bad targets before any run starts
        plan.resolve(&scenario.topology, &streams, 0)?;
        Ok(Experiment {
            plan,
            algorithm: self.algorithm.into(),
            params: self.algo_params()?,
            streams,
            runs: self.runs,
            iterations: self.iterations,
            workers: self.workers,
            output: self.output.clone(),
            scenario,
        })
    }
}
