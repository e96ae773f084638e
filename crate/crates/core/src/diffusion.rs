//! Clustered multi-task diffusion LMS: the resilient, reputation-gated
//! variant and the two baselines it is compared against.

use crate::attacks::{corrupt_measurement_keyed, corrupt_message_keyed, AttackSchedule};
use crate::detector::{Detector, DetectorParams, Received, RetrainStatus, Verdicts};
use crate::error::{Error, Result};
use crate::reputation::{selection_size, ReputationLedger};
use crate::rng::Streams;
use crate::scenario::{Scenario, Topology};
use crate::Vector;

/// ‖w‖ beyond which a run is declared divergent.
pub const DIVERGENCE_NORM: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// Adapt, select partners, communicate, detect, combine.
    Proposed,
    /// Unprotected clustered multi-task ATC diffusion.
    Mdlms,
    /// Stand-alone LMS at every node, no communication.
    Nclms,
}

/// Adaptation fusion weights c_ln over N_n^+.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdaptWeights {
    /// c_nn = 1: each node adapts on its own data only.
    Identity,
    /// c_ln = 1 / |N_n^+|.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectionMode {
    Wsvdd,
    /// Every polled neighbor is accepted.
    AcceptAll,
}

/// How a node's retraining threshold θ_n is derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdRule {
    /// Half the number of neighbors polled per round, round(p·k)/2.
    PolledHalf,
    /// Half the number of same-cluster neighbors, k/2, whatever p is.
    PeersHalf,
}

impl ThresholdRule {
    pub fn threshold(self, ratio: f64, num_peers: usize) -> f64 {
        match self {
            ThresholdRule::PolledHalf => selection_size(ratio, num_peers) as f64 / 2.0,
            ThresholdRule::PeersHalf => num_peers as f64 / 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgoParams {
    pub step_size: f64,
    pub regularization: f64,
    /// Fraction p of same-cluster neighbors polled per round.
    pub ratio: f64,
    /// Used by the M-DLMS baseline; the proposed algorithm always adapts on
    /// its own data.
    pub adapt_weights: AdaptWeights,
    pub detection: DetectionMode,
    pub threshold_rule: ThresholdRule,
    pub detector: DetectorParams,
    /// Rounds during which detectors accept everything to fill memory.
    pub warmup: u64,
}

impl AlgoParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size >= 0.0 && self.step_size.is_finite()) {
            return Err(Error::Config(format!("step size must be nonnegative, got {}", self.step_size)));
        }
        if !(self.regularization >= 0.0 && self.regularization.is_finite()) {
            return Err(Error::Config(format!("regularization must be nonnegative, got {}", self.regularization)));
        }
        if !(self.ratio > 0.0 && self.ratio <= 1.0) {
            return Err(Error::Config(format!("communication ratio must lie in (0, 1], got {}", self.ratio)));
        }
        self.detector.validate()
    }
}

/// Uniform inter-cluster weights ρ_nk = 1 / |N_n^-|.
pub fn inter_cluster_weights(topology: &Topology) -> Vec<Vec<(usize, f64)>> {
    (0..topology.num_nodes())
        .map(|n| {
            let others = topology.other_cluster(n);
            let rho = 1.0 / others.len() as f64;
            others.iter().map(|&k| (k, rho)).collect()
        })
        .collect()
}

/// Adaptation fusion weights c_ln for node `n`, as `(l, c_ln)` over N_n^+.
pub fn adapt_weights(topology: &Topology, n: usize, rule: AdaptWeights) -> Vec<(usize, f64)> {
    match rule {
        AdaptWeights::Identity => vec![(n, 1.0)],
        AdaptWeights::Uniform => {
            let hood = topology.same_cluster(n);
            let c = 1.0 / hood.len() as f64;
            hood.iter().map(|&l| (l, c)).collect()
        }
    }
}

/// One term c_ln · (d_l, u_l) of the adaptation gradient.
#[derive(Debug, Clone, Copy)]
pub struct WeightedData<'a> {
    pub weight: f64,
    pub d: f64,
    pub u: &'a Vector,
}

/// ψ = w + μ Σ c_l (d_l − u_lᵀw) u_l + μη Σ ρ_k (w_k − w).
pub fn adapt_weighted(
    w: &Vector,
    data: &[WeightedData<'_>],
    cross: &[(f64, &Vector)],
    step_size: f64,
    regularization: f64,
) -> Result<Vector> {
    let mut grad = Vector::zeros(w.len());
    for term in data {
        if term.u.len() != w.len() {
            return Err(Error::DimensionMismatch { expected: w.len(), got: term.u.len() });
        }
        let err = term.d - term.u.dot(w);
        grad.axpy(term.weight * err, term.u, 1.0);
    }
    let mut reg = Vector::zeros(w.len());
    for &(rho, wk) in cross {
        if wk.len() != w.len() {
            return Err(Error::DimensionMismatch { expected: w.len(), got: wk.len() });
        }
        reg.axpy(rho, &(wk - w), 1.0);
    }
    let psi = w + grad * step_size + reg * (step_size * regularization);
    if psi.iter().all(|x| x.is_finite()) {
        Ok(psi)
    } else {
        Err(Error::Diverged { node: usize::MAX, t: 0 })
    }
}

/// Adaptation on the node's own data only.
pub fn adapt(w: &Vector, d: f64, u: &Vector, cross: &[(f64, &Vector)], step_size: f64, regularization: f64) -> Result<Vector> {
    adapt_weighted(w, &[WeightedData { weight: 1.0, d, u }], cross, step_size, regularization)
}

/// Uniform average of the node's own ψ and the accepted ones.
pub fn combine(own: &Vector, accepted: &[&Vector]) -> Vector {
    let mut sum = own.clone();
    for v in accepted {
        sum += *v;
    }
    sum / (accepted.len() + 1) as f64
}

/// Mutable state of one node.
#[derive(Debug, Clone)]
pub struct NodeState {
    pub w: Vector,
    pub psi: Vector,
    pub detector: Detector,
    pub ledger: ReputationLedger,
}

/// What one node did in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeStep {
    pub node: usize,
    /// ‖w_n° − w_{n,t+1}‖².
    pub sq_err: f64,
    /// B⁺: neighbors whose estimate was requested (= messages received).
    pub polled: Vec<usize>,
    pub verdicts: Verdicts,
    pub retrain: RetrainStatus,
}

impl NodeStep {
    pub fn messages(&self) -> usize {
        self.polled.len()
    }

    pub fn retrained(&self) -> bool {
        self.retrain == RetrainStatus::Retrained
    }
}

/// One Monte Carlo realization of a network running a given algorithm.
pub struct Network<'a> {
    scenario: &'a Scenario,
    schedule: AttackSchedule,
    algorithm: Algorithm,
    params: AlgoParams,
    streams: Streams,
    run: u64,
    t: u64,
    inter: Vec<Vec<(usize, f64)>>,
    nodes: Vec<NodeState>,
}

impl<'a> Network<'a> {
    /// Starts every node at w = 0.
    pub fn new(
        scenario: &'a Scenario,
        schedule: AttackSchedule,
        algorithm: Algorithm,
        params: AlgoParams,
        streams: Streams,
        run: u64,
    ) -> Result<Self> {
        params.validate()?;
        let topology = &scenario.topology;
        let dim = scenario.dim();
        let nodes = (0..scenario.num_nodes())
            .map(|n| {
                let k = topology.num_peers(n);
                let threshold = params.threshold_rule.threshold(params.ratio, k);
                NodeState {
                    w: Vector::zeros(dim),
                    psi: Vector::zeros(dim),
                    detector: Detector::new(params.detector, threshold, params.warmup),
                    ledger: ReputationLedger::new(n, topology.peers(n), params.detector.window),
                }
            })
            .collect();
        Ok(Self {
            inter: inter_cluster_weights(topology),
            scenario,
            schedule,
            algorithm,
            params,
            streams,
            run,
            t: 0,
            nodes,
        })
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn schedule(&self) -> &AttackSchedule {
        &self.schedule
    }

    pub fn estimates(&self) -> impl Iterator<Item = &Vector> {
        self.nodes.iter().map(|s| &s.w)
    }

    /// col{w_n − w_n°}.
    pub fn error_vector(&self) -> Vector {
        let dim = self.scenario.dim();
        Vector::from_fn(dim * self.nodes.len(), |i, _| self.nodes[i / dim].w[i % dim] - self.scenario.truth.target(i / dim)[i % dim])
    }

    /// Advances one synchronous round, t → t + 1.
    pub fn step(&mut self) -> Result<Vec<NodeStep>> {
        let steps = match self.algorithm {
            Algorithm::Proposed => self.step_proposed()?,
            Algorithm::Mdlms => self.step_baseline_mdlms()?,
            Algorithm::Nclms => self.step_baseline_nclms()?,
        };
        self.t += 1;
        Ok(steps)
    }

    fn measurements(&self) -> Vec<(f64, Vector)> {
        (0..self.nodes.len())
            .map(|n| {
                let m = self.scenario.measurement(&self.streams, self.run, n, self.t);
                let d = corrupt_measurement_keyed(&self.streams, self.run, n, self.t, m.d, &m.u, &self.schedule);
                (d, m.u)
            })
            .collect()
    }

    fn cross_terms(&self, n: usize) -> Vec<(f64, &Vector)> {
        self.inter[n].iter().map(|&(k, rho)| (rho, &self.nodes[k].w)).collect()
    }

    fn diverged(&self, n: usize) -> Error {
        Error::Diverged { node: n, t: self.t }
    }

    /// Every node adapts from round-t values; ψ is stored on the node.
    fn adapt_all(&mut self, data: &[(f64, Vector)], weights: Option<AdaptWeights>) -> Result<()> {
        let (mu, eta) = (self.params.step_size, self.params.regularization);
        let topology = &self.scenario.topology;
        let mut psis = Vec::with_capacity(self.nodes.len());
        for n in 0..self.nodes.len() {
            let cross = self.cross_terms(n);
            let psi = match weights {
                None => adapt(&self.nodes[n].w, data[n].0, &data[n].1, &cross, mu, eta),
                Some(rule) => {
                    let terms: Vec<WeightedData> = adapt_weights(topology, n, rule)
                        .into_iter()
                        .map(|(l, c)| WeightedData { weight: c, d: data[l].0, u: &data[l].1 })
                        .collect();
                    adapt_weighted(&self.nodes[n].w, &terms, &cross, mu, eta)
                }
            }
            .map_err(|_| self.diverged(n))?;
            psis.push(psi);
        }
        for (node, psi) in self.nodes.iter_mut().zip(psis) {
            node.psi = psi;
        }
        Ok(())
    }

    fn deliver(&self, receiver: usize, senders: &[usize]) -> Vec<Received> {
        senders
            .iter()
            .map(|&l| {
                let psi = corrupt_message_keyed(&self.streams, self.run, l, receiver, self.t, &self.nodes[l].psi, &self.schedule);
                (l, psi)
            })
            .collect()
    }

    fn finish(&mut self, n: usize, w: Vector) -> Result<f64> {
        let norm = w.norm();
        if !norm.is_finite() || norm > DIVERGENCE_NORM {
            return Err(self.diverged(n));
        }
        let sq_err = (self.scenario.truth.target(n) - &w).norm_squared();
        self.nodes[n].w = w;
        Ok(sq_err)
    }

    pub fn step_proposed(&mut self) -> Result<Vec<NodeStep>> {
        let data = self.measurements();
        self.adapt_all(&data, None)?;

        let t = self.t;
        let n_nodes = self.nodes.len();
        let mut next = Vec::with_capacity(n_nodes);
        let mut records = Vec::with_capacity(n_nodes);
        for n in 0..n_nodes {
            let selection = self.nodes[n].ledger.select_partners(self.params.ratio);
            let received = self.deliver(n, &selection.polled);
            let outcome = match self.params.detection {
                DetectionMode::Wsvdd => {
                    let own = (n, self.nodes[n].psi.clone());
                    self.nodes[n].detector.step(t, &own, &received)?
                }
                DetectionMode::AcceptAll => crate::detector::DetectionOutcome {
                    verdicts: Verdicts { secure: selection.polled.clone(), flagged: Vec::new() },
                    status: RetrainStatus::Kept,
                },
            };
            self.nodes[n]
                .ledger
                .record(&outcome.verdicts.secure, &outcome.verdicts.flagged, &selection.unpolled)?;
            let accepted: Vec<&Vector> = received
                .iter()
                .filter(|(l, _)| outcome.verdicts.secure.contains(l))
                .map(|(_, v)| v)
                .collect();
            next.push(combine(&self.nodes[n].psi, &accepted));
            records.push(NodeStep {
                node: n,
                sq_err: 0.0,
                polled: selection.polled,
                verdicts: outcome.verdicts,
                retrain: outcome.status,
            });
        }
        for (n, w) in next.into_iter().enumerate() {
            records[n].sq_err = self.finish(n, w)?;
        }
        Ok(records)
    }

    pub fn step_baseline_mdlms(&mut self) -> Result<Vec<NodeStep>> {
        let data = self.measurements();
        self.adapt_all(&data, Some(self.params.adapt_weights))?;

        let n_nodes = self.nodes.len();
        let mut next = Vec::with_capacity(n_nodes);
        let mut records = Vec::with_capacity(n_nodes);
        for n in 0..n_nodes {
            let peers: Vec<usize> = self.scenario.topology.peers(n).collect();
            let received = self.deliver(n, &peers);
            let pool: Vec<&Vector> = received.iter().map(|(_, v)| v).collect();
            next.push(combine(&self.nodes[n].psi, &pool));
            records.push(NodeStep {
                node: n,
                sq_err: 0.0,
                verdicts: Verdicts { secure: peers.clone(), flagged: Vec::new() },
                polled: peers,
                retrain: RetrainStatus::Kept,
            });
        }
        for (n, w) in next.into_iter().enumerate() {
            records[n].sq_err = self.finish(n, w)?;
        }
        Ok(records)
    }

    pub fn step_baseline_nclms(&mut self) -> Result<Vec<NodeStep>> {
        let data = self.measurements();
        let mu = self.params.step_size;
        let mut records = Vec::with_capacity(self.nodes.len());
        for (n, (d, u)) in data.iter().enumerate() {
            let psi = adapt(&self.nodes[n].w, *d, u, &[], mu, 0.0).map_err(|_| self.diverged(n))?;
            self.nodes[n].psi = psi.clone();
            let sq_err = self.finish(n, psi)?;
            records.push(NodeStep {
                node: n,
                sq_err,
                polled: Vec::new(),
                verdicts: Verdicts::default(),
                retrain: RetrainStatus::Kept,
            });
        }
        Ok(records)
    }
}
