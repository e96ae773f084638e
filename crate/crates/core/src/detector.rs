//! Per-node attack detection over a memory window of trusted estimates.
//!
//! Each node keeps the intermediate estimates it accepted during the last
//! `le + 1` rounds. Incoming estimates are scored by a W-SVDD model trained
//! on that memory (centered on the memory mean); the model is only rebuilt
//! when the number of rejected senders in a round reaches the node's
//! threshold.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::wsvdd::{self, KernelParams, SolverOptions, WeightedSample, WsvddModel};
use crate::Vector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorParams {
    /// Sliding window length `le`; the memory holds `le + 1` rounds.
    pub window: usize,
    pub penalty: f64,
    pub kernel: KernelParams,
    /// Weight b of remembered (previously accepted) estimates.
    pub secure_weight: f64,
    /// Weight b of freshly received estimates.
    pub received_weight: f64,
    pub solver: SolverOptions,
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("secure", self.secure_weight), ("received", self.received_weight)] {
            if !(w > 0.0 && w <= 1.0) {
                return Err(Error::Config(format!("{name} weight must lie in (0, 1], got {w}")));
            }
        }
        if !(self.penalty > 0.0 && self.penalty.is_finite()) {
            return Err(Error::Config(format!("penalty must be positive, got {}", self.penalty)));
        }
        Ok(())
    }
}

/// A message as seen by the receiver: sender id and the (possibly tampered)
/// intermediate estimate.
pub type Received = (usize, Vector);

/// The last `le + 1` rounds of accepted estimates, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryWindow {
    capacity: usize,
    slices: VecDeque<Vec<Received>>,
}

impl MemoryWindow {
    pub fn new(window: usize) -> Self {
        Self { capacity: window + 1, slices: VecDeque::with_capacity(window + 2) }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, slice: Vec<Received>) {
        self.slices.push_back(slice);
        while self.slices.len() > self.capacity {
            self.slices.pop_front();
        }
    }

    pub fn slices(&self) -> impl Iterator<Item = &[Received]> {
        self.slices.iter().map(Vec::as_slice)
    }

    pub fn num_slices(&self) -> usize {
        self.slices.len()
    }

    pub fn vectors(&self) -> impl Iterator<Item = &Vector> {
        self.slices.iter().flatten().map(|(_, v)| v)
    }

    pub fn len(&self) -> usize {
        self.slices.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mean(&self) -> Option<Vector> {
        let mut it = self.vectors();
        let first = it.next()?.clone();
        let (sum, count) = it.fold((first, 1usize), |(acc, c), v| (acc + v, c + 1));
        Some(sum / count as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub samples: Vec<WeightedSample>,
    /// Mean of the memory vectors only; subtracted from every sample.
    pub mean: Vector,
}

/// Memory ∪ received, centered on the memory mean, with two-level weights.
pub fn build_training_set(memory: &MemoryWindow, received: &[Received], params: &DetectorParams) -> Result<TrainingSet> {
    let mean = memory.mean().ok_or(Error::EmptyMemory)?;
    let mut samples = Vec::with_capacity(memory.len() + received.len());
    for v in memory.vectors() {
        samples.push(WeightedSample::new(v - &mean, params.secure_weight)?);
    }
    for (_, v) in received {
        if v.len() != mean.len() {
            return Err(Error::DimensionMismatch { expected: mean.len(), got: v.len() });
        }
        samples.push(WeightedSample::new(v - &mean, params.received_weight)?);
    }
    Ok(TrainingSet { samples, mean })
}

pub fn train_on(set: TrainingSet, params: &DetectorParams) -> Result<WsvddModel> {
    let model = wsvdd::train(set.samples, params.penalty, params.kernel, &params.solver)?;
    Ok(model.with_centering_mean(set.mean))
}

/// The model in force since the last trigger, plus trigger bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct TriggerState {
    pub model: WsvddModel,
    pub threshold: f64,
    pub last_trigger: u64,
    pub event_count: u64,
}

impl TriggerState {
    /// mean(Ω) at the last trigger.
    pub fn stored_mean(&self) -> &Vector {
        self.model.centering_mean()
    }
}

/// Split of the polled senders into accepted (S⁺) and rejected (S⁻).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Verdicts {
    pub secure: Vec<usize>,
    pub flagged: Vec<usize>,
}

pub fn classify_with(model: &WsvddModel, received: &[Received]) -> Result<Verdicts> {
    let mut out = Verdicts::default();
    for (l, psi) in received {
        let centered = psi - model.centering_mean();
        if wsvdd::evaluate(model, &centered)?.is_outlier {
            out.flagged.push(*l);
        } else {
            out.secure.push(*l);
        }
    }
    Ok(out)
}

pub fn classify(state: &TriggerState, received: &[Received]) -> Result<Verdicts> {
    classify_with(&state.model, received)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetrainStatus {
    /// Fewer rejections than the threshold; the stored model was reused.
    Kept,
    /// The model was rebuilt and the round re-classified with it.
    Retrained,
    /// The trigger fired but memory ∪ received could not support a feasible
    /// problem; the stored model stays in force.
    Skipped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionOutcome {
    pub verdicts: Verdicts,
    pub status: RetrainStatus,
}

impl DetectionOutcome {
    pub fn retrained(&self) -> bool {
        self.status == RetrainStatus::Retrained
    }
}

/// Detector of one node.
#[derive(Debug, Clone)]
pub struct Detector {
    params: DetectorParams,
    threshold: f64,
    warmup_len: u64,
    memory: MemoryWindow,
    state: Option<TriggerState>,
}

impl Detector {
    pub fn new(params: DetectorParams, threshold: f64, warmup_len: u64) -> Self {
        Self {
            memory: MemoryWindow::new(params.window),
            params,
            threshold,
            warmup_len,
            state: None,
        }
    }

    pub fn params(&self) -> &DetectorParams {
        &self.params
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn memory(&self) -> &MemoryWindow {
        &self.memory
    }

    pub fn state(&self) -> Option<&TriggerState> {
        self.state.as_ref()
    }

    pub fn event_count(&self) -> u64 {
        self.state.as_ref().map_or(0, |s| s.event_count)
    }

    pub fn in_warmup(&self, t: u64) -> bool {
        t < self.warmup_len || self.state.is_none()
    }

    /// Runs one detection round at time `t`. `own` is the node's own
    /// intermediate estimate: never classified, always trusted, and part of
    /// both the training pool and the memory.
    pub fn step(&mut self, t: u64, own: &Received, received: &[Received]) -> Result<DetectionOutcome> {
        if t >= self.warmup_len && self.state.is_none() {
            self.bootstrap(t)?;
        }
        if self.state.is_none() {
            return Ok(DetectionOutcome { verdicts: self.warmup_step(own, received), status: RetrainStatus::Kept });
        }
        self.step_detection(t, own, received)
    }

    /// Accepts everything and stores it; no model exists yet.
    pub fn warmup_step(&mut self, own: &Received, received: &[Received]) -> Verdicts {
        let mut slice = Vec::with_capacity(received.len() + 1);
        slice.push(own.clone());
        slice.extend_from_slice(received);
        self.memory.push(slice);
        Verdicts { secure: received.iter().map(|(l, _)| *l).collect(), flagged: Vec::new() }
    }

    /// Trains the first model from memory alone. Leaves the detector in
    /// warm-up when memory cannot support a feasible problem yet.
    fn bootstrap(&mut self, t: u64) -> Result<()> {
        if self.memory.is_empty() {
            return Ok(());
        }
        let set = build_training_set(&self.memory, &[], &self.params)?;
        match train_on(set, &self.params) {
            Ok(model) => {
                self.state = Some(TriggerState { model, threshold: self.threshold, last_trigger: t, event_count: 0 });
                Ok(())
            }
            Err(Error::Infeasible { .. }) => Ok(()),
            Err(e) => Err(e),
        }
    }

    /// Classify with the stored model; rebuild it when |S⁻| ≥ θ. Either way
    /// the accepted estimates enter memory.
    pub fn step_detection(&mut self, t: u64, own: &Received, received: &[Received]) -> Result<DetectionOutcome> {
        let state = self.state.as_mut().ok_or(Error::EmptyMemory)?;
        let mut verdicts = classify(state, received)?;
        let mut status = RetrainStatus::Kept;

        if verdicts.flagged.len() as f64 >= state.threshold {
            status = RetrainStatus::Skipped;
            if !self.memory.is_empty() {
                let mut pool = Vec::with_capacity(received.len() + 1);
                pool.push(own.clone());
                pool.extend_from_slice(received);
                let set = build_training_set(&self.memory, &pool, &self.params)?;
                match train_on(set, &self.params) {
                    Ok(model) => {
                        state.model = model;
                        state.last_trigger = t;
                        state.event_count += 1;
                        verdicts = classify(state, received)?;
                        status = RetrainStatus::Retrained;
                    }
                    Err(Error::Infeasible { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
        }

        let mut accepted = Vec::with_capacity(verdicts.secure.len() + 1);
        accepted.push(own.clone());
        accepted.extend(received.iter().filter(|(l, _)| verdicts.secure.contains(l)).cloned());
        self.memory.push(accepted);
        Ok(DetectionOutcome { verdicts, status })
    }
}
