//! Monte Carlo orchestration, metrics and CSV output.
//!
//! Runs are independent and keyed by their index, so they can be spread
//! over any number of workers; results are folded in run order, which keeps
//! every aggregate (and every CSV byte) independent of the worker count.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::NetworkMatrices;
use crate::attacks::AttackSchedule;
use crate::config::Experiment;
use crate::diffusion::{AdaptWeights, Network, NodeStep};
use crate::error::{Error, Result};
use crate::Vector;

/// One row of the long trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub run: u64,
    /// Round index; the row describes the state after round `t`.
    pub t: u64,
    /// 1-based node id.
    pub node: usize,
    pub sq_err: f64,
    pub s_plus: usize,
    pub s_minus: usize,
    pub retrained: bool,
    pub b_plus: usize,
    /// Messages this node sent (how many neighbors polled it).
    pub sent: usize,
}

/// Detection outcomes over polled messages, split by whether the message
/// was compromised.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DetectionTally {
    pub attacked_polled: u64,
    pub attacked_flagged: u64,
    pub secure_polled: u64,
    pub secure_flagged: u64,
}

impl DetectionTally {
    fn add(&mut self, o: &DetectionTally) {
        self.attacked_polled += o.attacked_polled;
        self.attacked_flagged += o.attacked_flagged;
        self.secure_polled += o.secure_polled;
        self.secure_flagged += o.secure_flagged;
    }

    pub fn detection_rate(&self) -> Option<f64> {
        (self.attacked_polled > 0).then(|| self.attacked_flagged as f64 / self.attacked_polled as f64)
    }

    pub fn false_positive_rate(&self) -> Option<f64> {
        (self.secure_polled > 0).then(|| self.secure_flagged as f64 / self.secure_polled as f64)
    }
}

/// Everything kept from a single run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub run: u64,
    pub schedule: AttackSchedule,
    /// Σ_n ‖w_n° − w_{n,t}‖² for t = 0..=T.
    pub sq_err: Vec<f64>,
    /// Time-summed ‖w_n° − w_{n,t}‖² over the steady-state window, per node.
    pub steady_node_err: Vec<f64>,
    pub events: Vec<u64>,
    pub messages: Vec<u64>,
    pub max_messages: Vec<usize>,
    pub detection: DetectionTally,
    /// Per-node attacked-sender tallies: (polled, flagged) as a sender.
    pub attacked_sender: Vec<(u64, u64)>,
    pub final_error: Vector,
    pub trace: Vec<TraceRecord>,
}

/// Aggregates over all runs.
#[derive(Debug, Clone)]
pub struct MonteCarloResult {
    pub runs: u64,
    pub iterations: u64,
    pub num_nodes: usize,
    pub steady_window: u64,
    /// Mean over runs and nodes of ‖w_n° − w_{n,t}‖², t = 0..=T.
    pub msd_linear: Vec<f64>,
    /// Mean steady-state squared error per node.
    pub steady_node_msd: Vec<f64>,
    /// Retraining events per node, averaged over runs.
    pub events_per_node: Vec<f64>,
    /// Messages received per step, per node, averaged over runs and steps.
    pub messages_per_step: Vec<f64>,
    pub max_messages: Vec<usize>,
    /// round(p·k) for each node.
    pub message_bound: Vec<usize>,
    /// Σ_n k_n · T · R: the load of polling every neighbor every round.
    pub full_load: u64,
    pub total_messages: u64,
    pub detection: DetectionTally,
    /// Per-run sender-side tallies, used to derive per-attacked-node rates.
    pub attacked_sender: Vec<Vec<(u64, u64)>>,
    pub schedules: Vec<AttackSchedule>,
    pub final_errors: Vec<Vector>,
    pub trace: Vec<TraceRecord>,
}

pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// dB value as written to CSV; exact zero becomes `-inf`.
pub fn format_db(linear: f64) -> String {
    if linear == 0.0 {
        "-inf".to_string()
    } else {
        to_db(linear).to_string()
    }
}

impl MonteCarloResult {
    /// (t, linear, dB) for t = 0..=T.
    pub fn msd_curve(&self) -> Vec<(u64, f64, f64)> {
        self.msd_linear.iter().enumerate().map(|(t, &m)| (t as u64, m, to_db(m))).collect()
    }

    /// Linear MSD averaged over the last `steady_window` rounds, in dB.
    pub fn steady_state_db(&self) -> f64 {
        let w = (self.steady_window as usize).clamp(1, self.iterations as usize);
        let tail = &self.msd_linear[self.msd_linear.len() - w..];
        to_db(tail.iter().sum::<f64>() / w as f64)
    }

    /// Network-average retraining events per node.
    pub fn average_events(&self) -> f64 {
        count_events(&self.events_per_node)
    }

    /// Total messages relative to polling every neighbor every round.
    pub fn load_fraction(&self) -> f64 {
        if self.full_load == 0 {
            return 0.0;
        }
        self.total_messages as f64 / self.full_load as f64
    }

    /// Mean final error vector and its standard error, per component.
    pub fn final_error_stats(&self) -> (Vector, Vector) {
        let r = self.final_errors.len() as f64;
        let dim = self.final_errors[0].len();
        let mut mean = Vector::zeros(dim);
        for e in &self.final_errors {
            mean += e;
        }
        mean /= r;
        let mut var = Vector::zeros(dim);
        for e in &self.final_errors {
            let d = e - &mean;
            var += d.component_mul(&d);
        }
        let denom = (r - 1.0).max(1.0);
        let se = var.map(|v| (v / denom / r).sqrt());
        (mean, se)
    }
}

/// Network average of per-node event counts.
pub fn count_events(per_node: &[f64]) -> f64 {
    if per_node.is_empty() {
        return 0.0;
    }
    per_node.iter().sum::<f64>() / per_node.len() as f64
}

/// Runs realization `run` of the experiment.
pub fn simulate_run(exp: &Experiment, run: u64, record_trace: bool) -> Result<RunSummary> {
    let topo = &exp.scenario.topology;
    let n = topo.num_nodes();
    let t_total = exp.iterations;
    let schedule = exp.plan.resolve(topo, &exp.streams, run)?;
    let mut net = Network::new(&exp.scenario, schedule.clone(), exp.algorithm, exp.params.clone(), exp.streams, run)?;

    let steady_from = t_total.saturating_sub(exp.output.steady_window.max(1)) + 1;
    let initial: f64 = exp.scenario.truth.node_targets().iter().map(|w| w.norm_squared()).sum();
    let mut sq_err = Vec::with_capacity(t_total as usize + 1);
    sq_err.push(initial);
    let mut summary = RunSummary {
        run,
        schedule,
        sq_err: Vec::new(),
        steady_node_err: vec![0.0; n],
        events: vec![0; n],
        messages: vec![0; n],
        max_messages: vec![0; n],
        detection: DetectionTally::default(),
        attacked_sender: vec![(0, 0); n],
        final_error: Vector::zeros(0),
        trace: Vec::new(),
    };

    for _ in 0..t_total {
        let t = net.t();
        let steps = net.step().map_err(|e| Error::Run { run, source: Box::new(e) })?;
        sq_err.push(steps.iter().map(|s| s.sq_err).sum());
        tally_round(&mut summary, &steps, t, exp.output.detection_start);
        if t + 1 >= steady_from {
            for s in &steps {
                summary.steady_node_err[s.node] += s.sq_err;
            }
        }
        if record_trace {
            let mut sent = vec![0usize; n];
            for s in &steps {
                for &l in &s.polled {
                    sent[l] += 1;
                }
            }
            summary.trace.extend(steps.iter().map(|s| TraceRecord {
                run,
                t: t + 1,
                node: s.node + 1,
                sq_err: s.sq_err,
                s_plus: s.verdicts.secure.len(),
                s_minus: s.verdicts.flagged.len(),
                retrained: s.retrained(),
                b_plus: s.polled.len(),
                sent: sent[s.node],
            }));
        }
    }
    summary.sq_err = sq_err;
    summary.final_error = net.error_vector();
    Ok(summary)
}

fn tally_round(summary: &mut RunSummary, steps: &[NodeStep], t: u64, detection_start: u64) {
    for s in steps {
        let k = s.node;
        if s.retrained() {
            summary.events[k] += 1;
        }
        summary.messages[k] += s.messages() as u64;
        summary.max_messages[k] = summary.max_messages[k].max(s.messages());
        if t < detection_start {
            continue;
        }
        for &l in &s.polled {
            let flagged = s.verdicts.flagged.contains(&l);
            if summary.schedule.message_compromised(l, k, t) {
                summary.detection.attacked_polled += 1;
                summary.detection.attacked_flagged += flagged as u64;
                summary.attacked_sender[l].0 += 1;
                summary.attacked_sender[l].1 += flagged as u64;
            } else {
                summary.detection.secure_polled += 1;
                summary.detection.secure_flagged += flagged as u64;
            }
        }
    }
}

/// Runs every realization on `exp.workers` threads (0 = all cores).
pub fn run_monte_carlo(exp: &Experiment) -> Result<MonteCarloResult> {
    let record = exp.output.trace;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(exp.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let summaries: Vec<RunSummary> =
        pool.install(|| (0..exp.runs).into_par_iter().map(|r| simulate_run(exp, r, record)).collect::<Result<_>>())?;
    Ok(aggregate(exp, summaries))
}

/// Folds run summaries in run order.
pub fn aggregate(exp: &Experiment, summaries: Vec<RunSummary>) -> MonteCarloResult {
    let topo = &exp.scenario.topology;
    let n = topo.num_nodes();
    let t_total = exp.iterations;
    let r = summaries.len() as f64;
    let window = exp.output.steady_window.clamp(1, t_total) as f64;

    let mut msd = vec![0.0; t_total as usize + 1];
    let mut steady = vec![0.0; n];
    let mut events = vec![0.0; n];
    let mut messages = vec![0.0; n];
    let mut max_messages = vec![0usize; n];
    let mut total_messages = 0u64;
    let mut detection = DetectionTally::default();
    let mut attacked_sender = Vec::with_capacity(summaries.len());
    let mut schedules = Vec::with_capacity(summaries.len());
    let mut final_errors = Vec::with_capacity(summaries.len());
    let mut trace = Vec::new();

    for s in summaries {
        for (acc, v) in msd.iter_mut().zip(&s.sq_err) {
            *acc += v;
        }
        for k in 0..n {
            steady[k] += s.steady_node_err[k];
            events[k] += s.events[k] as f64;
            messages[k] += s.messages[k] as f64;
            max_messages[k] = max_messages[k].max(s.max_messages[k]);
            total_messages += s.messages[k];
        }
        detection.add(&s.detection);
        attacked_sender.push(s.attacked_sender);
        schedules.push(s.schedule);
        final_errors.push(s.final_error);
        trace.extend(s.trace);
    }
    for m in &mut msd {
        *m /= r * n as f64;
    }
    let full_load: u64 = (0..n).map(|k| topo.num_peers(k) as u64).sum::<u64>() * t_total * r as u64;

    MonteCarloResult {
        runs: r as u64,
        iterations: t_total,
        num_nodes: n,
        steady_window: exp.output.steady_window,
        msd_linear: msd,
        steady_node_msd: steady.into_iter().map(|v| v / (r * window)).collect(),
        events_per_node: events.into_iter().map(|v| v / r).collect(),
        messages_per_step: messages.into_iter().map(|v| v / (r * t_total as f64)).collect(),
        max_messages,
        message_bound: (0..n)
            .map(|k| crate::reputation::selection_size(exp.params.ratio, topo.num_peers(k)))
            .collect(),
        full_load,
        total_messages,
        detection,
        attacked_sender,
        schedules,
        final_errors,
        trace,
    }
}

/// One row of the theory-versus-simulation table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryRow {
    /// 1-based node id.
    pub node: usize,
    /// 1-based component.
    pub component: usize,
    pub theory: f64,
    pub mc_mean: f64,
    pub mc_se: f64,
}

/// Compares the closed-form asymptotic mean deviation with the Monte Carlo
/// mean of the final error vector.
pub fn theory_table(exp: &Experiment, result: &MonteCarloResult, adapt: AdaptWeights) -> Result<Vec<TheoryRow>> {
    let mats = NetworkMatrices::from_scenario(&exp.scenario, adapt);
    let theory = mats.asymptotic_deviation(exp.params.step_size, exp.params.regularization)?;
    let (mean, se) = result.final_error_stats();
    let dim = exp.scenario.dim();
    Ok((0..theory.len())
        .map(|i| TheoryRow { node: i / dim + 1, component: i % dim + 1, theory: theory[i], mc_mean: mean[i], mc_se: se[i] })
        .collect())
}

#[derive(Serialize)]
struct MsdRow {
    t: u64,
    msd_linear: f64,
    msd_db: String,
}

#[derive(Serialize)]
struct NodeRow {
    node: usize,
    events: f64,
    messages_per_step: f64,
    max_messages: usize,
    message_bound: usize,
    steady_msd_db: String,
}

#[derive(Serialize)]
struct SummaryRow {
    key: &'static str,
    value: String,
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |x| x.to_string())
}

/// Writes `msd.csv`, `nodes.csv`, `summary.csv` and, when recorded,
/// `trace.csv` into `dir`.
pub fn write_outputs(result: &MonteCarloResult, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let path = dir.join("msd.csv");
    write_rows(
        &path,
        result.msd_curve().into_iter().map(|(t, lin, _)| MsdRow { t, msd_linear: lin, msd_db: format_db(lin) }),
    )?;
    written.push(path);

    let path = dir.join("nodes.csv");
    write_rows(
        &path,
        (0..result.num_nodes).map(|k| NodeRow {
            node: k + 1,
            events: result.events_per_node[k],
            messages_per_step: result.messages_per_step[k],
            max_messages: result.max_messages[k],
            message_bound: result.message_bound[k],
            steady_msd_db: format_db(result.steady_node_msd[k]),
        }),
    )?;
    written.push(path);

    let path = dir.join("summary.csv");
    let rows = [
        SummaryRow { key: "runs", value: result.runs.to_string() },
        SummaryRow { key: "iterations", value: result.iterations.to_string() },
        SummaryRow { key: "steady_msd_db", value: result.steady_state_db().to_string() },
        SummaryRow { key: "events_per_node", value: result.average_events().to_string() },
        SummaryRow { key: "total_messages", value: result.total_messages.to_string() },
        SummaryRow { key: "load_fraction", value: result.load_fraction().to_string() },
        SummaryRow { key: "detection_rate", value: opt(result.detection.detection_rate()) },
        SummaryRow { key: "false_positive_rate", value: opt(result.detection.false_positive_rate()) },
    ];
    write_rows(&path, rows)?;
    written.push(path);

    if !result.trace.is_empty() {
        let path = dir.join("trace.csv");
        write_rows(&path, &result.trace)?;
        written.push(path);
    }
    Ok(written)
}

/// Writes the theory table as CSV.
pub fn write_theory(rows: &[TheoryRow], path: impl AsRef<Path>) -> Result<()> {
    write_rows(path.as_ref(), rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn db_conversions() {
        assert_eq!(to_db(1.0), 0.0);
        assert!((to_db(0.01) + 20.0).abs() < 1e-12);
        assert_eq!(format_db(0.0), "-inf");
        assert_eq!(format_db(1.0), "0");
    }

    #[test]
    fn event_average() {
        assert_eq!(count_events(&[]), 0.0);
        assert_eq!(count_events(&[0.0, 0.0]), 0.0);
        assert_eq!(count_events(&[10.0, 20.0, 30.0]), 20.0);
    }

    #[test]
    fn detection_rates() {
        let t = DetectionTally { attacked_polled: 10, attacked_flagged: 9, secure_polled: 100, secure_flagged: 5 };
        assert_eq!(t.detection_rate(), Some(0.9));
        assert_eq!(t.false_positive_rate(), Some(0.05));
        assert_eq!(DetectionTally::default().detection_rate(), None);
    }
}
