//! False-data-injection and link attacks, plus the majority-trust check.

use std::collections::BTreeSet;

use rand::Rng;
use rand_distr::StandardNormal;
use rand::seq::index;

use crate::error::{Error, Result};
use crate::rng::{Purpose, Streams};
use crate::scenario::Topology;
use crate::Vector;

/// Distribution of an injected L-dimensional perturbation.
#[derive(Debug, Clone, PartialEq)]
pub enum Perturbation {
    /// i.i.d. zero-mean Gaussian components with the given variance.
    Gaussian { variance: f64 },
    /// The same vector at every draw.
    Constant(Vector),
}

impl Perturbation {
    pub fn draw<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> Vector {
        match self {
            Perturbation::Gaussian { variance } => {
                let s = variance.sqrt();
                Vector::from_fn(dim, |_, _| s * rng.sample::<f64, _>(StandardNormal))
            }
            Perturbation::Constant(v) => v.clone(),
        }
    }
}

/// Inclusive range of iterations during which attacks are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActiveWindow {
    pub start: u64,
    pub end: Option<u64>,
}

impl ActiveWindow {
    pub const ALWAYS: ActiveWindow = ActiveWindow { start: 0, end: None };

    pub fn contains(&self, t: u64) -> bool {
        t >= self.start && self.end.is_none_or(|e| t <= e)
    }
}

/// Which nodes and directed links are compromised, and how.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackSchedule {
    fdi_nodes: BTreeSet<usize>,
    /// Directed `(sender, receiver)` pairs.
    attacked_links: BTreeSet<(usize, usize)>,
    fdi: Perturbation,
    link: Perturbation,
    window: ActiveWindow,
}

impl AttackSchedule {
    pub fn none() -> Self {
        Self {
            fdi_nodes: BTreeSet::new(),
            attacked_links: BTreeSet::new(),
            fdi: Perturbation::Gaussian { variance: 0.0 },
            link: Perturbation::Gaussian { variance: 0.0 },
            window: ActiveWindow::ALWAYS,
        }
    }

    /// Validates that every link `(l, n)` satisfies n ∈ N_l \ {l}.
    pub fn new(
        topology: &Topology,
        fdi_nodes: impl IntoIterator<Item = usize>,
        attacked_links: impl IntoIterator<Item = (usize, usize)>,
        fdi: Perturbation,
        link: Perturbation,
        window: ActiveWindow,
    ) -> Result<Self> {
        let fdi_nodes: BTreeSet<usize> = fdi_nodes.into_iter().collect();
        let attacked_links: BTreeSet<(usize, usize)> = attacked_links.into_iter().collect();
        let n = topology.num_nodes();
        if let Some(bad) = fdi_nodes.iter().find(|&&v| v >= n) {
            return Err(Error::Config(format!("FDI node {} does not exist", bad + 1)));
        }
        for &(l, r) in &attacked_links {
            if l >= n || r >= n || l == r || !topology.are_neighbors(l, r) {
                return Err(Error::Config(format!("attacked link {} -> {} is not a network link", l + 1, r + 1)));
            }
        }
        if let Some(e) = window.end {
            if e < window.start {
                return Err(Error::Config("attack window ends before it starts".into()));
            }
        }
        Ok(Self { fdi_nodes, attacked_links, fdi, link, window })
    }

    pub fn is_empty(&self) -> bool {
        self.fdi_nodes.is_empty() && self.attacked_links.is_empty()
    }

    pub fn fdi_nodes(&self) -> &BTreeSet<usize> {
        &self.fdi_nodes
    }

    pub fn attacked_links(&self) -> &BTreeSet<(usize, usize)> {
        &self.attacked_links
    }

    pub fn window(&self) -> ActiveWindow {
        self.window
    }

    pub fn is_active(&self, t: u64) -> bool {
        self.window.contains(t)
    }

    pub fn node_attacked(&self, node: usize, t: u64) -> bool {
        self.is_active(t) && self.fdi_nodes.contains(&node)
    }

    pub fn link_attacked(&self, sender: usize, receiver: usize, t: u64) -> bool {
        sender != receiver && self.is_active(t) && self.attacked_links.contains(&(sender, receiver))
    }

    /// Whether what `receiver` gets from `sender` at `t` is compromised,
    /// either at the source or in transit.
    pub fn message_compromised(&self, sender: usize, receiver: usize, t: u64) -> bool {
        sender != receiver && (self.node_attacked(sender, t) || self.link_attacked(sender, receiver, t))
    }
}

/// d + uᵀ w^att for an attacked node inside the window, else `d_clean`.
pub fn corrupt_measurement<R: Rng + ?Sized>(
    node: usize,
    t: u64,
    d_clean: f64,
    u: &Vector,
    schedule: &AttackSchedule,
    rng: &mut R,
) -> f64 {
    if !schedule.node_attacked(node, t) {
        return d_clean;
    }
    let w_att = schedule.fdi.draw(u.len(), rng);
    d_clean + u.dot(&w_att)
}

/// ψ + ψ^att on an attacked link inside the window, else `psi`. A node's
/// message to itself is never touched.
pub fn corrupt_message<R: Rng + ?Sized>(
    sender: usize,
    receiver: usize,
    t: u64,
    psi: &Vector,
    schedule: &AttackSchedule,
    rng: &mut R,
) -> Vector {
    if !schedule.link_attacked(sender, receiver, t) {
        return psi.clone();
    }
    psi + schedule.link.draw(psi.len(), rng)
}

/// Keyed wrappers used by the simulator so each draw has its own substream.
pub(crate) fn corrupt_measurement_keyed(
    streams: &Streams,
    run: u64,
    node: usize,
    t: u64,
    d_clean: f64,
    u: &Vector,
    schedule: &AttackSchedule,
) -> f64 {
    if !schedule.node_attacked(node, t) {
        return d_clean;
    }
    let mut rng = streams.node_stream(Purpose::FdiAttack, run, node, t);
    corrupt_measurement(node, t, d_clean, u, schedule, &mut rng)
}

pub(crate) fn corrupt_message_keyed(
    streams: &Streams,
    run: u64,
    sender: usize,
    receiver: usize,
    t: u64,
    psi: &Vector,
    schedule: &AttackSchedule,
) -> Vector {
    if !schedule.link_attacked(sender, receiver, t) {
        return psi.clone();
    }
    let mut rng = streams.stream(Purpose::LinkAttack, run, sender as u64, receiver as u64, t);
    corrupt_message(sender, receiver, t, psi, schedule, &mut rng)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeA1 {
    pub node: usize,
    /// Members of N_n (self included) that are attacked or reach `node`
    /// over an attacked link.
    pub attacked: usize,
    pub neighborhood: usize,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct A1Report {
    pub nodes: Vec<NodeA1>,
}

impl A1Report {
    pub fn passed(&self) -> bool {
        self.nodes.iter().all(|n| n.ok)
    }

    pub fn violations(&self) -> impl Iterator<Item = &NodeA1> {
        self.nodes.iter().filter(|n| !n.ok)
    }
}

/// Checks that fewer than half of every closed neighborhood is compromised.
pub fn validate_a1(topology: &Topology, schedule: &AttackSchedule) -> A1Report {
    let nodes = (0..topology.num_nodes())
        .map(|n| {
            let hood = topology.neighbors(n);
            let attacked = hood
                .iter()
                .filter(|&&m| schedule.fdi_nodes.contains(&m) || schedule.attacked_links.contains(&(m, n)))
                .count();
            NodeA1 {
                node: n,
                attacked,
                neighborhood: hood.len(),
                ok: 2 * attacked < hood.len(),
            }
        })
        .collect();
    A1Report { nodes }
}

/// What kind of attack a plan injects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackKind {
    None,
    Fdi,
    Link,
    Both,
}

/// Which nodes a plan compromises.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Targets {
    Fixed(Vec<usize>),
    /// `count` nodes drawn without replacement from `candidates`, per run.
    Random { candidates: Vec<usize>, count: usize },
}

/// A schedule template; randomized parts are resolved per run.
///
/// Link attacks compromise every outgoing link of each targeted node, i.e.
/// all `(l, n)` with n ∈ N_l \ {l}.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackPlan {
    pub kind: AttackKind,
    pub targets: Targets,
    pub extra_links: Vec<(usize, usize)>,
    pub fdi: Perturbation,
    pub link: Perturbation,
    pub window: ActiveWindow,
}

impl AttackPlan {
    pub fn none() -> Self {
        Self {
            kind: AttackKind::None,
            targets: Targets::Fixed(Vec::new()),
            extra_links: Vec::new(),
            fdi: Perturbation::Gaussian { variance: 3.0 },
            link: Perturbation::Gaussian { variance: 0.5 },
            window: ActiveWindow::ALWAYS,
        }
    }

    pub fn resolve(&self, topology: &Topology, streams: &Streams, run: u64) -> Result<AttackSchedule> {
        if self.kind == AttackKind::None {
            return Ok(AttackSchedule::none());
        }
        let targets: Vec<usize> = match &self.targets {
            Targets::Fixed(v) => v.clone(),
            Targets::Random { candidates, count } => {
                if *count > candidates.len() {
                    return Err(Error::Config(format!(
                        "cannot pick {count} attacked nodes from {} candidates",
                        candidates.len()
                    )));
                }
                let mut rng = streams.stream(Purpose::AttackSelection, run, 0, 0, 0);
                let mut picked: Vec<usize> =
                    index::sample(&mut rng, candidates.len(), *count).into_iter().map(|i| candidates[i]).collect();
                picked.sort_unstable();
                picked
            }
        };
        let fdi_nodes = match self.kind {
            AttackKind::Fdi | AttackKind::Both => targets.clone(),
            _ => Vec::new(),
        };
        let mut links: Vec<(usize, usize)> = self.extra_links.clone();
        if matches!(self.kind, AttackKind::Link | AttackKind::Both) {
            for &l in &targets {
                if l >= topology.num_nodes() {
                    return Err(Error::Config(format!("attacked node {} does not exist", l + 1)));
                }
                links.extend(topology.neighbors(l).iter().filter(|&&n| n != l).map(|&n| (l, n)));
            }
        }
        AttackSchedule::new(topology, fdi_nodes, links, self.fdi.clone(), self.link.clone(), self.window)
    }
}
