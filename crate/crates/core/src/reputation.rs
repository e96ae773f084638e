//! Reputation ledger and communication-partner selection.

use std::collections::{BTreeMap, VecDeque};

use crate::error::{Error, Result};

/// Per-round evaluation of a same-cluster neighbor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Evaluation {
    Secure,
    Unpolled,
    Flagged,
}

impl Evaluation {
    pub fn value(self) -> i32 {
        match self {
            Evaluation::Secure => 1,
            Evaluation::Unpolled => 0,
            Evaluation::Flagged => -1,
        }
    }
}

/// Sliding-window evaluation history of every same-cluster neighbor of one
/// node. The reputation τ of a neighbor is the sum of its last `le + 1`
/// evaluations.
#[derive(Debug, Clone, PartialEq)]
pub struct ReputationLedger {
    node: usize,
    span: usize,
    history: BTreeMap<usize, VecDeque<Evaluation>>,
}

/// Outcome of partner selection: polled (B⁺) and skipped (B⁻) neighbors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    pub polled: Vec<usize>,
    pub unpolled: Vec<usize>,
}

/// i = round(p · k), at least 1 when k > 0.
pub fn selection_size(ratio: f64, num_peers: usize) -> usize {
    if num_peers == 0 {
        return 0;
    }
    ((ratio * num_peers as f64).round() as usize).clamp(1, num_peers)
}

impl ReputationLedger {
    pub fn new(node: usize, peers: impl IntoIterator<Item = usize>, window: usize) -> Self {
        Self {
            node,
            span: window + 1,
            history: peers.into_iter().map(|l| (l, VecDeque::with_capacity(window + 2))).collect(),
        }
    }

    pub fn peers(&self) -> impl Iterator<Item = usize> + '_ {
        self.history.keys().copied()
    }

    pub fn num_peers(&self) -> usize {
        self.history.len()
    }

    pub fn reputation(&self, peer: usize) -> Option<i32> {
        self.history.get(&peer).map(|h| h.iter().map(|e| e.value()).sum())
    }

    pub fn history(&self, peer: usize) -> Option<&VecDeque<Evaluation>> {
        self.history.get(&peer)
    }

    /// Stores one round of evaluations. `secure`, `flagged` and `unpolled`
    /// must partition the peers.
    pub fn record(&mut self, secure: &[usize], flagged: &[usize], unpolled: &[usize]) -> Result<()> {
        let total = secure.len() + flagged.len() + unpolled.len();
        let mut seen = BTreeMap::new();
        for (set, eval) in [(secure, Evaluation::Secure), (flagged, Evaluation::Flagged), (unpolled, Evaluation::Unpolled)] {
            for &l in set {
                if !self.history.contains_key(&l) || seen.insert(l, eval).is_some() {
                    return Err(Error::NotAPartition { node: self.node });
                }
            }
        }
        if total != self.history.len() {
            return Err(Error::NotAPartition { node: self.node });
        }
        for (l, eval) in seen {
            let h = self.history.get_mut(&l).expect("checked above");
            h.push_back(eval);
            while h.len() > self.span {
                h.pop_front();
            }
        }
        Ok(())
    }

    /// Ranks peers by reputation (descending, ties by ascending id), keeps
    /// the top `round(p·k)`, then drops anyone with negative reputation.
    pub fn select_partners(&self, ratio: f64) -> Selection {
        let mut ranked: Vec<(usize, i32)> =
            self.history.keys().map(|&l| (l, self.reputation(l).unwrap_or(0))).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let keep = selection_size(ratio, ranked.len());
        let mut polled = Vec::with_capacity(keep);
        let mut unpolled = Vec::new();
        for (rank, (l, tau)) in ranked.into_iter().enumerate() {
            if rank < keep && tau >= 0 {
                polled.push(l);
            } else {
                unpolled.push(l);
            }
        }
        polled.sort_unstable();
        unpolled.sort_unstable();
        Selection { polled, unpolled }
    }
}
