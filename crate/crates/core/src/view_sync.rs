//! The eventually-consistent logical view and the staleness vector.
//!
//! A single shared [`GlobalView`] holds, for every domain, the snapshot its
//! controller last reported. Only controllers chosen by a [`SyncAction`]
//! refresh their snapshot in a given step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::routing::Graph;
use crate::topology::NetworkState;

/// Steps since each controller was last synchronized. 0 means "this step".
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SyncState {
    pub staleness: Vec<u64>,
}

impl SyncState {
    pub fn fresh(n: usize) -> Self {
        SyncState {
            staleness: vec![0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.staleness.len()
    }

    pub fn is_empty(&self) -> bool {
        self.staleness.is_empty()
    }

    /// Network input: each counter capped then scaled into [0, 1].
    pub fn normalized(&self, cap: u64) -> Vec<f64> {
        let cap = cap.max(1);
        self.staleness
            .iter()
            .map(|&s| s.min(cap) as f64 / cap as f64)
            .collect()
    }
}

/// A set of exactly SR controller indices, kept sorted.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SyncAction {
    subset: Vec<usize>,
}

impl SyncAction {
    pub fn new(mut subset: Vec<usize>, n: usize, sync_rate: usize) -> Result<Self> {
        subset.sort_unstable();
        subset.dedup();
        if subset.len() != sync_rate {
            return Err(Error::SyncCardinality {
                expected: sync_rate,
                got: subset.len(),
            });
        }
        if let Some(&bad) = subset.iter().find(|&&i| i >= n) {
            return Err(Error::ControllerIndex { index: bad, n });
        }
        Ok(SyncAction { subset })
    }

    pub fn controllers(&self) -> &[usize] {
        &self.subset
    }

    pub fn len(&self) -> usize {
        self.subset.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subset.is_empty()
    }

    pub fn contains(&self, controller: usize) -> bool {
        self.subset.binary_search(&controller).is_ok()
    }

    /// The binary vector form: `a_i = 1` iff controller `i` syncs.
    pub fn to_binary(&self, n: usize) -> Vec<u8> {
        (0..n).map(|i| u8::from(self.contains(i))).collect()
    }
}

pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u64 / (i + 1) as u64;
    }
    acc
}

/// Lexicographic unranking over `sync_rate`-subsets of `0..n`.
pub fn action_index_to_subset(index: usize, n: usize, sync_rate: usize) -> Result<SyncAction> {
    let size = binomial(n, sync_rate) as usize;
    if index >= size {
        return Err(Error::ActionIndex { index, size });
    }
    let mut remaining = index as u64;
    let mut subset = Vec::with_capacity(sync_rate);
    let mut next = 0;
    for slot in 0..sync_rate {
        let left = sync_rate - slot - 1;
        let mut c = next;
        loop {
            let block = binomial(n - c - 1, left);
            if remaining < block {
                break;
            }
            remaining -= block;
            c += 1;
        }
        subset.push(c);
        next = c + 1;
    }
    SyncAction::new(subset, n, sync_rate)
}

pub fn subset_to_index(action: &SyncAction, n: usize) -> usize {
    let k = action.len();
    let mut index = 0u64;
    let mut prev = 0;
    for (slot, &c) in action.controllers().iter().enumerate() {
        let left = k - slot - 1;
        for skipped in prev..c {
            index += binomial(n - skipped - 1, left);
        }
        prev = c + 1;
    }
    index as usize
}

/// Every SR-subset in lexicographic order, so `table[i]` unranks `i`.
pub fn enumerate_actions(n: usize, sync_rate: usize) -> Vec<SyncAction> {
    (0..binomial(n, sync_rate) as usize)
        .map(|i| action_index_to_subset(i, n, sync_rate).expect("index in range"))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSnapshot {
    pub taken_at: u64,
    /// (edge index, latency) for intra-domain links and incident gateways.
    pub edges: Vec<(usize, f64)>,
    /// (server index, cost).
    pub costs: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalView {
    snapshots: Vec<DomainSnapshot>,
    /// Resolved per-edge latency; gateways take the fresher of their two
    /// domain snapshots.
    edge_latency: Vec<f64>,
    server_cost: Vec<f64>,
    /// Number of sync rounds applied.
    clock: u64,
}

impl GlobalView {
    /// View identical to `truth`, as after a full synchronization.
    pub fn fresh(truth: &NetworkState) -> Self {
        let snapshots = (0..truth.n_domains)
            .map(|d| capture(truth, d, 0))
            .collect();
        GlobalView {
            snapshots,
            edge_latency: truth.edge_latencies(),
            server_cost: truth.server_costs(),
            clock: 0,
        }
    }

    pub fn snapshot(&self, domain: usize) -> &DomainSnapshot {
        &self.snapshots[domain]
    }

    pub fn snapshot_time(&self, domain: usize) -> u64 {
        self.snapshots[domain].taken_at
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn edge_latencies(&self) -> &[f64] {
        &self.edge_latency
    }

    pub fn server_costs(&self) -> &[f64] {
        &self.server_cost
    }

    pub fn graph(&self, structure: &NetworkState) -> Graph {
        structure.graph_with(&self.edge_latency)
    }

    fn refresh(&mut self, truth: &NetworkState, domain: usize) {
        let snap = capture(truth, domain, self.clock);
        for &(e, l) in &snap.edges {
            self.edge_latency[e] = l;
        }
        for &(s, c) in &snap.costs {
            self.server_cost[s] = c;
        }
        self.snapshots[domain] = snap;
    }
}

fn capture(truth: &NetworkState, domain: usize, taken_at: u64) -> DomainSnapshot {
    let edges = (0..truth.edges.len())
        .filter(|&e| {
            let (a, b) = truth.edge_domains(e);
            a == domain || b == domain
        })
        .map(|e| (e, truth.edges[e].latency))
        .collect();
    let costs = truth
        .servers
        .iter()
        .enumerate()
        .filter(|(_, s)| truth.domain_of(s.node) == domain)
        .map(|(i, s)| (i, s.cost))
        .collect();
    DomainSnapshot {
        taken_at,
        edges,
        costs,
    }
}

/// Synchronize the controllers in `action`: their staleness drops to 0 and
/// their snapshot is replaced with current truth; everyone else ages by one.
pub fn apply_sync(
    view: &mut GlobalView,
    sync: &mut SyncState,
    truth: &NetworkState,
    action: &SyncAction,
    sync_rate: usize,
) -> Result<()> {
    if action.len() != sync_rate {
        return Err(Error::SyncCardinality {
            expected: sync_rate,
            got: action.len(),
        });
    }
    let n = sync.len();
    if let Some(&bad) = action.controllers().iter().find(|&&i| i >= n) {
        return Err(Error::ControllerIndex { index: bad, n });
    }
    view.clock += 1;
    for (i, s) in sync.staleness.iter_mut().enumerate() {
        if action.contains(i) {
            *s = 0;
        } else {
            *s += 1;
        }
    }
    for &d in action.controllers() {
        view.refresh(truth, d);
    }
    Ok(())
}
