//! Ground-truth network: domains of switches, edge servers, intra- and
//! inter-domain links with time-varying latency, and time-varying server
//! costs.
//!
//! Every domain is managed by one controller. Each domain carries a
//! volatility multiplier drawn at generation time; a domain's links and
//! servers random-walk with step sizes scaled by it, so some domains drift
//! faster than others.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::routing::Graph;

pub type NodeId = usize;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopologyConfig {
    pub n_domains: usize,
    pub devices_min: usize,
    pub devices_max: usize,
    pub servers_per_domain: usize,
    pub gateways_per_pair: usize,
    /// Latency bounds in ms.
    pub latency_range: (f64, f64),
    pub latency_walk_step: f64,
    pub cost_range: (f64, f64),
    pub cost_walk_step: f64,
    /// Per-domain multiplier on both walk steps.
    pub volatility_range: (f64, f64),
    pub seed: u64,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        TopologyConfig {
            n_domains: 6,
            devices_min: 2,
            devices_max: 15,
            servers_per_domain: 2,
            gateways_per_pair: 1,
            latency_range: (1.0, 5.0),
            latency_walk_step: 0.5,
            cost_range: (20.0, 100.0),
            cost_walk_step: 4.0,
            volatility_range: (0.0, 2.0),
            seed: 0,
        }
    }
}

impl TopologyConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Topology(msg));
        if self.n_domains < 2 {
            return bad(format!("n_domains must be >= 2, got {}", self.n_domains));
        }
        if self.devices_min < 2 {
            return bad(format!(
                "devices_min must be >= 2, got {}",
                self.devices_min
            ));
        }
        if self.devices_max < self.devices_min {
            return bad(format!(
                "devices_max {} below devices_min {}",
                self.devices_max, self.devices_min
            ));
        }
        if self.servers_per_domain < 1 {
            return bad("servers_per_domain must be >= 1".into());
        }
        if self.gateways_per_pair < 1 {
            return bad("gateways_per_pair must be >= 1".into());
        }
        let (llo, lhi) = self.latency_range;
        if !(llo > 0.0 && llo < lhi && lhi.is_finite()) {
            return bad(format!("latency_range needs 0 < lo < hi, got [{llo}, {lhi}]"));
        }
        let (clo, chi) = self.cost_range;
        if !(clo < chi && clo.is_finite() && chi.is_finite()) {
            return bad(format!("cost_range needs lo < hi, got [{clo}, {chi}]"));
        }
        if !(self.latency_walk_step >= 0.0 && self.cost_walk_step >= 0.0) {
            return bad("walk steps must be non-negative".into());
        }
        let (vlo, vhi) = self.volatility_range;
        if !(vlo >= 0.0 && vlo <= vhi && vhi.is_finite()) {
            return bad(format!(
                "volatility_range needs 0 <= lo <= hi, got [{vlo}, {vhi}]"
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Switch,
    Server,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub domain: usize,
    pub kind: NodeKind,
}

/// Undirected link, stored with `a < b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: NodeId,
    pub b: NodeId,
    pub latency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Server {
    pub node: NodeId,
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub servers: Vec<Server>,
    pub domain_volatility: Vec<f64>,
    pub n_domains: usize,
    pub time_step: u64,
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    // Always consume one draw so the stream layout does not depend on the range.
    let u: f64 = rng.gen();
    lo + (hi - lo) * u
}

impl NetworkState {
    pub fn generate(config: &TopologyConfig) -> Result<Self> {
        Self::generate_with_seed(config, config.seed)
    }

    fn generate_with_seed(config: &TopologyConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = config.n_domains;

        let mut nodes = Vec::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut servers = Vec::new();
        let mut switches_of: Vec<Vec<NodeId>> = Vec::with_capacity(n);
        let mut domain_volatility = Vec::with_capacity(n);

        for domain in 0..n {
            let count = rng.gen_range(config.devices_min..=config.devices_max);
            domain_volatility.push(uniform(&mut rng, config.volatility_range));

            let first = nodes.len();
            for id in first..first + count {
                nodes.push(Node {
                    id,
                    domain,
                    kind: NodeKind::Switch,
                });
            }
            let switches: Vec<NodeId> = (first..first + count).collect();

            // Random spanning tree over a shuffled order keeps the domain connected.
            let mut order = switches.clone();
            order.shuffle(&mut rng);
            for i in 1..order.len() {
                let parent = order[rng.gen_range(0..i)];
                push_edge(&mut edges, order[i], parent, uniform(&mut rng, config.latency_range));
            }
            for _ in 0..count / 2 {
                let u = switches[rng.gen_range(0..count)];
                let v = switches[rng.gen_range(0..count)];
                let latency = uniform(&mut rng, config.latency_range);
                if u != v && !has_edge(&edges, u, v) {
                    push_edge(&mut edges, u, v, latency);
                }
            }

            for _ in 0..config.servers_per_domain {
                let id = nodes.len();
                nodes.push(Node {
                    id,
                    domain,
                    kind: NodeKind::Server,
                });
                let attach = switches[rng.gen_range(0..count)];
                push_edge(&mut edges, id, attach, uniform(&mut rng, config.latency_range));
                servers.push(Server {
                    node: id,
                    cost: uniform(&mut rng, config.cost_range),
                });
            }
            switches_of.push(switches);
        }

        for (d, e) in domain_pairs(n) {
            let mut placed = 0;
            let mut attempts = 0;
            while placed < config.gateways_per_pair && attempts < 64 * config.gateways_per_pair {
                attempts += 1;
                let u = *switches_of[d].choose(&mut rng).expect("domain has switches");
                let v = *switches_of[e].choose(&mut rng).expect("domain has switches");
                let latency = uniform(&mut rng, config.latency_range);
                if !has_edge(&edges, u, v) {
                    push_edge(&mut edges, u, v, latency);
                    placed += 1;
                }
            }
            if placed == 0 {
                return Err(Error::Topology(format!(
                    "could not place a gateway between domains {d} and {e}"
                )));
            }
        }

        Ok(NetworkState {
            nodes,
            edges,
            servers,
            domain_volatility,
            n_domains: n,
            time_step: 0,
        })
    }

    /// One tick of background dynamics: every latency and cost takes a
    /// clamped uniform random-walk step. Structure is untouched.
    pub fn step_dynamics(&mut self, config: &TopologyConfig, rng: &mut impl Rng) {
        let (llo, lhi) = config.latency_range;
        for edge in &mut self.edges {
            let da = self.nodes[edge.a].domain;
            let db = self.nodes[edge.b].domain;
            let vol = 0.5 * (self.domain_volatility[da] + self.domain_volatility[db]);
            let u: f64 = rng.gen_range(-1.0..=1.0);
            let delta = u * config.latency_walk_step * vol;
            edge.latency = (edge.latency + delta).clamp(llo, lhi);
        }
        let (clo, chi) = config.cost_range;
        for server in &mut self.servers {
            let vol = self.domain_volatility[self.nodes[server.node].domain];
            let u: f64 = rng.gen_range(-1.0..=1.0);
            let delta = u * config.cost_walk_step * vol;
            server.cost = (server.cost + delta).clamp(clo, chi);
        }
        self.time_step += 1;
    }

    /// Abrupt reconfiguration: nodes, links and costs are recreated from
    /// `reconfig_seed`. Domain count and the clock are kept.
    pub fn reconfigure(&self, config: &TopologyConfig, reconfig_seed: u64) -> Result<Self> {
        if config.n_domains != self.n_domains {
            return Err(Error::Topology(format!(
                "reconfiguration must keep {} domains, config has {}",
                self.n_domains, config.n_domains
            )));
        }
        let mut fresh = Self::generate_with_seed(config, reconfig_seed)?;
        fresh.time_step = self.time_step;
        Ok(fresh)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn domain_of(&self, node: NodeId) -> usize {
        self.nodes[node].domain
    }

    pub fn switches_in(&self, domain: usize) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .filter(move |n| n.domain == domain && n.kind == NodeKind::Switch)
            .map(|n| n.id)
    }

    /// Lowest-id switch of each domain.
    pub fn domain_representatives(&self) -> Vec<NodeId> {
        (0..self.n_domains)
            .map(|d| self.switches_in(d).next().expect("domain has switches"))
            .collect()
    }

    pub fn edge_latencies(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.latency).collect()
    }

    pub fn server_costs(&self) -> Vec<f64> {
        self.servers.iter().map(|s| s.cost).collect()
    }

    /// Routing graph over this structure with caller-supplied edge weights.
    pub fn graph_with(&self, latencies: &[f64]) -> Graph {
        debug_assert_eq!(latencies.len(), self.edges.len());
        let mut g = Graph::new(self.nodes.len());
        for (edge, &w) in self.edges.iter().zip(latencies) {
            g.add_edge(edge.a, edge.b, w);
        }
        g
    }

    pub fn truth_graph(&self) -> Graph {
        self.graph_with(&self.edge_latencies())
    }

    /// Domains whose snapshot contains the edge (one for intra-domain links,
    /// two for gateways).
    pub fn edge_domains(&self, edge: usize) -> (usize, usize) {
        let e = &self.edges[edge];
        (self.nodes[e.a].domain, self.nodes[e.b].domain)
    }

    /// Hash of the structure only (nodes, domains, edge endpoints).
    pub fn structure_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for node in &self.nodes {
            hasher.update(format!("n{}:{}:{:?};", node.id, node.domain, node.kind).as_bytes());
        }
        for edge in &self.edges {
            hasher.update(format!("e{}-{};", edge.a, edge.b).as_bytes());
        }
        let digest = hasher.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Line-oriented dump for debugging.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "network {} {}", self.n_domains, self.time_step);
        for (d, v) in self.domain_volatility.iter().enumerate() {
            let _ = writeln!(out, "domain {d} {v}");
        }
        for node in &self.nodes {
            let kind = match node.kind {
                NodeKind::Switch => "switch",
                NodeKind::Server => "server",
            };
            let _ = writeln!(out, "node {} {} {}", node.id, node.domain, kind);
        }
        for edge in &self.edges {
            let _ = writeln!(out, "edge {} {} {}", edge.a, edge.b, edge.latency);
        }
        for server in &self.servers {
            let _ = writeln!(out, "server {} {}", server.node, server.cost);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut net = NetworkState {
            nodes: vec![],
            edges: vec![],
            servers: vec![],
            domain_volatility: vec![],
            n_domains: 0,
            time_step: 0,
        };
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |reason: &str| Error::TopologyText {
                line,
                reason: reason.to_string(),
            };
            let fields: Vec<&str> = raw.split_whitespace().collect();
            let Some((&tag, rest)) = fields.split_first() else {
                continue;
            };
            let int = |s: &str| s.parse::<usize>().map_err(|_| err("expected integer"));
            let float = |s: &str| s.parse::<f64>().map_err(|_| err("expected number"));
            match (tag, rest) {
                ("network", [n, t]) => {
                    net.n_domains = int(n)?;
                    net.time_step = int(t)? as u64;
                }
                ("domain", [_, v]) => net.domain_volatility.push(float(v)?),
                ("node", [id, d, kind]) => {
                    let kind = match *kind {
                        "switch" => NodeKind::Switch,
                        "server" => NodeKind::Server,
                        _ => return Err(err("unknown node kind")),
                    };
                    net.nodes.push(Node {
                        id: int(id)?,
                        domain: int(d)?,
                        kind,
                    });
                }
                ("edge", [a, b, l]) => net.edges.push(Edge {
                    a: int(a)?,
                    b: int(b)?,
                    latency: float(l)?,
                }),
                ("server", [node, cost]) => net.servers.push(Server {
                    node: int(node)?,
                    cost: float(cost)?,
                }),
                _ => return Err(err("unrecognized record")),
            }
        }
        Ok(net)
    }
}

/// Adjacent domain pairs: a ring for three or more domains.
fn domain_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize)> = (0..n - 1).map(|d| (d, d + 1)).collect();
    if n >= 3 {
        pairs.push((0, n - 1));
    }
    pairs
}

fn has_edge(edges: &[Edge], u: NodeId, v: NodeId) -> bool {
    let (a, b) = (u.min(v), u.max(v));
    edges.iter().any(|e| e.a == a && e.b == b)
}

fn push_edge(edges: &mut Vec<Edge>, u: NodeId, v: NodeId, latency: f64) {
    edges.push(Edge {
        a: u.min(v),
        b: u.max(v),
        latency,
    });
}
