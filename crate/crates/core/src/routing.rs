//! Shortest paths on true and stale graphs, latency-constrained server
//! selection, and grading of an offloading decision against ground truth.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{NetworkState, NodeId, Server};
use crate::view_sync::GlobalView;

/// Undirected weighted graph with adjacency lists.
#[derive(Clone, Debug, Default)]
pub struct Graph {
    adj: Vec<Vec<(NodeId, f64)>>,
}

impl Graph {
    pub fn new(nodes: usize) -> Self {
        Graph {
            adj: vec![Vec::new(); nodes],
        }
    }

    pub fn add_edge(&mut self, u: NodeId, v: NodeId, weight: f64) {
        self.adj[u].push((v, weight));
        self.adj[v].push((u, weight));
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, u: NodeId) -> &[(NodeId, f64)] {
        &self.adj[u]
    }

    pub fn edge_weight(&self, u: NodeId, v: NodeId) -> Option<f64> {
        self.adj
            .get(u)?
            .iter()
            .filter(|(w, _)| *w == v)
            .map(|&(_, wt)| wt)
            .min_by(f64::total_cmp)
    }

    /// Sum of edge weights along `nodes`, in path order. `None` if two
    /// consecutive nodes are not adjacent.
    pub fn path_latency(&self, nodes: &[NodeId]) -> Option<f64> {
        let mut total = 0.0;
        for hop in nodes.windows(2) {
            total += self.edge_weight(hop[0], hop[1])?;
        }
        Some(total)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathResult {
    pub nodes: Vec<NodeId>,
    pub latency: f64,
}

impl PathResult {
    pub fn hops(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }

    /// Latency first, then fewer hops, then lexicographically smaller node
    /// sequence.
    fn rank(&self, other: &Self) -> Ordering {
        self.latency
            .total_cmp(&other.latency)
            .then(self.nodes.len().cmp(&other.nodes.len()))
            .then_with(|| self.nodes.cmp(&other.nodes))
    }
}

struct Frontier(PathResult);

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.0.rank(&other.0) == Ordering::Equal
    }
}
impl Eq for Frontier {}
impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.rank(&other.0)
    }
}

/// Single-source Dijkstra. Entry `v` holds the best path to `v`, or `None`
/// when unreachable.
pub fn shortest_paths_from(graph: &Graph, src: NodeId) -> Result<Vec<Option<PathResult>>> {
    if src >= graph.node_count() {
        return Err(Error::UnknownNode(src));
    }
    let n = graph.node_count();
    let mut best: Vec<Option<PathResult>> = vec![None; n];
    let mut settled = vec![false; n];
    let mut heap = BinaryHeap::new();
    let start = PathResult {
        nodes: vec![src],
        latency: 0.0,
    };
    best[src] = Some(start.clone());
    heap.push(Reverse(Frontier(start)));

    while let Some(Reverse(Frontier(label))) = heap.pop() {
        let u = *label.nodes.last().expect("non-empty path");
        if settled[u] {
            continue;
        }
        settled[u] = true;
        for &(v, w) in graph.neighbors(u) {
            if settled[v] {
                continue;
            }
            let mut nodes = label.nodes.clone();
            nodes.push(v);
            let candidate = PathResult {
                nodes,
                latency: label.latency + w,
            };
            let improves = match &best[v] {
                None => true,
                Some(current) => candidate.rank(current) == Ordering::Less,
            };
            if improves {
                best[v] = Some(candidate.clone());
                heap.push(Reverse(Frontier(candidate)));
            }
        }
    }
    Ok(best)
}

pub fn shortest_path(graph: &Graph, src: NodeId, dst: NodeId) -> Result<Option<PathResult>> {
    if dst >= graph.node_count() {
        return Err(Error::UnknownNode(dst));
    }
    Ok(shortest_paths_from(graph, src)?.swap_remove(dst))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServerChoice {
    /// Index into `NetworkState::servers`.
    pub server: usize,
    pub node: NodeId,
    pub path: PathResult,
    /// Cost as seen by whoever made the choice.
    pub cost: f64,
}

/// Cheapest server whose shortest-path latency from `src` is within
/// `limit`; cost ties go to the lowest server index.
pub fn cheapest_within(
    graph: &Graph,
    servers: &[Server],
    costs: &[f64],
    src: NodeId,
    limit: f64,
) -> Result<Option<ServerChoice>> {
    let paths = shortest_paths_from(graph, src)?;
    let mut choice: Option<ServerChoice> = None;
    for (idx, server) in servers.iter().enumerate() {
        let Some(path) = &paths[server.node] else {
            continue;
        };
        if path.latency > limit {
            continue;
        }
        let cost = costs[idx];
        if choice.as_ref().is_none_or(|c| cost < c.cost) {
            choice = Some(ServerChoice {
                server: idx,
                node: server.node,
                path: path.clone(),
                cost,
            });
        }
    }
    Ok(choice)
}

/// Ground-truth optimum: cheapest server in S_L.
pub fn optimal_server(truth: &NetworkState, src: NodeId, limit: f64) -> Result<Option<ServerChoice>> {
    cheapest_within(
        &truth.truth_graph(),
        &truth.servers,
        &truth.server_costs(),
        src,
        limit,
    )
}

/// The same rule evaluated entirely on the (possibly stale) logical view.
pub fn view_server_choice(
    view: &GlobalView,
    structure: &NetworkState,
    src: NodeId,
    limit: f64,
) -> Result<Option<ServerChoice>> {
    cheapest_within(
        &view.graph(structure),
        &structure.servers,
        view.server_costs(),
        src,
        limit,
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeCase {
    Optimal,
    LatencyOkCostSuboptimal,
    LatencyViolated,
    OtherFailure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocationOutcome {
    pub selected: Option<ServerChoice>,
    /// True latency of the selected path.
    pub true_latency: Option<f64>,
    /// True cost of the selected server.
    pub selected_cost: Option<f64>,
    pub optimal: Option<ServerChoice>,
    pub case: OutcomeCase,
}

impl AllocationOutcome {
    /// C_true(sel) - C_true(opt), when both exist.
    pub fn cost_gap(&self) -> Option<f64> {
        Some(self.selected_cost? - self.optimal.as_ref()?.cost)
    }

    pub fn allocation_correct(&self) -> bool {
        match (&self.selected, &self.optimal) {
            (Some(s), Some(o)) => s.server == o.server,
            _ => false,
        }
    }

    pub fn path_feasible(&self, limit: f64) -> bool {
        self.true_latency.is_some_and(|l| l <= limit)
    }
}

/// Case derivation from the graded quantities alone.
pub fn derive_case(
    selected: Option<(usize, f64, f64)>,
    optimal: Option<(usize, f64)>,
    limit: f64,
) -> OutcomeCase {
    // selected = (server, true latency of chosen path, true cost)
    // optimal = (server, true cost)
    let Some((opt_id, opt_cost)) = optimal else {
        return OutcomeCase::OtherFailure;
    };
    let Some((sel_id, sel_latency, sel_cost)) = selected else {
        return OutcomeCase::LatencyViolated;
    };
    if sel_latency > limit {
        OutcomeCase::LatencyViolated
    } else if sel_id == opt_id {
        OutcomeCase::Optimal
    } else if sel_cost > opt_cost {
        OutcomeCase::LatencyOkCostSuboptimal
    } else {
        OutcomeCase::OtherFailure
    }
}

/// Ground truth prepared once per time step for grading many decisions.
pub struct TruthOracle<'a> {
    net: &'a NetworkState,
    graph: Graph,
    costs: Vec<f64>,
}

impl<'a> TruthOracle<'a> {
    pub fn new(net: &'a NetworkState) -> Self {
        TruthOracle {
            net,
            graph: net.truth_graph(),
            costs: net.server_costs(),
        }
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn optimal_server(&self, src: NodeId, limit: f64) -> Result<Option<ServerChoice>> {
        cheapest_within(&self.graph, &self.net.servers, &self.costs, src, limit)
    }

    pub fn classify(
        &self,
        choice: Option<ServerChoice>,
        src: NodeId,
        limit: f64,
    ) -> Result<AllocationOutcome> {
        let optimal = self.optimal_server(src, limit)?;
        let true_latency = match &choice {
            Some(c) => Some(
                self.graph
                    .path_latency(&c.path.nodes)
                    .ok_or(Error::UnknownNode(c.node))?,
            ),
            None => None,
        };
        let selected_cost = choice.as_ref().map(|c| self.costs[c.server]);
        let case = derive_case(
            choice
                .as_ref()
                .zip(true_latency)
                .zip(selected_cost)
                .map(|((c, l), k)| (c.server, l, k)),
            optimal.as_ref().map(|o| (o.server, o.cost)),
            limit,
        );
        Ok(AllocationOutcome {
            selected: choice,
            true_latency,
            selected_cost,
            optimal,
            case,
        })
    }
}

pub fn classify_outcome(
    choice: Option<ServerChoice>,
    truth: &NetworkState,
    src: NodeId,
    limit: f64,
) -> Result<AllocationOutcome> {
    TruthOracle::new(truth).classify(choice, src, limit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{Edge, Node, NodeKind, TopologyConfig};
    use crate::view_sync::GlobalView;

    fn triangle() -> Graph {
        let mut g = Graph::new(3);
        g.add_edge(0, 1, 3.0);
        g.add_edge(1, 2, 3.0);
        g.add_edge(0, 2, 7.0);
        g
    }

    #[test]
    fn self_path_is_trivial() {
        let p = shortest_path(&triangle(), 1, 1).unwrap().unwrap();
        assert_eq!(p.nodes, vec![1]);
        assert_eq!(p.latency, 0.0);
    }

    #[test]
    fn triangle_prefers_two_hops() {
        let p = shortest_path(&triangle(), 0, 2).unwrap().unwrap();
        assert_eq!(p.nodes, vec![0, 1, 2]);
        assert_eq!(p.latency, 6.0);
    }

    #[test]
    fn ties_prefer_fewer_hops_then_lexicographic() {
        // 0-1-3 and 0-2-3 both 4 ms; 0-3 direct also 4 ms.
        let mut g = Graph::new(4);
        g.add_edge(0, 2, 2.0);
        g.add_edge(2, 3, 2.0);
        g.add_edge(0, 1, 2.0);
        g.add_edge(1, 3, 2.0);
        assert_eq!(shortest_path(&g, 0, 3).unwrap().unwrap().nodes, vec![0, 1, 3]);
        g.add_edge(0, 3, 4.0);
        assert_eq!(shortest_path(&g, 0, 3).unwrap().unwrap().nodes, vec![0, 3]);
    }

    #[test]
    fn unreachable_and_unknown() {
        let mut g = Graph::new(3);
        g.add_edge(0, 1, 1.0);
        assert_eq!(shortest_path(&g, 0, 2).unwrap(), None);
        assert!(matches!(shortest_path(&g, 0, 9), Err(Error::UnknownNode(9))));
        assert!(matches!(shortest_path(&g, 9, 0), Err(Error::UnknownNode(9))));
    }

    /// src(0) -- 2ms -- s1(1, cost c1); src(0) -- 3ms -- s2(2, cost c2)
    fn two_servers(c1: f64, c2: f64) -> NetworkState {
        NetworkState {
            nodes: vec![
                Node { id: 0, domain: 0, kind: NodeKind::Switch },
                Node { id: 1, domain: 0, kind: NodeKind::Server },
                Node { id: 2, domain: 1, kind: NodeKind::Server },
            ],
            edges: vec![
                Edge { a: 0, b: 1, latency: 2.0 },
                Edge { a: 0, b: 2, latency: 3.0 },
            ],
            servers: vec![Server { node: 1, cost: c1 }, Server { node: 2, cost: c2 }],
            domain_volatility: vec![1.0, 1.0],
            n_domains: 2,
            time_step: 0,
        }
    }

    #[test]
    fn optimal_picks_cheapest_feasible() {
        let net = two_servers(50.0, 30.0);
        let best = optimal_server(&net, 0, 10.0).unwrap().unwrap();
        assert_eq!(best.server, 1);
        assert_eq!(best.cost, 30.0);
        // Tighter ceiling excludes the cheaper one.
        assert_eq!(optimal_server(&net, 0, 2.5).unwrap().unwrap().server, 0);
        assert!(optimal_server(&net, 0, 1.0).unwrap().is_none());
    }

    #[test]
    fn cost_ties_go_to_lowest_index() {
        let net = two_servers(40.0, 40.0);
        assert_eq!(optimal_server(&net, 0, 10.0).unwrap().unwrap().server, 0);
    }

    #[test]
    fn classify_branches() {
        let net = two_servers(50.0, 30.0);
        let opt = optimal_server(&net, 0, 10.0).unwrap();
        let out = classify_outcome(opt.clone(), &net, 0, 10.0).unwrap();
        assert_eq!(out.case, OutcomeCase::Optimal);
        assert_eq!(out.cost_gap(), Some(0.0));

        let other = cheapest_within(&net.truth_graph(), &net.servers, &[50.0, 999.0], 0, 10.0)
            .unwrap();
        let out = classify_outcome(other, &net, 0, 10.0).unwrap();
        assert_eq!(out.case, OutcomeCase::LatencyOkCostSuboptimal);
        assert_eq!(out.cost_gap(), Some(20.0));

        // None while S_L is non-empty.
        let out = classify_outcome(None, &net, 0, 10.0).unwrap();
        assert_eq!(out.case, OutcomeCase::LatencyViolated);
        // S_L empty.
        let out = classify_outcome(None, &net, 0, 1.0).unwrap();
        assert_eq!(out.case, OutcomeCase::OtherFailure);
    }

    #[test]
    fn thirteen_ms_path_violates_twelve_ms_ceiling() {
        let case = derive_case(Some((0, 13.0, 40.0)), Some((1, 35.0)), 12.0);
        assert_eq!(case, OutcomeCase::LatencyViolated);
        // Even when the chosen server is the optimum.
        let case = derive_case(Some((1, 13.0, 35.0)), Some((1, 35.0)), 12.0);
        assert_eq!(case, OutcomeCase::LatencyViolated);
    }

    #[test]
    fn fresh_view_matches_truth() {
        for seed in 0..10 {
            let cfg = TopologyConfig {
                seed,
                ..TopologyConfig::default()
            };
            let net = NetworkState::generate(&cfg).unwrap();
            let view = GlobalView::fresh(&net);
            for src in net.switches_in(0) {
                assert_eq!(
                    view_server_choice(&view, &net, src, 10.0).unwrap(),
                    optimal_server(&net, src, 10.0).unwrap()
                );
            }
        }
    }

    #[test]
    fn stale_choice_is_returned_even_if_truly_infeasible() {
        let mut net = two_servers(50.0, 30.0);
        let view = GlobalView::fresh(&net);
        // Truth drifts: server 2's link becomes slow.
        net.edges[1].latency = 9.0;
        let choice = view_server_choice(&view, &net, 0, 5.0).unwrap().unwrap();
        assert_eq!(choice.server, 1);
        let out = classify_outcome(Some(choice), &net, 0, 5.0).unwrap();
        assert_eq!(out.case, OutcomeCase::LatencyViolated);
        assert_eq!(out.true_latency, Some(9.0));
    }
}
