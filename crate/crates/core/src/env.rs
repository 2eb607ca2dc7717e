//! The controller-synchronization MDP.
//!
//! State is the staleness vector, an action is one of the C(n, SR)
//! controller subsets, and the reward grades either AR/VR offloading
//! decisions or shortest-path correctness made on the stale view.
//!
//! A step runs: sync the chosen controllers, advance background dynamics,
//! draw tasks, decide on the view, grade against truth. The freshest
//! snapshot is therefore one tick old when decisions are graded.

use rand::seq::IteratorRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::routing::{cheapest_within, shortest_paths_from, AllocationOutcome, OutcomeCase, TruthOracle};
use crate::topology::{NetworkState, NodeId, TopologyConfig};
use crate::view_sync::{apply_sync, enumerate_actions, GlobalView, SyncAction, SyncState};

/// Relative tolerance when comparing a view path's true latency with the
/// true optimum (summation order differs between the two).
const PATH_EQ_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum App {
    Arvr,
    Spr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SprPairs {
    /// Ordered pairs of domain representatives (lowest-id switch).
    Representatives,
    /// Ordered pairs of all switches.
    All,
}

/// Penalty magnitudes; rewards are `-r1`, `-r2`, `-K * gap`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    pub r1: f64,
    pub r2: f64,
    pub cost_scale: f64,
    pub k_spr: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        RewardParams {
            r1: 10_000.0,
            r2: 8_000.0,
            cost_scale: 80.0,
            k_spr: 100.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub horizon: usize,
    pub app: App,
    /// Latency ceiling L in ms.
    pub latency_ceiling: f64,
    pub sync_rate: usize,
    pub tasks_per_step: usize,
    pub reconfig_episodes: Vec<usize>,
    pub spr_pairs: SprPairs,
    /// Staleness counters are capped at this value for the network input.
    pub staleness_cap: u64,
    /// At reset, let truth run this many steps past the view so every
    /// controller starts this stale.
    pub stale_start: u64,
    /// Every reset restores the initial network and random stream, making
    /// each episode the same fixed MDP.
    pub replay: bool,
    /// Skip background dynamics during steps.
    pub frozen: bool,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            horizon: 50,
            app: App::Arvr,
            latency_ceiling: 10.0,
            sync_rate: 2,
            tasks_per_step: 1,
            reconfig_episodes: Vec::new(),
            spr_pairs: SprPairs::Representatives,
            staleness_cap: 50,
            stale_start: 0,
            replay: false,
            frozen: false,
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self, n_domains: usize) -> Result<()> {
        if self.horizon < 1 {
            return Err(Error::config("episode.H", "must be >= 1"));
        }
        if self.sync_rate < 1 || self.sync_rate > n_domains {
            return Err(Error::config(
                "episode.SR",
                format!("must be in [1, {n_domains}], got {}", self.sync_rate),
            ));
        }
        if !(self.latency_ceiling > 0.0) {
            return Err(Error::config("episode.L", "must be > 0"));
        }
        if self.tasks_per_step < 1 {
            return Err(Error::config("episode.tasks_per_step", "must be >= 1"));
        }
        Ok(())
    }
}

pub fn reward_for_case(case: OutcomeCase, cost_gap: Option<f64>, params: &RewardParams) -> f64 {
    match case {
        OutcomeCase::LatencyViolated => -params.r1,
        OutcomeCase::LatencyOkCostSuboptimal => -params.cost_scale * cost_gap.unwrap_or(0.0),
        OutcomeCase::Optimal => 0.0,
        OutcomeCase::OtherFailure => -params.r2,
    }
}

pub fn reward_arvr(outcome: &AllocationOutcome, params: &RewardParams) -> f64 {
    reward_for_case(outcome.case, outcome.cost_gap(), params)
}

pub fn reward_spr(correct_pairs: usize, params: &RewardParams) -> f64 {
    params.k_spr * correct_pairs as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub source: NodeId,
    pub case: OutcomeCase,
    pub cost_gap: Option<f64>,
    /// True cost of the selected server.
    pub cost_paid: Option<f64>,
    pub allocation_correct: bool,
    pub path_feasible: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub state_before: Vec<u64>,
    pub action: usize,
    pub reward: f64,
    pub state_after: Vec<u64>,
    pub tasks: Vec<TaskRecord>,
    pub spr_correct: usize,
    pub spr_pairs: usize,
}

impl StepRecord {
    /// Rebuild the reward from the stored grading flags.
    pub fn recompute_reward(&self, app: App, params: &RewardParams) -> f64 {
        match app {
            App::Arvr => {
                let total: f64 = self
                    .tasks
                    .iter()
                    .map(|t| reward_for_case(t.case, t.cost_gap, params))
                    .sum();
                total / self.tasks.len() as f64
            }
            App::Spr => reward_spr(self.spr_correct, params),
        }
    }
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub record: StepRecord,
}

#[derive(Clone, Debug)]
pub struct SyncEnv {
    topology: TopologyConfig,
    episode: EpisodeConfig,
    rewards: RewardParams,
    net: NetworkState,
    view: GlobalView,
    sync: SyncState,
    rng: ChaCha8Rng,
    actions: Vec<SyncAction>,
    steps: usize,
    initial: Option<(NetworkState, ChaCha8Rng)>,
}

impl SyncEnv {
    /// Builds the network from `topology.seed`; dynamics and task arrivals
    /// draw from a stream seeded with `seed`.
    pub fn new(
        topology: TopologyConfig,
        episode: EpisodeConfig,
        rewards: RewardParams,
        seed: u64,
    ) -> Result<Self> {
        topology.validate()?;
        episode.validate(topology.n_domains)?;
        let net = NetworkState::generate(&topology)?;
        let rng = ChaCha8Rng::seed_from_u64(seed);
        let actions = enumerate_actions(topology.n_domains, episode.sync_rate);
        let initial = episode.replay.then(|| (net.clone(), rng.clone()));
        let view = GlobalView::fresh(&net);
        let sync = SyncState::fresh(topology.n_domains);
        Ok(SyncEnv {
            topology,
            episode,
            rewards,
            net,
            view,
            sync,
            rng,
            actions,
            steps: 0,
            initial,
        })
    }

    pub fn n_controllers(&self) -> usize {
        self.topology.n_domains
    }

    pub fn observation_dim(&self) -> usize {
        self.topology.n_domains
    }

    pub fn action_count(&self) -> usize {
        self.actions.len()
    }

    pub fn action(&self, index: usize) -> Option<&SyncAction> {
        self.actions.get(index)
    }

    pub fn episode_config(&self) -> &EpisodeConfig {
        &self.episode
    }

    pub fn topology_config(&self) -> &TopologyConfig {
        &self.topology
    }

    pub fn reward_params(&self) -> &RewardParams {
        &self.rewards
    }

    pub fn network(&self) -> &NetworkState {
        &self.net
    }

    pub fn view(&self) -> &GlobalView {
        &self.view
    }

    pub fn state(&self) -> &SyncState {
        &self.sync
    }

    pub fn observation(&self) -> Vec<f64> {
        self.sync.normalized(self.episode.staleness_cap)
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    /// Start an episode: view equals truth, staleness all zero (or all
    /// `stale_start`).
    pub fn reset(&mut self) -> Vec<f64> {
        if let Some((net, rng)) = &self.initial {
            self.net = net.clone();
            self.rng = rng.clone();
        }
        self.view = GlobalView::fresh(&self.net);
        self.sync = SyncState::fresh(self.n_controllers());
        for _ in 0..self.episode.stale_start {
            self.net.step_dynamics(&self.topology, &mut self.rng);
        }
        self.sync
            .staleness
            .iter_mut()
            .for_each(|s| *s = self.episode.stale_start);
        self.steps = 0;
        self.observation()
    }

    /// Regenerate the network from `reconfig_seed`. Takes effect for the
    /// following `reset`.
    pub fn reconfigure(&mut self, reconfig_seed: u64) -> Result<()> {
        self.net = self.net.reconfigure(&self.topology, reconfig_seed)?;
        if let Some((net, _)) = &mut self.initial {
            *net = self.net.clone();
        }
        self.view = GlobalView::fresh(&self.net);
        Ok(())
    }

    pub fn step(&mut self, action_index: usize) -> Result<StepOutcome> {
        let action = self
            .actions
            .get(action_index)
            .ok_or(Error::ActionIndex {
                index: action_index,
                size: self.actions.len(),
            })?
            .clone();
        let state_before = self.sync.staleness.clone();
        apply_sync(
            &mut self.view,
            &mut self.sync,
            &self.net,
            &action,
            self.episode.sync_rate,
        )?;
        if !self.episode.frozen {
            self.net.step_dynamics(&self.topology, &mut self.rng);
        }

        let oracle = TruthOracle::new(&self.net);
        let view_graph = self.view.graph(&self.net);
        let limit = self.episode.latency_ceiling;

        let mut tasks = Vec::with_capacity(self.episode.tasks_per_step);
        for _ in 0..self.episode.tasks_per_step {
            let domain = self.rng.gen_range(0..self.n_controllers());
            let source = self
                .net
                .switches_in(domain)
                .choose(&mut self.rng)
                .expect("domain has switches");
            let choice = cheapest_within(
                &view_graph,
                &self.net.servers,
                self.view.server_costs(),
                source,
                limit,
            )?;
            let outcome = oracle.classify(choice, source, limit)?;
            tasks.push(TaskRecord {
                source,
                case: outcome.case,
                cost_gap: outcome.cost_gap(),
                cost_paid: outcome.selected_cost,
                allocation_correct: outcome.allocation_correct(),
                path_feasible: outcome.path_feasible(limit),
            });
        }

        let (spr_correct, spr_pairs) = self.shortest_path_accuracy(&oracle, &view_graph)?;
        self.steps += 1;
        let mut record = StepRecord {
            state_before,
            action: action_index,
            reward: 0.0,
            state_after: self.sync.staleness.clone(),
            tasks,
            spr_correct,
            spr_pairs,
        };
        record.reward = record.recompute_reward(self.episode.app, &self.rewards);
        Ok(StepOutcome {
            observation: self.observation(),
            reward: record.reward,
            done: self.steps >= self.episode.horizon,
            record,
        })
    }

    /// Count ordered source/destination pairs whose view-chosen path is
    /// truly shortest.
    fn shortest_path_accuracy(
        &self,
        oracle: &TruthOracle<'_>,
        view_graph: &crate::routing::Graph,
    ) -> Result<(usize, usize)> {
        let endpoints: Vec<NodeId> = match self.episode.spr_pairs {
            SprPairs::Representatives => self.net.domain_representatives(),
            SprPairs::All => (0..self.n_controllers())
                .flat_map(|d| self.net.switches_in(d).collect::<Vec<_>>())
                .collect(),
        };
        let mut correct = 0;
        let mut pairs = 0;
        for &src in &endpoints {
            let truth = shortest_paths_from(oracle.graph(), src)?;
            let view = shortest_paths_from(view_graph, src)?;
            for &dst in &endpoints {
                if dst == src {
                    continue;
                }
                pairs += 1;
                let (Some(t), Some(v)) = (&truth[dst], &view[dst]) else {
                    continue;
                };
                let realized = oracle
                    .graph()
                    .path_latency(&v.nodes)
                    .expect("view and truth share structure");
                if (realized - t.latency).abs() <= PATH_EQ_TOL * t.latency.max(1.0) {
                    correct += 1;
                }
            }
        }
        Ok((correct, pairs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(topo: TopologyConfig, ep: EpisodeConfig) -> SyncEnv {
        SyncEnv::new(topo, ep, RewardParams::default(), 1).unwrap()
    }

    fn frozen_topology(n: usize, seed: u64) -> TopologyConfig {
        TopologyConfig {
            n_domains: n,
            latency_walk_step: 0.0,
            cost_walk_step: 0.0,
            seed,
            ..TopologyConfig::default()
        }
    }

    #[test]
    fn reset_is_fresh_boot() {
        let mut e = env(
            TopologyConfig {
                n_domains: 3,
                ..TopologyConfig::default()
            },
            EpisodeConfig::default(),
        );
        assert_eq!(e.reset(), vec![0.0; 3]);
        assert_eq!(e.state().staleness, vec![0, 0, 0]);
        assert_eq!(e.view().edge_latencies(), e.network().edge_latencies().as_slice());
    }

    #[test]
    fn same_seed_same_network() {
        let a = env(TopologyConfig::default(), EpisodeConfig::default());
        let b = env(TopologyConfig::default(), EpisodeConfig::default());
        assert_eq!(a.network(), b.network());
    }

    #[test]
    fn reward_branches() {
        let p = RewardParams::default();
        assert_eq!(reward_for_case(OutcomeCase::LatencyViolated, None, &p), -10_000.0);
        assert_eq!(reward_for_case(OutcomeCase::Optimal, Some(0.0), &p), 0.0);
        assert_eq!(reward_for_case(OutcomeCase::OtherFailure, None, &p), -8_000.0);
        assert_eq!(
            reward_for_case(OutcomeCase::LatencyOkCostSuboptimal, Some(20.0), &p),
            -1600.0
        );
        assert_eq!(reward_spr(0, &p), 0.0);
        assert_eq!(reward_spr(3, &p), 300.0);
    }

    #[test]
    fn full_sync_frozen_is_consistent() {
        for app in [App::Arvr, App::Spr] {
            let mut e = env(
                frozen_topology(4, 11),
                EpisodeConfig {
                    sync_rate: 4,
                    app,
                    tasks_per_step: 3,
                    ..EpisodeConfig::default()
                },
            );
            e.reset();
            loop {
                let out = e.step(0).unwrap();
                let rec = &out.record;
                assert_eq!(rec.spr_correct, rec.spr_pairs);
                assert_eq!(rec.spr_pairs, 12);
                for t in &rec.tasks {
                    assert!(matches!(t.case, OutcomeCase::Optimal | OutcomeCase::OtherFailure));
                }
                if app == App::Spr {
                    assert_eq!(out.reward, 1200.0);
                }
                if out.done {
                    break;
                }
            }
            assert_eq!(e.steps_taken(), 50);
        }
    }

    #[test]
    fn invalid_action_rejected() {
        let mut e = env(TopologyConfig::default(), EpisodeConfig::default());
        e.reset();
        assert!(matches!(e.step(15), Err(Error::ActionIndex { index: 15, size: 15 })));
    }

    #[test]
    fn stored_reward_recomputes() {
        let mut e = env(
            TopologyConfig {
                seed: 4,
                ..TopologyConfig::default()
            },
            EpisodeConfig {
                tasks_per_step: 4,
                ..EpisodeConfig::default()
            },
        );
        e.reset();
        for i in 0..50 {
            let out = e.step(i % e.action_count()).unwrap();
            assert_eq!(out.record.recompute_reward(App::Arvr, e.reward_params()), out.reward);
            assert!(out.reward <= 0.0 && out.reward >= -10_000.0);
        }
    }

    #[test]
    fn replay_makes_episodes_identical() {
        let mut e = env(
            TopologyConfig::default(),
            EpisodeConfig {
                replay: true,
                stale_start: 3,
                horizon: 5,
                ..EpisodeConfig::default()
            },
        );
        let run = |e: &mut SyncEnv| {
            let obs = e.reset();
            let rewards: Vec<f64> = (0..5).map(|i| e.step(i).unwrap().reward).collect();
            (obs, rewards)
        };
        let first = run(&mut e);
        assert_eq!(first.0, vec![3.0 / 50.0; 6]);
        assert_eq!(first, run(&mut e));
    }
}
