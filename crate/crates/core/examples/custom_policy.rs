//! Drive the environment by hand with a policy written against the `Agent`
//! trait: synchronize the controllers with the largest staleness.

use sdn_sync::agents::{Agent, AgentKind};
use sdn_sync::env::{EpisodeConfig, RewardParams, SyncEnv};
use sdn_sync::harness::run_episode;
use sdn_sync::topology::TopologyConfig;
use sdn_sync::view_sync::{subset_to_index, SyncAction};

struct Stalest {
    n: usize,
    sync_rate: usize,
}

impl Agent for Stalest {
    fn kind(&self) -> AgentKind {
        // Reported as round-robin in metrics; the harness only needs a label.
        AgentKind::RoundRobin
    }

    fn act(&mut self, observation: &[f64], _explore: bool) -> sdn_sync::Result<usize> {
        let mut order: Vec<usize> = (0..self.n).collect();
        order.sort_by(|&a, &b| observation[b].total_cmp(&observation[a]).then(a.cmp(&b)));
        let action = SyncAction::new(order[..self.sync_rate].to_vec(), self.n, self.sync_rate)?;
        Ok(subset_to_index(&action, self.n))
    }

    fn observe(&mut self, _: &[f64], _: usize, _: f64, _: &[f64], _: bool) -> sdn_sync::Result<()> {
        Ok(())
    }
}

fn main() -> sdn_sync::Result<()> {
    let topology = TopologyConfig::default();
    let episode = EpisodeConfig {
        tasks_per_step: 4,
        ..EpisodeConfig::default()
    };
    let mut env = SyncEnv::new(topology, episode, RewardParams::default(), 11)?;
    let mut policy = Stalest {
        n: env.n_controllers(),
        sync_rate: env.episode_config().sync_rate,
    };
    for episode in 0..3 {
        let (rec, steps) = run_episode(&mut env, &mut policy, false)?;
        let worst = steps.iter().map(|s| s.reward).fold(f64::INFINITY, f64::min);
        println!(
            "episode {episode}: reward {:.1}, alloc {:.3}, path {:.3}, worst step {worst}",
            rec.mean_reward, rec.frac_alloc_correct, rec.frac_path_feasible
        );
    }
    Ok(())
}
