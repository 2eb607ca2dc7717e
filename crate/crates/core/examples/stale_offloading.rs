//! Watch one task's server choice degrade as a controller's view ages.
//! Domain 0 is never synchronized; every other domain is kept fresh.
//!
//!     cargo run --example stale_offloading -- [latency_ceiling]

use sdn_sync::env::{reward_arvr, EpisodeConfig, RewardParams, SyncEnv};
use sdn_sync::routing::{classify_outcome, view_server_choice};
use sdn_sync::topology::TopologyConfig;
use sdn_sync::view_sync::{subset_to_index, SyncAction};

fn main() -> sdn_sync::Result<()> {
    let limit: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(10.0);
    let n = 4;
    let topology = TopologyConfig {
        n_domains: n,
        seed: 5,
        ..TopologyConfig::default()
    };
    let episode = EpisodeConfig {
        sync_rate: n - 1,
        latency_ceiling: limit,
        horizon: 1000,
        ..EpisodeConfig::default()
    };
    let mut env = SyncEnv::new(topology, episode, RewardParams::default(), 5)?;
    env.reset();
    let keep_fresh = subset_to_index(&SyncAction::new((1..n).collect(), n, n - 1)?, n);
    let sources: Vec<usize> = env.network().switches_in(0).collect();

    println!("{:>9} {:>8} {:>8} {:>10}", "staleness", "correct", "feasible", "reward");
    for round in 0..=6 {
        let (mut correct, mut feasible, mut reward) = (0, 0, 0.0);
        for &src in &sources {
            let choice = view_server_choice(env.view(), env.network(), src, limit)?;
            let outcome = classify_outcome(choice, env.network(), src, limit)?;
            correct += outcome.allocation_correct() as usize;
            feasible += outcome.path_feasible(limit) as usize;
            reward += reward_arvr(&outcome, env.reward_params());
        }
        println!(
            "{:>9} {:>5}/{:<2} {:>5}/{:<2} {:>10.1}",
            env.state().staleness[0],
            correct,
            sources.len(),
            feasible,
            sources.len(),
            reward / sources.len() as f64
        );
        for _ in 0..if round == 0 { 1 } else { 10 } {
            env.step(keep_fresh)?;
        }
    }
    Ok(())
}
