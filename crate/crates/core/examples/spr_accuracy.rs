//! Shortest-path routing on the stale view: fraction of representative
//! pairs whose view-chosen path is truly shortest, per agent.
//!
//!     cargo run --release --example spr_accuracy -- [episodes]

use sdn_sync::agents::{AgentConfig, AgentKind};
use sdn_sync::env::{App, EpisodeConfig};
use sdn_sync::harness::{execute, ExperimentConfig};

fn main() -> sdn_sync::Result<()> {
    let episodes = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(30);
    let cfg = ExperimentConfig {
        episode: EpisodeConfig {
            app: App::Spr,
            ..EpisodeConfig::default()
        },
        agents: [AgentKind::Ddqn, AgentKind::Ppo, AgentKind::Random, AgentKind::RoundRobin]
            .into_iter()
            .map(AgentConfig::new)
            .collect(),
        episodes,
        eval_episodes: 10,
        seeds: vec![0, 1],
        ..ExperimentConfig::default()
    };
    let result = execute(&cfg)?;
    for s in &result.summary {
        println!(
            "{:<12} accuracy {:.4} (std {:.4})",
            s.agent.name(),
            s.mean[4].unwrap_or(f64::NAN),
            s.std[4].unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
