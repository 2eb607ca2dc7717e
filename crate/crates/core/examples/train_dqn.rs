//! Train DQN and DDQN against the random and round-robin baselines on the
//! offloading task, then print greedy-evaluation means.
//!
//!     cargo run --release --example train_dqn -- [episodes] [seeds]

use sdn_sync::agents::{AgentConfig, AgentKind};
use sdn_sync::harness::{execute, ExperimentConfig};

fn main() -> sdn_sync::Result<()> {
    let mut args = std::env::args().skip(1);
    let episodes = args.next().and_then(|a| a.parse().ok()).unwrap_or(40);
    let seeds: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(2);
    let cfg = ExperimentConfig {
        agents: [AgentKind::Dqn, AgentKind::Ddqn, AgentKind::Random, AgentKind::RoundRobin]
            .into_iter()
            .map(AgentConfig::new)
            .collect(),
        episodes,
        eval_episodes: 10,
        seeds: (0..seeds).collect(),
        ..ExperimentConfig::default()
    };
    let result = execute(&cfg)?;
    println!("{:<12} {:>10} {:>8} {:>8} {:>8}", "agent", "reward", "cost", "alloc", "path");
    for s in &result.summary {
        println!(
            "{:<12} {:>10.1} {:>8.2} {:>8.4} {:>8.4}",
            s.agent.name(),
            s.mean[0].unwrap_or(f64::NAN),
            s.mean[1].unwrap_or(f64::NAN),
            s.mean[2].unwrap_or(f64::NAN),
            s.mean[3].unwrap_or(f64::NAN)
        );
    }
    for c in result.comparisons.iter().filter(|c| c.metric == "frac_alloc_correct") {
        println!("alloc of {} relative to {}: {:+.2}%", c.agent_b, c.agent_a, c.rel_diff_pct);
    }
    Ok(())
}
