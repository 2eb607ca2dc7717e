//! The controller-count x sync-rate x latency-ceiling grid with the two
//! baselines, written under a temporary directory.
//!
//!     cargo run --release --example scenario_sweep -- [episodes]

use sdn_sync::agents::{AgentConfig, AgentKind};
use sdn_sync::harness::{run_sweep, ExperimentConfig, SWEEP_FILE};

fn main() -> sdn_sync::Result<()> {
    let episodes = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(3);
    let out = std::env::temp_dir().join("sdnsync-sweep-example");
    let cfg = ExperimentConfig {
        agents: vec![AgentConfig::new(AgentKind::Random), AgentConfig::new(AgentKind::RoundRobin)],
        episodes,
        eval_episodes: 3,
        output: out.clone(),
        ..ExperimentConfig::default()
    };
    let results = run_sweep(&cfg)?;
    println!("{:<14} {:>14} {:>14}", "scenario", "random alloc", "rr alloc");
    for (scenario, result) in &results {
        let alloc = |k| {
            result
                .summary
                .iter()
                .find(|s| s.agent == k)
                .and_then(|s| s.mean[2])
                .unwrap_or(f64::NAN)
        };
        println!(
            "{:<14} {:>14.4} {:>14.4}",
            scenario.label(),
            alloc(AgentKind::Random),
            alloc(AgentKind::RoundRobin)
        );
    }
    println!("summary: {}", out.join(SWEEP_FILE).display());
    Ok(())
}
