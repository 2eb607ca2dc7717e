//! Regenerate the network mid-training and measure how many episodes PPO
//! and DDQN need to regain 90% of their pre-event moving-average reward.
//!
//!     cargo run --release --example reconfig_recovery -- [episodes] [seeds]

use sdn_sync::agents::{AgentConfig, AgentKind};
use sdn_sync::env::{App, EpisodeConfig};
use sdn_sync::harness::{execute, moving_average, recovery_episodes, ExperimentConfig, Phase};

fn main() -> sdn_sync::Result<()> {
    let mut args = std::env::args().skip(1);
    let episodes = args.next().and_then(|a| a.parse().ok()).unwrap_or(80);
    let seeds: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(2);
    let events = vec![30, 58];
    let cfg = ExperimentConfig {
        episode: EpisodeConfig {
            app: App::Spr,
            reconfig_episodes: events.clone(),
            ..EpisodeConfig::default()
        },
        agents: vec![AgentConfig::new(AgentKind::Ppo), AgentConfig::new(AgentKind::Ddqn)],
        episodes,
        eval_episodes: 0,
        seeds: (0..seeds).collect(),
        ..ExperimentConfig::default()
    };
    let result = execute(&cfg)?;
    for rep in &result.replicas {
        let series: Vec<f64> = rep
            .records
            .iter()
            .filter(|r| r.phase == Phase::Train)
            .map(|r| r.mean_reward)
            .collect();
        let ma = moving_average(&series, 5);
        let mut line = format!("{:<5} seed {}:", rep.agent.name(), rep.seed);
        for (i, &ev) in events.iter().enumerate() {
            let end = events.get(i + 1).copied().unwrap_or(series.len());
            let rec = recovery_episodes(&series, ev, end, 5, 0.9);
            let before = ma.get(ev.saturating_sub(1)).copied().unwrap_or(f64::NAN);
            line += &format!(
                "  event {ev}: MA {before:.0} -> {} episodes{}",
                rec.episodes,
                if rec.censored { " (censored)" } else { "" }
            );
        }
        println!("{line}");
    }
    Ok(())
}
