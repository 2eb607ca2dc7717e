use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use sdn_sync::config::{echo_config, load_config};
use sdn_sync::harness::{
    self, evaluate_checkpoints, read_records_csv, recovery_episodes, reward_curve, run_experiment, run_sweep,
    ExperimentConfig, ExperimentResult, Phase,
};
use sdn_sync::topology::NetworkState;
use sdn_sync::Error;

/// Environment variable naming the default output directory.
const OUT_ENV: &str = "SDNSYNC_OUT";

#[derive(Parser)]
#[command(name = "sdnsync", version, about = "Controller synchronization experiments for distributed SDN")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Config file (INI-style); defaults are used for absent keys.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Run a single seed instead of `experiment.seeds`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory [env: SDNSYNC_OUT, else `experiment.output`].
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Write the per-step JSONL trace.
    #[arg(long)]
    trace: bool,
    /// Dotted overrides, e.g. `episode.L=12 agent.kind=ppo`.
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train every configured agent, then evaluate greedily.
    Train(Common),
    /// Evaluate agents restored from checkpoints.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Directory holding `checkpoints/` [default: the output directory].
        #[arg(long)]
        from: Option<PathBuf>,
    },
    /// Run the 6-8 controllers x SR 2-3 x L 8/10/12 grid.
    Sweep(Common),
    /// Shortest-path-routing accuracy experiment.
    Spr(Common),
    /// SPR training with network reconfiguration at episodes 30 and 58.
    ReconfigStudy(Common),
    /// Generate a network and write it as text.
    GenTopology(Common),
    /// Print the seed-averaged training reward per episode.
    Curve {
        /// Results CSV [default: <output>/results.csv].
        results: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config_error() {
            Failure::Config(e.into())
        } else {
            Failure::Runtime(e.into())
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

/// Load config with subcommand presets applied before user overrides.
fn resolve(common: &Common, presets: &[&str]) -> Result<ExperimentConfig, Failure> {
    let mut overrides: Vec<String> = presets.iter().map(|s| s.to_string()).collect();
    overrides.extend(common.overrides.iter().cloned());
    let mut cfg = load_config(common.config.as_deref(), &overrides).map_err(|e| Failure::Config(e.into()))?;
    if let Some(seed) = common.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(out) = &common.out {
        cfg.output = out.clone();
    } else if let Some(out) = std::env::var_os(OUT_ENV) {
        cfg.output = PathBuf::from(out);
    }
    cfg.trace |= common.trace;
    Ok(cfg)
}

fn print_summary(result: &ExperimentResult) {
    println!(
        "{:<12} {:>12} {:>10} {:>8} {:>8} {:>8}",
        "agent", "reward", "cost", "alloc", "path", "spr"
    );
    for s in &result.summary {
        let f = |v: Option<f64>, p: usize| v.map(|x| format!("{x:.p$}")).unwrap_or_else(|| "-".into());
        println!(
            "{:<12} {:>12} {:>10} {:>8} {:>8} {:>8}",
            s.agent.name(),
            f(s.mean[0], 2),
            f(s.mean[1], 3),
            f(s.mean[2], 4),
            f(s.mean[3], 4),
            f(s.mean[4], 4)
        );
    }
}

fn train(cfg: &ExperimentConfig) -> Result<ExperimentResult, Failure> {
    echo_config(cfg)?;
    let result = run_experiment(cfg)?;
    print_summary(&result);
    println!("results: {}", cfg.output.join(harness::RESULTS_FILE).display());
    Ok(result)
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn reconfig_study(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let result = train(cfg)?;
    let events = &cfg.episode.reconfig_episodes;
    let mut text = String::from("agent,seed,event,recovery_episodes,censored\n");
    for rep in &result.replicas {
        let series: Vec<f64> = rep
            .records
            .iter()
            .filter(|r| r.phase == Phase::Train)
            .map(|r| r.mean_reward)
            .collect();
        for (i, &ev) in events.iter().enumerate() {
            let end = events.get(i + 1).copied().unwrap_or(series.len());
            let rec = recovery_episodes(&series, ev, end, RECOVERY_WINDOW, RECOVERY_FRACTION);
            text += &format!("{},{},{},{},{}\n", rep.agent, rep.seed, ev, rec.episodes, rec.censored);
        }
    }
    let path = cfg.output.join("recovery.csv");
    write(&path, &text)?;
    print!("{text}");
    Ok(())
}

const RECOVERY_WINDOW: usize = 5;
const RECOVERY_FRACTION: f64 = 0.9;

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Train(c) => {
            train(&resolve(&c, &[])?)?;
        }
        Command::Eval { common, from } => {
            let cfg = resolve(&common, &[])?;
            let from = from.unwrap_or_else(|| cfg.output.clone());
            let result = evaluate_checkpoints(&cfg, &from)?;
            std::fs::create_dir_all(&cfg.output).with_context(|| format!("creating {}", cfg.output.display()))?;
            write(&cfg.output.join("eval_results.csv"), &result.csv())?;
            print_summary(&result);
        }
        Command::Sweep(c) => {
            let cfg = resolve(&c, &[])?;
            echo_config(&cfg)?;
            let results = run_sweep(&cfg)?;
            for (scenario, result) in &results {
                println!("== {}", scenario.label());
                print_summary(result);
            }
        }
        Command::Spr(c) => {
            train(&resolve(&c, &["episode.app=spr", "agent.kind=dqn,ddqn,ppo,random,round_robin"])?)?;
        }
        Command::ReconfigStudy(c) => {
            let cfg = resolve(
                &c,
                &[
                    "episode.app=spr",
                    "episode.reconfig=30,58",
                    "agent.kind=ppo,ddqn,random,round_robin",
                    "experiment.trace=true",
                ],
            )?;
            reconfig_study(&cfg)?;
        }
        Command::GenTopology(c) => {
            let cfg = resolve(&c, &[])?;
            let mut topo = cfg.topology.clone();
            if let Some(seed) = c.seed {
                topo.seed = seed;
            }
            let net = NetworkState::generate(&topo)?;
            std::fs::create_dir_all(&cfg.output).with_context(|| format!("creating {}", cfg.output.display()))?;
            let path = cfg.output.join("topology.txt");
            write(&path, &net.to_text())?;
            println!(
                "{} nodes, {} edges, {} servers, hash {} -> {}",
                net.node_count(),
                net.edges.len(),
                net.servers.len(),
                net.structure_hash(),
                path.display()
            );
        }
        Command::Curve { results, common } => {
            let cfg = resolve(&common, &[])?;
            let path = results.unwrap_or_else(|| cfg.output.join(harness::RESULTS_FILE));
            let text = std::fs::read_to_string(&path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            print!("{}", reward_curve(&read_records_csv(&text)?));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
