//! Flat INI-style experiment configuration.
//!
//! ```text
//! # comment
//! [episode]
//! L = 12
//! SR = 2
//! [agent]
//! kind = dqn, ddqn, random, round_robin
//! ```
//!
//! Keys are addressed as `section.key`; a key outside any section must be
//! written dotted. Overrides use the same dotted form and are applied after
//! the file. Absent keys keep their defaults. Unknown keys are errors.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::agents::{AgentConfig, AgentKind};
use crate::env::{App, SprPairs};
use crate::error::{Error, Result};
use crate::harness::ExperimentConfig;

pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.ini";

/// Every accepted key, in echo order.
pub const KEYS: &[&str] = &[
    "topology.n",
    "topology.devices_min",
    "topology.devices_max",
    "topology.servers_per_domain",
    "topology.gateways_per_pair",
    "topology.latency_lo",
    "topology.latency_hi",
    "topology.latency_walk",
    "topology.cost_lo",
    "topology.cost_hi",
    "topology.cost_walk",
    "topology.volatility_lo",
    "topology.volatility_hi",
    "topology.seed",
    "episode.H",
    "episode.app",
    "episode.L",
    "episode.SR",
    "episode.tasks_per_step",
    "episode.reconfig",
    "episode.spr_pairs",
    "episode.staleness_cap",
    "episode.stale_start",
    "episode.replay",
    "episode.frozen",
    "reward.r1",
    "reward.r2",
    "reward.K",
    "reward.k_spr",
    "agent.kind",
    "agent.gamma",
    "agent.lr",
    "agent.batch",
    "agent.replay",
    "agent.eps_start",
    "agent.eps_min",
    "agent.eps_decay_factor",
    "agent.target_sync_interval",
    "agent.clip_eps",
    "agent.ppo_epochs",
    "agent.ppo_rollout_steps",
    "agent.grad_clip",
    "agent.reward_scale",
    "experiment.episodes",
    "experiment.eval_episodes",
    "experiment.seeds",
    "experiment.output",
    "experiment.trace",
    "experiment.checkpoints",
];

fn parse_value<T: FromStr>(key: &str, value: &str, what: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(key, format!("expected {what}, got `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::config(key, format!("expected true/false, got `{value}`"))),
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str, what: &str) -> Result<Vec<T>> {
    if value.is_empty() || value == "none" {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|v| parse_value(key, v.trim(), what))
        .collect()
}

/// `0,1,2` or the half-open range `0..5`.
fn parse_seeds(key: &str, value: &str) -> Result<Vec<u64>> {
    if let Some((lo, hi)) = value.split_once("..") {
        let lo: u64 = parse_value(key, lo.trim(), "an integer")?;
        let hi: u64 = parse_value(key, hi.trim(), "an integer")?;
        return Ok((lo..hi).collect());
    }
    parse_list(key, value, "a comma-separated list of integers")
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn app_name(app: App) -> &'static str {
    match app {
        App::Arvr => "arvr",
        App::Spr => "spr",
    }
}

fn pairs_name(p: SprPairs) -> &'static str {
    match p {
        SprPairs::Representatives => "representatives",
        SprPairs::All => "all",
    }
}

/// Builder that keeps the shared agent hyperparameters apart from the
/// agent list until the end.
struct Draft {
    cfg: ExperimentConfig,
    kinds: Vec<AgentKind>,
    agent: AgentConfig,
}

impl Draft {
    fn new() -> Self {
        let cfg = ExperimentConfig::default();
        let kinds = cfg.agents.iter().map(|a| a.kind).collect();
        Draft {
            cfg,
            kinds,
            agent: AgentConfig::default(),
        }
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let c = &mut self.cfg;
        let t = &mut c.topology;
        let e = &mut c.episode;
        let r = &mut c.rewards;
        let a = &mut self.agent;
        const INT: &str = "a non-negative integer";
        const NUM: &str = "a number";
        match key {
            "topology.n" => t.n_domains = parse_value(key, value, INT)?,
            "topology.devices_min" => t.devices_min = parse_value(key, value, INT)?,
            "topology.devices_max" => t.devices_max = parse_value(key, value, INT)?,
            "topology.servers_per_domain" => t.servers_per_domain = parse_value(key, value, INT)?,
            "topology.gateways_per_pair" => t.gateways_per_pair = parse_value(key, value, INT)?,
            "topology.latency_lo" => t.latency_range.0 = parse_value(key, value, NUM)?,
            "topology.latency_hi" => t.latency_range.1 = parse_value(key, value, NUM)?,
            "topology.latency_walk" => t.latency_walk_step = parse_value(key, value, NUM)?,
            "topology.cost_lo" => t.cost_range.0 = parse_value(key, value, NUM)?,
            "topology.cost_hi" => t.cost_range.1 = parse_value(key, value, NUM)?,
            "topology.cost_walk" => t.cost_walk_step = parse_value(key, value, NUM)?,
            "topology.volatility_lo" => t.volatility_range.0 = parse_value(key, value, NUM)?,
            "topology.volatility_hi" => t.volatility_range.1 = parse_value(key, value, NUM)?,
            "topology.seed" => t.seed = parse_value(key, value, INT)?,
            "episode.H" => e.horizon = parse_value(key, value, INT)?,
            "episode.app" => {
                e.app = match value {
                    "arvr" => App::Arvr,
                    "spr" => App::Spr,
                    _ => return Err(Error::config(key, format!("expected arvr or spr, got `{value}`"))),
                }
            }
            "episode.L" => e.latency_ceiling = parse_value(key, value, NUM)?,
            "episode.SR" => e.sync_rate = parse_value(key, value, INT)?,
            "episode.tasks_per_step" => e.tasks_per_step = parse_value(key, value, INT)?,
            "episode.reconfig" => {
                e.reconfig_episodes = parse_list(key, value, "a comma-separated list of episode indices")?
            }
            "episode.spr_pairs" => {
                e.spr_pairs = match value {
                    "representatives" => SprPairs::Representatives,
                    "all" => SprPairs::All,
                    _ => {
                        return Err(Error::config(
                            key,
                            format!("expected representatives or all, got `{value}`"),
                        ))
                    }
                }
            }
            "episode.staleness_cap" => e.staleness_cap = parse_value(key, value, INT)?,
            "episode.stale_start" => e.stale_start = parse_value(key, value, INT)?,
            "episode.replay" => e.replay = parse_bool(key, value)?,
            "episode.frozen" => e.frozen = parse_bool(key, value)?,
            "reward.r1" => r.r1 = parse_value(key, value, NUM)?,
            "reward.r2" => r.r2 = parse_value(key, value, NUM)?,
            "reward.K" => r.cost_scale = parse_value(key, value, NUM)?,
            "reward.k_spr" => r.k_spr = parse_value(key, value, NUM)?,
            "agent.kind" => {
                self.kinds = value
                    .split(',')
                    .map(|k| k.trim().parse())
                    .collect::<Result<Vec<AgentKind>>>()?
            }
            "agent.gamma" => a.gamma = parse_value(key, value, NUM)?,
            "agent.lr" => {
                a.lr = match value {
                    "auto" => None,
                    v => Some(parse_value(key, v, "a number or `auto`")?),
                }
            }
            "agent.batch" => a.batch_size = parse_value(key, value, INT)?,
            "agent.replay" => a.replay_capacity = parse_value(key, value, INT)?,
            "agent.eps_start" => a.eps_start = parse_value(key, value, NUM)?,
            "agent.eps_min" => a.eps_min = parse_value(key, value, NUM)?,
            "agent.eps_decay_factor" => a.eps_decay_factor = parse_value(key, value, NUM)?,
            "agent.target_sync_interval" => a.target_sync_interval = parse_value(key, value, INT)?,
            "agent.clip_eps" => a.clip_eps = parse_value(key, value, NUM)?,
            "agent.ppo_epochs" => a.ppo_epochs = parse_value(key, value, INT)?,
            "agent.ppo_rollout_steps" => a.ppo_rollout_steps = parse_value(key, value, INT)?,
            "agent.grad_clip" => a.grad_clip = parse_value(key, value, NUM)?,
            "agent.reward_scale" => a.reward_scale = parse_value(key, value, NUM)?,
            "experiment.episodes" => c.episodes = parse_value(key, value, INT)?,
            "experiment.eval_episodes" => c.eval_episodes = parse_value(key, value, INT)?,
            "experiment.seeds" => c.seeds = parse_seeds(key, value)?,
            "experiment.output" => c.output = PathBuf::from(value),
            "experiment.trace" => c.trace = parse_bool(key, value)?,
            "experiment.checkpoints" => c.save_checkpoints = parse_bool(key, value)?,
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    fn finish(self) -> Result<ExperimentConfig> {
        let mut cfg = self.cfg;
        cfg.agents = self
            .kinds
            .into_iter()
            .map(|kind| AgentConfig {
                kind,
                ..self.agent.clone()
            })
            .collect();
        let sr = cfg.episode.sync_rate;
        if !(2..=4).contains(&sr) {
            return Err(Error::config("episode.SR", format!("must be in [2, 4], got {sr}")));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Split one `key = value` override.
pub fn parse_override(text: &str) -> Result<(String, String)> {
    let (k, v) = text.split_once('=').ok_or_else(|| Error::ConfigSyntax {
        line: 0,
        text: format!("override `{text}` is not key=value"),
    })?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

/// Parse config text, then apply `overrides` (`section.key=value`).
pub fn parse_config_str(text: &str, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut draft = Draft::new();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| Error::ConfigSyntax {
                line: i + 1,
                text: raw.to_string(),
            })?;
            section = name.trim().to_string();
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::ConfigSyntax {
            line: i + 1,
            text: raw.to_string(),
        })?;
        let k = k.trim();
        let key = if section.is_empty() {
            k.to_string()
        } else {
            format!("{section}.{k}")
        };
        draft.set(&key, v.trim())?;
    }
    for o in overrides {
        let (k, v) = parse_override(o)?;
        draft.set(&k, &v)?;
    }
    draft.finish()
}

/// Read `path` (or start from defaults when `None`) and apply overrides.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<ExperimentConfig> {
    let text = match path {
        Some(p) => fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
        None => String::new(),
    };
    parse_config_str(&text, overrides)
}

/// Fully resolved config in the same format; parsing it gives back `cfg`.
pub fn to_ini(cfg: &ExperimentConfig) -> String {
    let t = &cfg.topology;
    let e = &cfg.episode;
    let r = &cfg.rewards;
    let a = cfg.agents.first().cloned().unwrap_or_default();
    let kinds: Vec<&str> = cfg.agents.iter().map(|a| a.kind.name()).collect();
    let mut s = String::new();
    let mut sec = |name: &str, kv: &[(&str, String)]| {
        let _ = writeln!(s, "[{name}]");
        for (k, v) in kv {
            let _ = writeln!(s, "{k} = {v}");
        }
        s.push('\n');
    };
    sec(
        "topology",
        &[
            ("n", t.n_domains.to_string()),
            ("devices_min", t.devices_min.to_string()),
            ("devices_max", t.devices_max.to_string()),
            ("servers_per_domain", t.servers_per_domain.to_string()),
            ("gateways_per_pair", t.gateways_per_pair.to_string()),
            ("latency_lo", t.latency_range.0.to_string()),
            ("latency_hi", t.latency_range.1.to_string()),
            ("latency_walk", t.latency_walk_step.to_string()),
            ("cost_lo", t.cost_range.0.to_string()),
            ("cost_hi", t.cost_range.1.to_string()),
            ("cost_walk", t.cost_walk_step.to_string()),
            ("volatility_lo", t.volatility_range.0.to_string()),
            ("volatility_hi", t.volatility_range.1.to_string()),
            ("seed", t.seed.to_string()),
        ],
    );
    sec(
        "episode",
        &[
            ("H", e.horizon.to_string()),
            ("app", app_name(e.app).to_string()),
            ("L", e.latency_ceiling.to_string()),
            ("SR", e.sync_rate.to_string()),
            ("tasks_per_step", e.tasks_per_step.to_string()),
            ("reconfig", join(&e.reconfig_episodes)),
            ("spr_pairs", pairs_name(e.spr_pairs).to_string()),
            ("staleness_cap", e.staleness_cap.to_string()),
            ("stale_start", e.stale_start.to_string()),
            ("replay", e.replay.to_string()),
            ("frozen", e.frozen.to_string()),
        ],
    );
    sec(
        "reward",
        &[
            ("r1", r.r1.to_string()),
            ("r2", r.r2.to_string()),
            ("K", r.cost_scale.to_string()),
            ("k_spr", r.k_spr.to_string()),
        ],
    );
    sec(
        "agent",
        &[
            ("kind", kinds.join(",")),
            ("gamma", a.gamma.to_string()),
            ("lr", a.lr.map(|v| v.to_string()).unwrap_or_else(|| "auto".into())),
            ("batch", a.batch_size.to_string()),
            ("replay", a.replay_capacity.to_string()),
            ("eps_start", a.eps_start.to_string()),
            ("eps_min", a.eps_min.to_string()),
            ("eps_decay_factor", a.eps_decay_factor.to_string()),
            ("target_sync_interval", a.target_sync_interval.to_string()),
            ("clip_eps", a.clip_eps.to_string()),
            ("ppo_epochs", a.ppo_epochs.to_string()),
            ("ppo_rollout_steps", a.ppo_rollout_steps.to_string()),
            ("grad_clip", a.grad_clip.to_string()),
            ("reward_scale", a.reward_scale.to_string()),
        ],
    );
    sec(
        "experiment",
        &[
            ("episodes", cfg.episodes.to_string()),
            ("eval_episodes", cfg.eval_episodes.to_string()),
            ("seeds", join(&cfg.seeds)),
            ("output", cfg.output.display().to_string()),
            ("trace", cfg.trace.to_string()),
            ("checkpoints", cfg.save_checkpoints.to_string()),
        ],
    );
    s
}

/// Write `resolved_config.ini` into the output directory.
pub fn echo_config(cfg: &ExperimentConfig) -> Result<PathBuf> {
    fs::create_dir_all(&cfg.output).map_err(|e| Error::io(&cfg.output, e))?;
    let path = cfg.output.join(RESOLVED_CONFIG_FILE);
    fs::write(&path, to_ini(cfg)).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
