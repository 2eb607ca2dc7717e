//! Training and evaluation runs, metrics, CSV/JSONL output and summaries.
//!
//! Every (agent, seed) pair is an independent replica with its own network,
//! environment stream and agent. Replicas run in parallel and are merged in
//! config order, so output is byte-identical for identical configs.
//!
//! Within a seed all agents see the same network and the same dynamics and
//! task draws: the environment stream never depends on the action taken.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{build_agent, Agent, AgentConfig, AgentKind, ProblemShape};
use crate::env::{EpisodeConfig, RewardParams, StepRecord, SyncEnv};
use crate::error::{Error, Result};
use crate::nn::Mlp;
use crate::topology::TopologyConfig;

pub const CSV_HEADER: &str =
    "agent,seed,episode,phase,mean_reward,mean_cost,frac_alloc_correct,frac_path_feasible,spr_accuracy";

pub const RESULTS_FILE: &str = "results.csv";
pub const COMPARISON_FILE: &str = "comparison.csv";
pub const TRACE_FILE: &str = "trace.jsonl";
pub const CHECKPOINT_DIR: &str = "checkpoints";

/// SplitMix64 finalizer over `a` and `b`; derives independent stream seeds.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x6A09_E667_F3BC_C909);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const ENV_STREAM: u64 = 1;
const AGENT_STREAM: u64 = 2;
const RECONFIG_STREAM: u64 = 3;

/// Seeds one replica derives from its experiment seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReplicaSeeds {
    pub network: u64,
    pub env: u64,
    pub agent: u64,
    reconfig: u64,
}

impl ReplicaSeeds {
    pub fn new(topology_seed: u64, seed: u64) -> Self {
        ReplicaSeeds {
            network: mix_seed(topology_seed, seed),
            env: mix_seed(seed, ENV_STREAM),
            agent: mix_seed(seed, AGENT_STREAM),
            reconfig: mix_seed(seed, RECONFIG_STREAM),
        }
    }

    pub fn reconfig(&self, episode: usize) -> u64 {
        mix_seed(self.reconfig, episode as u64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Train,
    Eval,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Train => "train",
            Phase::Eval => "eval",
        }
    }
}

/// Per-episode metrics. Fractions are over all tasks (or SPR pairs) of the
/// episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub agent: AgentKind,
    pub seed: u64,
    pub episode: usize,
    pub phase: Phase,
    pub mean_reward: f64,
    /// Mean true cost of the selected servers; `None` if no task found one.
    pub mean_cost: Option<f64>,
    pub frac_alloc_correct: f64,
    pub frac_path_feasible: f64,
    pub spr_accuracy: f64,
    pub topology_hash: String,
    /// Seconds; not written to the CSV.
    pub wall_time: f64,
}

impl MetricsRecord {
    pub fn from_steps(agent: AgentKind, phase: Phase, steps: &[StepRecord], topology_hash: String) -> Self {
        let n_steps = steps.len().max(1) as f64;
        let mut tasks = 0usize;
        let mut correct = 0usize;
        let mut feasible = 0usize;
        let mut cost_sum = 0.0;
        let mut cost_n = 0usize;
        let mut spr_correct = 0usize;
        let mut spr_pairs = 0usize;
        for s in steps {
            for t in &s.tasks {
                tasks += 1;
                correct += t.allocation_correct as usize;
                feasible += t.path_feasible as usize;
                if let Some(c) = t.cost_paid {
                    cost_sum += c;
                    cost_n += 1;
                }
            }
            spr_correct += s.spr_correct;
            spr_pairs += s.spr_pairs;
        }
        let frac = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        MetricsRecord {
            agent,
            seed: 0,
            episode: 0,
            phase,
            mean_reward: steps.iter().map(|s| s.reward).sum::<f64>() / n_steps,
            mean_cost: (cost_n > 0).then(|| cost_sum / cost_n as f64),
            frac_alloc_correct: frac(correct, tasks),
            frac_path_feasible: frac(feasible, tasks),
            spr_accuracy: frac(spr_correct, spr_pairs),
            topology_hash,
            wall_time: 0.0,
        }
    }

    /// Metric values in CSV column order.
    pub fn metrics(&self) -> [Option<f64>; 5] {
        [
            Some(self.mean_reward),
            self.mean_cost,
            Some(self.frac_alloc_correct),
            Some(self.frac_path_feasible),
            Some(self.spr_accuracy),
        ]
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.agent,
            self.seed,
            self.episode,
            self.phase.name(),
            format_metrics(&self.metrics())
        )
    }
}

pub const METRIC_NAMES: [&str; 5] = [
    "mean_reward",
    "mean_cost",
    "frac_alloc_correct",
    "frac_path_feasible",
    "spr_accuracy",
];

fn format_metrics(values: &[Option<f64>]) -> String {
    values
        .iter()
        .map(|v| v.map(|x| x.to_string()).unwrap_or_default())
        .collect::<Vec<_>>()
        .join(",")
}

/// Play one episode. With `train` the agent explores and learns; without
/// it the agent acts greedily and is never updated.
pub fn run_episode(env: &mut SyncEnv, agent: &mut dyn Agent, train: bool) -> Result<(MetricsRecord, Vec<StepRecord>)> {
    let started = Instant::now();
    let hash = env.network().structure_hash();
    let mut obs = env.reset();
    let mut steps = Vec::with_capacity(env.episode_config().horizon);
    loop {
        let action = agent.act(&obs, train)?;
        let out = env.step(action)?;
        if train {
            agent.observe(&obs, action, out.reward, &out.observation, out.done)?;
        }
        steps.push(out.record);
        obs = out.observation;
        if out.done {
            break;
        }
    }
    let phase = if train { Phase::Train } else { Phase::Eval };
    let mut record = MetricsRecord::from_steps(agent.kind(), phase, &steps, hash);
    record.wall_time = started.elapsed().as_secs_f64();
    Ok((record, steps))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub topology: TopologyConfig,
    pub episode: EpisodeConfig,
    pub rewards: RewardParams,
    pub agents: Vec<AgentConfig>,
    /// Training episodes per replica.
    pub episodes: usize,
    /// Greedy evaluation episodes after training.
    pub eval_episodes: usize,
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    /// Write one JSON object per step to `trace.jsonl`.
    pub trace: bool,
    pub save_checkpoints: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            topology: TopologyConfig::default(),
            episode: EpisodeConfig::default(),
            rewards: RewardParams::default(),
            agents: [AgentKind::Dqn, AgentKind::Ddqn, AgentKind::Random, AgentKind::RoundRobin]
                .into_iter()
                .map(AgentConfig::new)
                .collect(),
            episodes: 200,
            eval_episodes: 20,
            seeds: vec![0],
            output: PathBuf::from("out"),
            trace: false,
            save_checkpoints: true,
        }
    }
}

pub fn validate_agent(a: &AgentConfig) -> Result<()> {
    let in_range = |key: &str, v: f64, lo: f64, hi: f64, hi_open: bool| {
        let ok = v >= lo && if hi_open { v < hi } else { v <= hi };
        if ok {
            Ok(())
        } else {
            let close = if hi_open { ")" } else { "]" };
            Err(Error::config(key, format!("{v} outside [{lo}, {hi}{close}")))
        }
    };
    in_range("agent.gamma", a.gamma, 0.0, 1.0, true)?;
    if let Some(lr) = a.lr {
        in_range("agent.lr", lr, 1e-6, 1.0, false)?;
    }
    in_range("agent.eps_start", a.eps_start, 0.0, 1.0, false)?;
    in_range("agent.eps_min", a.eps_min, 0.0, 1.0, false)?;
    in_range("agent.clip_eps", a.clip_eps, 0.0, 1.0, true)?;
    if !(a.eps_decay_factor >= 1.0) {
        return Err(Error::config("agent.eps_decay_factor", "must be >= 1"));
    }
    if !(a.grad_clip > 0.0) {
        return Err(Error::config("agent.grad_clip", "must be > 0"));
    }
    if !(a.reward_scale > 0.0 && a.reward_scale.is_finite()) {
        return Err(Error::config("agent.reward_scale", "must be finite and > 0"));
    }
    for (key, v) in [
        ("agent.batch", a.batch_size),
        ("agent.replay", a.replay_capacity),
        ("agent.target_sync_interval", a.target_sync_interval),
        ("agent.ppo_epochs", a.ppo_epochs),
        ("agent.ppo_rollout_steps", a.ppo_rollout_steps),
    ] {
        if v == 0 {
            return Err(Error::config(key, "must be >= 1"));
        }
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        self.episode.validate(self.topology.n_domains)?;
        if self.agents.is_empty() {
            return Err(Error::config("agent.kind", "at least one agent required"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("experiment.seeds", "at least one seed required"));
        }
        for a in &self.agents {
            validate_agent(a)?;
        }
        Ok(())
    }

    pub fn shape(&self) -> ProblemShape {
        let env_actions =
            crate::view_sync::binomial(self.topology.n_domains, self.episode.sync_rate) as usize;
        ProblemShape {
            controllers: self.topology.n_domains,
            sync_rate: self.episode.sync_rate,
            actions: env_actions,
            total_train_steps: self.episodes * self.episode.horizon,
        }
    }

    /// Environment for `seed`, identical for every agent.
    pub fn make_env(&self, seed: u64) -> Result<SyncEnv> {
        let seeds = ReplicaSeeds::new(self.topology.seed, seed);
        let topology = TopologyConfig {
            seed: seeds.network,
            ..self.topology.clone()
        };
        SyncEnv::new(topology, self.episode.clone(), self.rewards.clone(), seeds.env)
    }
}

/// One line of the JSONL trace.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceLine {
    pub agent: AgentKind,
    pub seed: u64,
    pub phase: Phase,
    pub episode: usize,
    pub step: usize,
    pub topology_hash: String,
    #[serde(flatten)]
    pub record: StepRecord,
}

#[derive(Debug)]
pub struct ReplicaResult {
    pub agent: AgentKind,
    pub seed: u64,
    pub records: Vec<MetricsRecord>,
    pub trace: Vec<TraceLine>,
    pub network: Option<Mlp>,
}

fn push_trace(trace: &mut Vec<TraceLine>, rec: &MetricsRecord, steps: Vec<StepRecord>) {
    trace.extend(steps.into_iter().enumerate().map(|(i, record)| TraceLine {
        agent: rec.agent,
        seed: rec.seed,
        phase: rec.phase,
        episode: rec.episode,
        step: i,
        topology_hash: rec.topology_hash.clone(),
        record,
    }));
}

/// Train one agent on one seed, then evaluate it greedily.
pub fn run_replica(config: &ExperimentConfig, agent_config: &AgentConfig, seed: u64) -> Result<ReplicaResult> {
    let seeds = ReplicaSeeds::new(config.topology.seed, seed);
    let mut env = config.make_env(seed)?;
    let mut agent = build_agent(agent_config, config.shape(), seeds.agent);
    let mut records = Vec::new();
    let mut trace = Vec::new();

    for episode in 0..config.episodes {
        if config.episode.reconfig_episodes.contains(&episode) {
            env.reconfigure(seeds.reconfig(episode))?;
        }
        let (mut rec, steps) = run_episode(&mut env, agent.as_mut(), true)?;
        rec.seed = seed;
        rec.episode = episode;
        if config.trace {
            push_trace(&mut trace, &rec, steps);
        }
        records.push(rec);
    }
    if config.episodes > 0 {
        evaluate_into(config, &mut env, agent.as_mut(), seed, &mut records, &mut trace)?;
    }
    Ok(ReplicaResult {
        agent: agent_config.kind,
        seed,
        records,
        trace,
        network: agent.network().cloned(),
    })
}

fn evaluate_into(
    config: &ExperimentConfig,
    env: &mut SyncEnv,
    agent: &mut dyn Agent,
    seed: u64,
    records: &mut Vec<MetricsRecord>,
    trace: &mut Vec<TraceLine>,
) -> Result<()> {
    for episode in 0..config.eval_episodes {
        let (mut rec, steps) = run_episode(env, agent, false)?;
        rec.seed = seed;
        rec.episode = episode;
        if config.trace {
            push_trace(trace, &rec, steps);
        }
        records.push(rec);
    }
    Ok(())
}

/// Mean and population standard deviation per agent and metric.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub agent: AgentKind,
    pub count: usize,
    pub mean: [Option<f64>; 5],
    pub std: [Option<f64>; 5],
}

impl SummaryRow {
    pub fn csv_rows(&self) -> String {
        format!(
            "{a},all,mean,summary,{}\n{a},all,std,summary,{}\n",
            format_metrics(&self.mean),
            format_metrics(&self.std),
            a = self.agent
        )
    }
}

fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    // Sort first so the result does not depend on record order.
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (Some(mean), Some(var.sqrt()))
}

/// Summaries over evaluation records; agents without any fall back to their
/// training records.
pub fn summarize(records: &[MetricsRecord]) -> Vec<SummaryRow> {
    let mut by_agent: BTreeMap<AgentKind, Vec<&MetricsRecord>> = BTreeMap::new();
    for r in records {
        by_agent.entry(r.agent).or_default().push(r);
    }
    by_agent
        .into_iter()
        .map(|(agent, recs)| {
            let has_eval = recs.iter().any(|r| r.phase == Phase::Eval);
            let wanted = if has_eval { Phase::Eval } else { Phase::Train };
            let picked: Vec<&&MetricsRecord> = recs.iter().filter(|r| r.phase == wanted).collect();
            let mut mean = [None; 5];
            let mut std = [None; 5];
            for m in 0..5 {
                let vals: Vec<f64> = picked.iter().filter_map(|r| r.metrics()[m]).collect();
                (mean[m], std[m]) = mean_std(&vals);
            }
            SummaryRow {
                agent,
                count: picked.len(),
                mean,
                std,
            }
        })
        .collect()
}

/// `(b - a) / |a| * 100`, the percentage by which `b` differs from `a`.
pub fn relative_difference(a: f64, b: f64) -> f64 {
    (b - a) / a.abs() * 100.0
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub metric: &'static str,
    pub agent_a: AgentKind,
    pub agent_b: AgentKind,
    pub mean_a: f64,
    pub mean_b: f64,
    pub rel_diff_pct: f64,
}

pub fn compare(summary: &[SummaryRow]) -> Vec<Comparison> {
    let mut out = Vec::new();
    for (m, metric) in METRIC_NAMES.iter().enumerate() {
        for (i, a) in summary.iter().enumerate() {
            for b in &summary[i + 1..] {
                if let (Some(ma), Some(mb)) = (a.mean[m], b.mean[m]) {
                    out.push(Comparison {
                        metric,
                        agent_a: a.agent,
                        agent_b: b.agent,
                        mean_a: ma,
                        mean_b: mb,
                        rel_diff_pct: relative_difference(ma, mb),
                    });
                }
            }
        }
    }
    out
}

#[derive(Debug)]
pub struct ExperimentResult {
    pub records: Vec<MetricsRecord>,
    pub summary: Vec<SummaryRow>,
    pub comparisons: Vec<Comparison>,
    pub replicas: Vec<ReplicaResult>,
}

impl ExperimentResult {
    pub fn csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.records.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.csv_row());
            out.push('\n');
        }
        for s in &self.summary {
            out.push_str(&s.csv_rows());
        }
        out
    }

    pub fn comparison_csv(&self) -> String {
        let mut out = String::from("metric,agent_a,agent_b,mean_a,mean_b,rel_diff_pct\n");
        for c in &self.comparisons {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                c.metric, c.agent_a, c.agent_b, c.mean_a, c.mean_b, c.rel_diff_pct
            );
        }
        out
    }

    pub fn records_for(&self, agent: AgentKind, phase: Phase) -> impl Iterator<Item = &MetricsRecord> {
        self.records
            .iter()
            .filter(move |r| r.agent == agent && r.phase == phase)
    }
}

fn finish(replicas: Vec<ReplicaResult>) -> ExperimentResult {
    let records: Vec<MetricsRecord> = replicas.iter().flat_map(|r| r.records.iter().cloned()).collect();
    let summary = summarize(&records);
    let comparisons = compare(&summary);
    ExperimentResult {
        records,
        summary,
        comparisons,
        replicas,
    }
}

/// Run every (agent, seed) replica without touching the filesystem.
pub fn execute(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let jobs: Vec<(&AgentConfig, u64)> = config
        .agents
        .iter()
        .flat_map(|a| config.seeds.iter().map(move |&s| (a, s)))
        .collect();
    let replicas = jobs
        .par_iter()
        .map(|&(a, s)| run_replica(config, a, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(finish(replicas))
}

pub fn checkpoint_path(dir: &Path, agent: AgentKind, seed: u64) -> PathBuf {
    dir.join(CHECKPOINT_DIR).join(format!("{agent}_seed{seed}.ckpt"))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Write `results.csv`, `comparison.csv`, optional `trace.jsonl` and
/// checkpoints under `config.output`.
pub fn write_results(config: &ExperimentConfig, result: &ExperimentResult) -> Result<()> {
    let dir = &config.output;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(&dir.join(RESULTS_FILE), &result.csv())?;
    write_file(&dir.join(COMPARISON_FILE), &result.comparison_csv())?;
    if config.trace {
        let path = dir.join(TRACE_FILE);
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        for rep in &result.replicas {
            for line in &rep.trace {
                let json = serde_json::to_string(line).expect("trace lines serialize");
                writeln!(w, "{json}").map_err(|e| Error::io(&path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    if config.save_checkpoints {
        for rep in &result.replicas {
            if let Some(net) = &rep.network {
                let path = checkpoint_path(dir, rep.agent, rep.seed);
                let parent = path.parent().expect("checkpoint has a parent");
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
                net.save(&path)?;
            }
        }
    }
    Ok(())
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let result = execute(config)?;
    write_results(config, &result)?;
    Ok(result)
}

/// Greedy evaluation of agents restored from checkpoints in `dir`.
/// Baseline agents need no checkpoint.
pub fn evaluate_checkpoints(config: &ExperimentConfig, dir: &Path) -> Result<ExperimentResult> {
    config.validate()?;
    let jobs: Vec<(&AgentConfig, u64)> = config
        .agents
        .iter()
        .flat_map(|a| config.seeds.iter().map(move |&s| (a, s)))
        .collect();
    let replicas = jobs
        .par_iter()
        .map(|&(a, seed)| -> Result<ReplicaResult> {
            let seeds = ReplicaSeeds::new(config.topology.seed, seed);
            let mut env = config.make_env(seed)?;
            let mut agent = build_agent(a, config.shape(), seeds.agent);
            if a.kind.is_value_based() || a.kind.is_policy_based() {
                agent.load_network(Mlp::load(&checkpoint_path(dir, a.kind, seed))?)?;
            }
            let mut records = Vec::new();
            let mut trace = Vec::new();
            evaluate_into(config, &mut env, agent.as_mut(), seed, &mut records, &mut trace)?;
            Ok(ReplicaResult {
                agent: a.kind,
                seed,
                records,
                trace,
                network: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish(replicas))
}

/// Parse rows written by [`ExperimentResult::csv`]. Summary rows are
/// skipped.
pub fn read_records_csv(text: &str) -> Result<Vec<MetricsRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        _ => {
            return Err(Error::ConfigSyntax {
                line: 1,
                text: "missing results header".into(),
            })
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let bad = || Error::ConfigSyntax {
            line: i + 1,
            text: line.to_string(),
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(bad());
        }
        let phase = match f[3] {
            "train" => Phase::Train,
            "eval" => Phase::Eval,
            "summary" => continue,
            _ => return Err(bad()),
        };
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        out.push(MetricsRecord {
            agent: f[0].parse().map_err(|_| bad())?,
            seed: f[1].parse().map_err(|_| bad())?,
            episode: f[2].parse().map_err(|_| bad())?,
            phase,
            mean_reward: num(f[4])?,
            mean_cost: if f[5].is_empty() { None } else { Some(num(f[5])?) },
            frac_alloc_correct: num(f[6])?,
            frac_path_feasible: num(f[7])?,
            spr_accuracy: num(f[8])?,
            topology_hash: String::new(),
            wall_time: 0.0,
        });
    }
    Ok(out)
}

/// Text table of the seed-averaged training reward per episode.
pub fn reward_curve(records: &[MetricsRecord]) -> String {
    let mut agents: Vec<AgentKind> = records.iter().map(|r| r.agent).collect();
    agents.sort();
    agents.dedup();
    let mut table: BTreeMap<usize, BTreeMap<AgentKind, (f64, usize)>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.phase == Phase::Train) {
        let cell = table.entry(r.episode).or_default().entry(r.agent).or_insert((0.0, 0));
        cell.0 += r.mean_reward;
        cell.1 += 1;
    }
    let mut out = format!("{:>7}", "episode");
    for a in &agents {
        let _ = write!(out, " {:>12}", a.name());
    }
    out.push('\n');
    for (ep, row) in table {
        let _ = write!(out, "{ep:>7}");
        for a in &agents {
            match row.get(a) {
                Some((s, n)) => {
                    let _ = write!(out, " {:>12.2}", s / *n as f64);
                }
                None => {
                    let _ = write!(out, " {:>12}", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}

/// Trailing moving average; the first `window - 1` entries average what
/// is available.
pub fn moving_average(series: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    (0..series.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(w);
            series[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Recovery {
    /// Episodes after the event until the post-event moving average reaches
    /// the threshold; when censored, the number of episodes observed plus one.
    pub episodes: usize,
    pub censored: bool,
}

/// Episodes needed after the event at index `event` for the moving average
/// of `series` (over post-event episodes only) to regain `fraction` of the
/// pre-event moving average. The search stops at `end` (exclusive).
/// Meant for non-negative series such as accuracy.
pub fn recovery_episodes(series: &[f64], event: usize, end: usize, window: usize, fraction: f64) -> Recovery {
    let w = window.max(1);
    let end = end.min(series.len());
    let pre_lo = event.saturating_sub(w);
    let pre = &series[pre_lo..event.min(series.len())];
    if pre.is_empty() || event >= end {
        return Recovery {
            episodes: 0,
            censored: event >= end,
        };
    }
    let threshold = fraction * pre.iter().sum::<f64>() / pre.len() as f64;
    for i in event..end {
        let lo = (i + 1).saturating_sub(w).max(event);
        let ma = series[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64;
        if ma >= threshold {
            return Recovery {
                episodes: i - event + 1,
                censored: false,
            };
        }
    }
    Recovery {
        episodes: end - event + 1,
        censored: true,
    }
}

/// One cell of the controller-count x sync-rate x latency grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scenario {
    pub controllers: usize,
    pub sync_rate: usize,
    pub latency_ceiling: f64,
}

impl Scenario {
    pub fn label(&self) -> String {
        format!("n{}_sr{}_l{}", self.controllers, self.sync_rate, self.latency_ceiling)
    }
}

pub const SWEEP_CONTROLLERS: [usize; 3] = [6, 7, 8];
pub const SWEEP_SYNC_RATES: [usize; 2] = [2, 3];
pub const SWEEP_LATENCIES: [f64; 3] = [8.0, 10.0, 12.0];

pub fn sweep_grid(base: &ExperimentConfig) -> Vec<(Scenario, ExperimentConfig)> {
    let mut out = Vec::new();
    for &n in &SWEEP_CONTROLLERS {
        for &sr in &SWEEP_SYNC_RATES {
            for &l in &SWEEP_LATENCIES {
                let scenario = Scenario {
                    controllers: n,
                    sync_rate: sr,
                    latency_ceiling: l,
                };
                let mut cfg = base.clone();
                cfg.topology.n_domains = n;
                cfg.episode.sync_rate = sr;
                cfg.episode.latency_ceiling = l;
                cfg.output = base.output.join(scenario.label());
                out.push((scenario, cfg));
            }
        }
    }
    out
}

pub const SWEEP_FILE: &str = "sweep_summary.csv";

/// Run the whole grid; each scenario writes its own subdirectory and one
/// block of rows goes into `sweep_summary.csv`.
pub fn run_sweep(base: &ExperimentConfig) -> Result<Vec<(Scenario, ExperimentResult)>> {
    let mut results = Vec::new();
    let mut text = format!("n,sr,L,agent,stat,{}\n", METRIC_NAMES.join(","));
    for (scenario, cfg) in sweep_grid(base) {
        let result = run_experiment(&cfg)?;
        for s in &result.summary {
            for (stat, vals) in [("mean", &s.mean), ("std", &s.std)] {
                let _ = writeln!(
                    text,
                    "{},{},{},{},{stat},{}",
                    scenario.controllers,
                    scenario.sync_rate,
                    scenario.latency_ceiling,
                    s.agent,
                    format_metrics(vals)
                );
            }
        }
        results.push((scenario, result));
    }
    fs::create_dir_all(&base.output).map_err(|e| Error::io(&base.output, e))?;
    write_file(&base.output.join(SWEEP_FILE), &text)?;
    Ok(results)
}
