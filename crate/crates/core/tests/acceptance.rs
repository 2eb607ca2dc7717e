//! The ten acceptance criteria, run in order. Each criterion writes one
//! `PASS`/`FAIL` line to stderr (uncaptured); the test fails if any does.

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sdn_sync::agents::loss::{ppo_clipped, q_regression, reinforce};
use sdn_sync::agents::{build_agent, epsilon_schedule, AgentConfig, AgentKind, ProblemShape, ReplayBuffer, Transition};
use sdn_sync::env::{reward_for_case, reward_spr, App, EpisodeConfig, RewardParams, SyncEnv};
use sdn_sync::harness::{execute, recovery_episodes, ExperimentConfig, ExperimentResult, Phase};
use sdn_sync::nn::{Gradients, Head, Matrix, Mlp};
use sdn_sync::routing::{shortest_path, Graph, OutcomeCase};
use sdn_sync::topology::TopologyConfig;
use sdn_sync::view_sync::{action_index_to_subset, binomial, subset_to_index};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn run(id: usize, name: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(p) => Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into())),
    };
    let took = start.elapsed();
    let outcome = outcome.and_then(|d| {
        if took <= limit {
            Ok(d)
        } else {
            Err(format!("{d}; took {took:.1?}, limit {limit:?}"))
        }
    });
    let (tag, detail) = match &outcome {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    let line = format!("[{tag}] criterion {id:>2} {name} ({took:.1?}): {detail}\n");
    std::io::stderr().write_all(line.as_bytes()).unwrap();
    outcome.is_ok()
}

// 1 ------------------------------------------------------------------------

fn floyd_warshall(n: usize, edges: &[(usize, usize, f64)]) -> Vec<Vec<f64>> {
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for &(u, v, w) in edges {
        d[u][v] = d[u][v].min(w);
        d[v][u] = d[v][u].min(w);
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut pairs = 0;
    for g in 0..200 {
        let n = rng.gen_range(1..=20);
        let density: f64 = rng.gen_range(0.05..0.6);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen::<f64>() < density {
                    // Multiples of 1/8 keep every path sum exact in f64.
                    edges.push((u, v, rng.gen_range(1..=80) as f64 / 8.0));
                }
            }
        }
        let mut graph = Graph::new(n);
        for &(u, v, w) in &edges {
            graph.add_edge(u, v, w);
        }
        let fw = floyd_warshall(n, &edges);
        for s in 0..n {
            for t in 0..n {
                pairs += 1;
                match shortest_path(&graph, s, t).map_err(|e| e.to_string())? {
                    None => check(fw[s][t].is_infinite(), || format!("graph {g}: {s}->{t} reachable"))?,
                    Some(p) => {
                        check(p.latency == fw[s][t], || {
                            format!("graph {g}: {s}->{t} got {} want {}", p.latency, fw[s][t])
                        })?;
                        check(
                            p.nodes.first() == Some(&s)
                                && p.nodes.last() == Some(&t)
                                && graph.path_latency(&p.nodes) == Some(p.latency),
                            || format!("graph {g}: {s}->{t} path {:?} inconsistent", p.nodes),
                        )?;
                    }
                }
            }
        }
    }
    Ok(format!("200 graphs, {pairs} pairs exact"))
}

// 2 ------------------------------------------------------------------------

fn loss_of(kind: usize, net: &Mlp, s: &Matrix, a: &[usize], x: &[f64], y: &[f64]) -> (f64, Gradients) {
    match kind {
        0 => q_regression(net, s, a, x).unwrap(),
        1 => reinforce(net, s, a, x).unwrap(),
        _ => ppo_clipped(net, s, a, y, x, 0.2).unwrap(),
    }
}

fn gradient_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for cfg in 0..100 {
        let kind = cfg % 3;
        let input = rng.gen_range(1..=6);
        let hidden = rng.gen_range(2..=8);
        let output = rng.gen_range(2..=6);
        let batch = rng.gen_range(1..=5);
        let head = if kind == 0 { Head::Linear } else { Head::Softmax };
        let mut net = Mlp::with_hidden(input, hidden, output, head, &mut rng);
        let rows: Vec<Vec<f64>> = (0..batch)
            .map(|_| (0..input).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let states = Matrix::from_rows(&rows).unwrap();
        let actions: Vec<usize> = (0..batch).map(|_| rng.gen_range(0..output)).collect();
        let values: Vec<f64> = (0..batch).map(|_| rng.gen_range(-2.0..2.0)).collect();
        // Old log-probabilities near the current ones so both PPO branches occur.
        let old: Vec<f64> = (0..batch)
            .map(|b| {
                let p = net.forward_one(&rows[b]).unwrap();
                p[actions[b]].ln() + rng.gen_range(-0.3..0.3)
            })
            .collect();

        let (_, grads) = loss_of(kind, &net, &states, &actions, &values, &old);
        let h = 1e-6;
        for i in 0..net.params().len() {
            let orig = net.params()[i];
            net.params_mut()[i] = orig + h;
            let up = loss_of(kind, &net, &states, &actions, &values, &old).0;
            net.params_mut()[i] = orig - h;
            let down = loss_of(kind, &net, &states, &actions, &values, &old).0;
            net.params_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads.0[i];
            let scale = analytic.abs().max(numeric.abs());
            let err = if scale < 1e-6 { (analytic - numeric).abs() } else { (analytic - numeric).abs() / scale };
            worst = worst.max(err);
            checked += 1;
            check(err <= 1e-4, || {
                format!("config {cfg} loss {kind} param {i}: analytic {analytic} numeric {numeric}")
            })?;
        }
    }
    Ok(format!("100 configurations, {checked} parameters, worst relative error {worst:.2e}"))
}

// 3 ------------------------------------------------------------------------

fn reward_suite() -> Outcome {
    let p = RewardParams::default();
    check(
        (p.r1, p.r2, p.cost_scale, p.k_spr) == (10_000.0, 8_000.0, 80.0, 100.0),
        || format!("defaults {p:?}"),
    )?;
    let cases = [
        (OutcomeCase::LatencyViolated, None, -10_000.0),
        (OutcomeCase::LatencyOkCostSuboptimal, Some(12.5), -1_000.0),
        (OutcomeCase::LatencyOkCostSuboptimal, Some(37.0), -2_960.0),
        (OutcomeCase::Optimal, Some(0.0), 0.0),
        (OutcomeCase::OtherFailure, None, -8_000.0),
    ];
    for (case, gap, want) in cases {
        let got = reward_for_case(case, gap, &p);
        check(got == want, || format!("{case:?} gap {gap:?}: {got} != {want}"))?;
    }
    for correct in [0, 1, 7, 30] {
        let got = reward_spr(correct, &p);
        check(got == 100.0 * correct as f64, || format!("spr {correct}: {got}"))?;
    }
    Ok("four offloading branches and SPR reward exact".into())
}

// 4 ------------------------------------------------------------------------

fn consistent_model() -> Outcome {
    let topology = TopologyConfig {
        n_domains: 6,
        latency_walk_step: 0.0,
        cost_walk_step: 0.0,
        ..TopologyConfig::default()
    };
    let episode = EpisodeConfig {
        sync_rate: 6,
        // Large enough that every source has a reachable server, so the
        // ground-truth optimum always exists.
        latency_ceiling: 100.0,
        tasks_per_step: 4,
        frozen: true,
        ..EpisodeConfig::default()
    };
    let mut env = SyncEnv::new(topology, episode, RewardParams::default(), 4).map_err(|e| e.to_string())?;
    env.reset();
    let (mut tasks, mut correct, mut total_reward) = (0, 0, 0.0);
    loop {
        let out = env.step(0).map_err(|e| e.to_string())?;
        total_reward += out.reward;
        for t in &out.record.tasks {
            tasks += 1;
            correct += t.allocation_correct as usize;
        }
        check(out.reward == 0.0, || format!("step reward {}", out.reward))?;
        if out.done {
            break;
        }
    }
    check(correct == tasks, || format!("{correct}/{tasks} correct"))?;
    Ok(format!("{tasks} tasks all correct, episode reward {total_reward}"))
}

// 5 ------------------------------------------------------------------------

fn bandit_env(seed: u64) -> SyncEnv {
    let topology = TopologyConfig {
        n_domains: 4,
        seed,
        ..TopologyConfig::default()
    };
    let episode = EpisodeConfig {
        horizon: 1,
        sync_rate: 2,
        tasks_per_step: 8,
        stale_start: 10,
        replay: true,
        frozen: true,
        ..EpisodeConfig::default()
    };
    SyncEnv::new(topology, episode, RewardParams::default(), seed).unwrap()
}

/// Reward of every fixed action, by exhaustive evaluation.
fn fixed_action_rewards(env: &mut SyncEnv) -> Vec<f64> {
    (0..env.action_count())
        .map(|a| {
            env.reset();
            env.step(a).unwrap().reward
        })
        .collect()
}

fn bandit_convergence() -> Outcome {
    // First network whose best subset wins by a clear margin.
    let (env_seed, optimum, margin) = (0..100)
        .find_map(|s| {
            let r = fixed_action_rewards(&mut bandit_env(s));
            let best = sdn_sync::nn::argmax(&r);
            let second = r
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != best)
                .map(|(_, &v)| v)
                .fold(f64::NEG_INFINITY, f64::max);
            (r[best] - second >= 200.0).then_some((s, best, r[best] - second))
        })
        .ok_or("no network with a unique optimum")?;

    let mut lines = Vec::new();
    let mut ok = true;
    for (kind, episodes) in [(AgentKind::Dqn, 2_000), (AgentKind::Ddqn, 2_000), (AgentKind::Ppo, 20_000)] {
        let mut solved = 0;
        for agent_seed in 0..10 {
            let mut env = bandit_env(env_seed);
            let shape = ProblemShape {
                controllers: 4,
                sync_rate: 2,
                actions: env.action_count(),
                total_train_steps: episodes,
            };
            let mut agent = build_agent(&AgentConfig::new(kind), shape, agent_seed);
            for _ in 0..episodes {
                let obs = env.reset();
                let a = agent.act(&obs, true).unwrap();
                let out = env.step(a).unwrap();
                agent.observe(&obs, a, out.reward, &out.observation, out.done).unwrap();
            }
            let hits = (0..20)
                .filter(|_| {
                    let obs = env.reset();
                    agent.act(&obs, false).unwrap() == optimum
                })
                .count();
            solved += (hits as f64 >= 0.9 * 20.0) as usize;
        }
        ok &= solved >= 8;
        lines.push(format!("{kind} {solved}/10"));
    }
    let detail = format!("network {env_seed}, optimum {optimum} by {margin:.0}: {}", lines.join(", "));
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// 6-9 ----------------------------------------------------------------------

fn grid_config(app: App, kinds: &[AgentKind], seeds: u64) -> ExperimentConfig {
    ExperimentConfig {
        topology: TopologyConfig {
            n_domains: 6,
            ..TopologyConfig::default()
        },
        episode: EpisodeConfig {
            app,
            sync_rate: 2,
            latency_ceiling: 10.0,
            ..EpisodeConfig::default()
        },
        agents: kinds.iter().map(|&k| AgentConfig::new(k)).collect(),
        episodes: 200,
        seeds: (0..seeds).collect(),
        save_checkpoints: false,
        ..ExperimentConfig::default()
    }
}

fn mean(result: &ExperimentResult, kind: AgentKind, metric: usize) -> f64 {
    result
        .summary
        .iter()
        .find(|s| s.agent == kind)
        .and_then(|s| s.mean[metric])
        .expect("metric present")
}

const COST: usize = 1;
const ALLOC: usize = 2;
const PATH: usize = 3;
const SPR: usize = 4;

fn baseline_ordering(result: &ExperimentResult) -> Outcome {
    let mut failures = Vec::new();
    let mut detail = Vec::new();
    for kind in AgentKind::ALL {
        if result.summary.iter().any(|s| s.agent == kind) {
            detail.push(format!(
                "{kind} cost {:.3} alloc {:.4} path {:.4}",
                mean(result, kind, COST),
                mean(result, kind, ALLOC),
                mean(result, kind, PATH)
            ));
        }
    }
    for learner in [AgentKind::Dqn, AgentKind::Ddqn] {
        for base in [AgentKind::Random, AgentKind::RoundRobin] {
            if mean(result, learner, COST) >= mean(result, base, COST) {
                failures.push(format!("{learner} cost !< {base}"));
            }
            for (m, name) in [(ALLOC, "alloc"), (PATH, "path")] {
                if mean(result, learner, m) <= mean(result, base, m) {
                    failures.push(format!("{learner} {name} !> {base}"));
                }
            }
        }
    }
    let detail = detail.join("; ");
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{} | {detail}", failures.join(", ")))
    }
}

fn spr_ordering() -> Outcome {
    let cfg = grid_config(App::Spr, &[AgentKind::Ddqn, AgentKind::Random, AgentKind::RoundRobin], 5);
    let result = execute(&cfg).map_err(|e| e.to_string())?;
    let (d, r, rr) = (
        mean(&result, AgentKind::Ddqn, SPR),
        mean(&result, AgentKind::Random, SPR),
        mean(&result, AgentKind::RoundRobin, SPR),
    );
    let detail = format!("ddqn {d:.4}, random {r:.4}, round_robin {rr:.4}");
    if d >= r && r >= rr {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Episodes to recover after each event, summed; censored recoveries count
/// every remaining episode.
fn total_recovery(result: &ExperimentResult, kind: AgentKind, seed: u64, events: &[usize]) -> usize {
    let series: Vec<f64> = result
        .records
        .iter()
        .filter(|r| r.agent == kind && r.seed == seed && r.phase == Phase::Train)
        .map(|r| r.mean_reward)
        .collect();
    events
        .iter()
        .enumerate()
        .map(|(i, &ev)| {
            let end = events.get(i + 1).copied().unwrap_or(series.len());
            recovery_episodes(&series, ev, end, 5, 0.9).episodes
        })
        .sum()
}

fn reconfiguration_robustness() -> Outcome {
    let events = vec![30, 58];
    let mut cfg = grid_config(App::Spr, &[AgentKind::Ppo, AgentKind::Ddqn], 6);
    cfg.episode.reconfig_episodes = events.clone();
    let result = execute(&cfg).map_err(|e| e.to_string())?;
    let mut wins = 0;
    let mut detail = Vec::new();
    for seed in 0..6 {
        let ppo = total_recovery(&result, AgentKind::Ppo, seed, &events);
        let ddqn = total_recovery(&result, AgentKind::Ddqn, seed, &events);
        wins += (ppo <= ddqn) as usize;
        detail.push(format!("{ppo}/{ddqn}"));
    }
    let detail = format!("PPO <= DDQN on {wins}/6 seeds (ppo/ddqn episodes: {})", detail.join(" "));
    if wins >= 4 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// 10 -----------------------------------------------------------------------

fn invariants() -> Outcome {
    let mut buf = ReplayBuffer::new(40_000);
    for i in 0..40_005 {
        buf.push(Transition {
            state: vec![i as f64],
            action: 0,
            reward: 0.0,
            next_state: vec![],
            done: false,
        });
    }
    check(buf.len() == 40_000 && buf.capacity() == 40_000, || format!("len {}", buf.len()))?;
    check(
        buf.get(0).unwrap().state[0] == 5.0 && buf.get(39_999).unwrap().state[0] == 40_004.0,
        || "buffer is not FIFO".into(),
    )?;

    let mut spaces = 0;
    for n in 1..=10 {
        for sr in 1..=4.min(n) {
            let size = binomial(n, sr) as usize;
            let mut seen = std::collections::HashSet::new();
            for i in 0..size {
                let a = action_index_to_subset(i, n, sr).map_err(|e| e.to_string())?;
                let c = a.controllers();
                check(c.len() == sr && c.windows(2).all(|w| w[0] < w[1]) && c[sr - 1] < n, || {
                    format!("n {n} sr {sr} index {i}: {c:?}")
                })?;
                check(subset_to_index(&a, n) == i, || format!("n {n} sr {sr}: rank({i}) mismatch"))?;
                seen.insert(c.to_vec());
            }
            check(seen.len() == size, || format!("n {n} sr {sr}: duplicates"))?;
            check(action_index_to_subset(size, n, sr).is_err(), || format!("n {n} sr {sr}: index {size} accepted"))?;
            spaces += 1;
        }
    }

    let cfg = AgentConfig::new(AgentKind::Dqn);
    let total = 10_000;
    let eps: Vec<f64> = (0..=2 * total).map(|s| epsilon_schedule(s, total, &cfg)).collect();
    check(eps.windows(2).all(|w| w[1] <= w[0]), || "epsilon increases".into())?;
    check(eps[0] == 1.0, || format!("eps(0) = {}", eps[0]))?;
    check((eps[total] - 0.1).abs() < 1e-12, || format!("eps(end) = {}", eps[total]))?;
    check(eps[2 * total] == 0.01, || format!("eps floor = {}", eps[2 * total]))?;
    Ok(format!("FIFO at 40000, {spaces} action spaces bijective, epsilon monotone"))
}

#[test]
fn acceptance_criteria() {
    let mut passed = Vec::new();
    let secs = Duration::from_secs;
    passed.push(run(1, "oracle equivalence", secs(10), oracle_equivalence));
    passed.push(run(2, "gradient correctness", secs(30), gradient_correctness));
    passed.push(run(3, "reward functions", secs(1), reward_suite));
    passed.push(run(4, "consistent model", secs(1), consistent_model));
    passed.push(run(5, "bandit convergence", secs(300), bandit_convergence));

    let kinds = [AgentKind::Dqn, AgentKind::Ddqn, AgentKind::Random, AgentKind::RoundRobin];
    let cfg6 = grid_config(App::Arvr, &kinds, 5);
    let mut first = None;
    passed.push(run(6, "baseline ordering", secs(900), || {
        let result = execute(&cfg6).map_err(|e| e.to_string())?;
        let outcome = baseline_ordering(&result);
        first = Some(result.csv());
        outcome
    }));
    passed.push(run(7, "SPR ordering", secs(900), spr_ordering));
    passed.push(run(8, "reconfiguration robustness", secs(1200), reconfiguration_robustness));
    passed.push(run(9, "determinism", secs(900), || {
        let first = first.take().ok_or("first run missing")?;
        let second = execute(&cfg6).map_err(|e| e.to_string())?.csv();
        check(first == second, || "CSV differs between identical runs".into())?;
        Ok(format!("criterion 6 experiment rerun, {} CSV bytes identical", first.len()))
    }));
    passed.push(run(10, "replay and action-space invariants", secs(5), invariants));

    let failed: Vec<usize> = (1..=10).filter(|i| !passed[i - 1]).collect();
    assert!(failed.is_empty(), "criteria failed: {failed:?}");
}
