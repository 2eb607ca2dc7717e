//! Synchronization policies behind one act/observe interface.
//!
//! Value-based agents (DQN, DDQN) learn from replay every step.
//! Policy-based agents (REINFORCE, PPO) learn from whole episodes.
//! Random and round-robin are the fixed baselines.

mod baseline;
pub mod loss;
mod policy;
pub mod replay;
mod value;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{argmax, Mlp};

pub use baseline::{random_action, round_robin_action, RandomAgent, RoundRobinAgent};
pub use policy::{PpoAgent, ReinforceAgent, Trajectory, TrajectoryStep};
pub use replay::{ReplayBuffer, Transition};
pub use value::{ddqn_target, dqn_target, ValueAgent};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Dqn,
    Ddqn,
    Reinforce,
    Ppo,
    Random,
    RoundRobin,
}

impl AgentKind {
    pub const ALL: [AgentKind; 6] = [
        AgentKind::Dqn,
        AgentKind::Ddqn,
        AgentKind::Reinforce,
        AgentKind::Ppo,
        AgentKind::Random,
        AgentKind::RoundRobin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Dqn => "dqn",
            AgentKind::Ddqn => "ddqn",
            AgentKind::Reinforce => "reinforce",
            AgentKind::Ppo => "ppo",
            AgentKind::Random => "random",
            AgentKind::RoundRobin => "round_robin",
        }
    }

    pub fn is_value_based(self) -> bool {
        matches!(self, AgentKind::Dqn | AgentKind::Ddqn)
    }

    pub fn is_policy_based(self) -> bool {
        matches!(self, AgentKind::Reinforce | AgentKind::Ppo)
    }

    pub fn default_lr(self) -> f64 {
        if self.is_policy_based() {
            0.001
        } else {
            0.01
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AgentKind::ALL
            .into_iter()
            .find(|k| k.name() == s || (s == "round-robin" && *k == AgentKind::RoundRobin))
            .ok_or_else(|| {
                Error::config(
                    "agent.kind",
                    format!("unknown agent `{s}` (dqn, ddqn, reinforce, ppo, random, round_robin)"),
                )
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub kind: AgentKind,
    pub gamma: f64,
    /// `None` picks 0.01 for value agents, 0.001 for policy agents.
    pub lr: Option<f64>,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub eps_start: f64,
    pub eps_min: f64,
    pub eps_decay_factor: f64,
    /// DDQN: learn steps between online -> target copies.
    pub target_sync_interval: usize,
    pub clip_eps: f64,
    pub ppo_epochs: usize,
    /// PPO: collected steps (whole episodes) per update.
    pub ppo_rollout_steps: usize,
    pub grad_clip: f64,
    /// Multiplier applied to rewards before learning.
    pub reward_scale: f64,
}

impl AgentConfig {
    pub fn new(kind: AgentKind) -> Self {
        AgentConfig {
            kind,
            ..AgentConfig::default()
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr.unwrap_or_else(|| self.kind.default_lr())
    }
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            kind: AgentKind::Dqn,
            gamma: 0.1,
            lr: None,
            batch_size: 256,
            replay_capacity: replay::DEFAULT_CAPACITY,
            eps_start: 1.0,
            eps_min: 0.01,
            eps_decay_factor: 10.0,
            target_sync_interval: 100,
            clip_eps: 0.1,
            ppo_epochs: 5,
            ppo_rollout_steps: 256,
            grad_clip: 7.0,
            reward_scale: 1e-4,
        }
    }
}

/// `max(eps_min, eps_start * decay^(-step / total_steps))`: a `decay`-fold
/// drop over the training horizon.
pub fn epsilon_schedule(step: usize, total_steps: usize, config: &AgentConfig) -> f64 {
    if total_steps == 0 {
        return config.eps_start.max(config.eps_min);
    }
    let frac = step as f64 / total_steps as f64;
    (config.eps_start * config.eps_decay_factor.powf(-frac)).max(config.eps_min)
}

/// With probability `epsilon` a uniform action, otherwise the greedy one
/// (ties to the lowest index).
pub fn select_action_eps_greedy(q_values: &[f64], epsilon: f64, rng: &mut impl Rng) -> usize {
    if rng.gen::<f64>() < epsilon {
        rng.gen_range(0..q_values.len())
    } else {
        argmax(q_values)
    }
}

/// Common interface the experiment harness drives.
pub trait Agent: Send {
    fn kind(&self) -> AgentKind;

    /// Choose an action. `explore` is true while training; evaluation is
    /// greedy (value agents) or argmax of the policy (policy agents).
    fn act(&mut self, observation: &[f64], explore: bool) -> Result<usize>;

    /// Feed back the result of the last training action.
    fn observe(
        &mut self,
        observation: &[f64],
        action: usize,
        reward: f64,
        next_observation: &[f64],
        done: bool,
    ) -> Result<()>;

    fn network(&self) -> Option<&Mlp> {
        None
    }

    /// Replace the learned weights, e.g. from a checkpoint.
    fn load_network(&mut self, _net: Mlp) -> Result<()> {
        Err(Error::Checkpoint(format!(
            "{} agent has no network",
            self.kind()
        )))
    }
}

/// Shape of the decision problem an agent is built for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProblemShape {
    pub controllers: usize,
    pub sync_rate: usize,
    pub actions: usize,
    /// Training steps planned, for the exploration schedule.
    pub total_train_steps: usize,
}

pub fn build_agent(config: &AgentConfig, shape: ProblemShape, seed: u64) -> Box<dyn Agent> {
    match config.kind {
        AgentKind::Dqn | AgentKind::Ddqn => Box::new(ValueAgent::new(config.clone(), shape, seed)),
        AgentKind::Reinforce => Box::new(ReinforceAgent::new(config.clone(), shape, seed)),
        AgentKind::Ppo => Box::new(PpoAgent::new(config.clone(), shape, seed)),
        AgentKind::Random => Box::new(RandomAgent::new(shape.actions, seed)),
        AgentKind::RoundRobin => {
            Box::new(RoundRobinAgent::new(shape.controllers, shape.sync_rate))
        }
    }
}
