use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::loss::{discounted_returns, ppo_clipped, reinforce};
use super::{Agent, AgentConfig, AgentKind, ProblemShape};
use crate::error::{Error, Result};
use crate::nn::{argmax, clip_grad_norm, log_softmax, softmax, Head, Matrix, Mlp};

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryStep {
    pub state: Vec<f64>,
    pub action: usize,
    /// Log-probability of `action` under the policy that collected it.
    pub log_prob: f64,
    pub reward: f64,
}

pub type Trajectory = Vec<TrajectoryStep>;

fn sample_categorical(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Sample (training) or take the most likely action (evaluation); returns
/// the action with its log-probability.
fn policy_action(net: &Mlp, obs: &[f64], explore: bool, rng: &mut ChaCha8Rng) -> Result<(usize, f64)> {
    let cache = net.forward_cached(&Matrix::row_vector(obs))?;
    let logits = cache.logits_row(0, net.output_dim());
    let action = if explore {
        sample_categorical(&softmax(logits), rng)
    } else {
        argmax(logits)
    };
    Ok((action, log_softmax(logits)[action]))
}

fn check_shape(current: &Mlp, net: &Mlp) -> Result<()> {
    if net.head() != Head::Softmax
        || net.input_dim() != current.input_dim()
        || net.output_dim() != current.output_dim()
    {
        return Err(Error::Checkpoint(
            "policy checkpoint shape or head does not match".into(),
        ));
    }
    Ok(())
}

fn stack_states(steps: &[&TrajectoryStep]) -> Result<Matrix> {
    Matrix::from_rows(&steps.iter().map(|s| s.state.as_slice()).collect::<Vec<_>>())
}

pub struct ReinforceAgent {
    config: AgentConfig,
    policy: Mlp,
    rng: ChaCha8Rng,
    episode: Trajectory,
    pending_log_prob: f64,
}

impl ReinforceAgent {
    pub fn new(config: AgentConfig, shape: ProblemShape, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let policy = Mlp::new(shape.controllers, shape.actions, Head::Softmax, &mut rng);
        ReinforceAgent {
            config,
            policy,
            rng,
            episode: Vec::new(),
            pending_log_prob: 0.0,
        }
    }

    pub fn policy(&self) -> &Mlp {
        &self.policy
    }

    /// Ascend `sum_t G_t grad log pi(a_t|s_t)` over one episode.
    pub fn update(&mut self, trajectory: &[TrajectoryStep]) -> Result<()> {
        if trajectory.is_empty() {
            return Ok(());
        }
        let rewards: Vec<f64> = trajectory.iter().map(|s| s.reward).collect();
        let returns = discounted_returns(&rewards, self.config.gamma);
        let refs: Vec<&TrajectoryStep> = trajectory.iter().collect();
        let states = stack_states(&refs)?;
        let actions: Vec<usize> = trajectory.iter().map(|s| s.action).collect();
        let (_, mut grads) = reinforce(&self.policy, &states, &actions, &returns)?;
        clip_grad_norm(&mut grads, self.config.grad_clip);
        self.policy.adam_step(&grads, self.config.learning_rate());
        Ok(())
    }
}

impl Agent for ReinforceAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::Reinforce
    }

    fn act(&mut self, observation: &[f64], explore: bool) -> Result<usize> {
        let (action, log_prob) = policy_action(&self.policy, observation, explore, &mut self.rng)?;
        self.pending_log_prob = log_prob;
        Ok(action)
    }

    fn observe(&mut self, observation: &[f64], action: usize, reward: f64, _next: &[f64], done: bool) -> Result<()> {
        self.episode.push(TrajectoryStep {
            state: observation.to_vec(),
            action,
            log_prob: self.pending_log_prob,
            reward: reward * self.config.reward_scale,
        });
        if done {
            let episode = std::mem::take(&mut self.episode);
            self.update(&episode)?;
        }
        Ok(())
    }

    fn network(&self) -> Option<&Mlp> {
        Some(&self.policy)
    }

    fn load_network(&mut self, net: Mlp) -> Result<()> {
        check_shape(&self.policy, &net)?;
        self.policy = net;
        Ok(())
    }
}

/// Diagnostics from one PPO update.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PpoUpdateStats {
    /// Probability ratios of the first minibatch of the first epoch,
    /// before any parameter change.
    pub initial_ratios: Vec<f64>,
    pub minibatches: usize,
}

pub struct PpoAgent {
    config: AgentConfig,
    policy: Mlp,
    rng: ChaCha8Rng,
    episode: Trajectory,
    rollout: Vec<Trajectory>,
    pending_log_prob: f64,
    last_stats: Option<PpoUpdateStats>,
}

impl PpoAgent {
    pub fn new(config: AgentConfig, shape: ProblemShape, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let policy = Mlp::new(shape.controllers, shape.actions, Head::Softmax, &mut rng);
        PpoAgent {
            config,
            policy,
            rng,
            episode: Vec::new(),
            rollout: Vec::new(),
            pending_log_prob: 0.0,
            last_stats: None,
        }
    }

    pub fn policy(&self) -> &Mlp {
        &self.policy
    }

    pub fn last_stats(&self) -> Option<&PpoUpdateStats> {
        self.last_stats.as_ref()
    }

    fn rollout_len(&self) -> usize {
        self.rollout.iter().map(Vec::len).sum()
    }

    /// Clipped-surrogate update over a batch of trajectories collected by
    /// the current policy. Advantages are discounted returns minus their
    /// batch mean.
    pub fn update(&mut self, trajectories: &[Trajectory]) -> Result<PpoUpdateStats> {
        let mut steps: Vec<&TrajectoryStep> = Vec::new();
        let mut returns = Vec::new();
        for traj in trajectories {
            let rewards: Vec<f64> = traj.iter().map(|s| s.reward).collect();
            returns.extend(discounted_returns(&rewards, self.config.gamma));
            steps.extend(traj.iter());
        }
        let mut stats = PpoUpdateStats::default();
        if steps.is_empty() {
            return Ok(stats);
        }
        let mean = returns.iter().sum::<f64>() / returns.len() as f64;
        let advantages: Vec<f64> = returns.iter().map(|g| g - mean).collect();

        let mut order: Vec<usize> = (0..steps.len()).collect();
        let mb = self.config.batch_size.max(1);
        for _ in 0..self.config.ppo_epochs {
            order.shuffle(&mut self.rng);
            for chunk in order.chunks(mb) {
                let picked: Vec<&TrajectoryStep> = chunk.iter().map(|&i| steps[i]).collect();
                let states = stack_states(&picked)?;
                let actions: Vec<usize> = picked.iter().map(|s| s.action).collect();
                let old: Vec<f64> = picked.iter().map(|s| s.log_prob).collect();
                let adv: Vec<f64> = chunk.iter().map(|&i| advantages[i]).collect();
                if stats.minibatches == 0 {
                    let probs = self.policy.forward_cached(&states)?;
                    stats.initial_ratios = picked
                        .iter()
                        .enumerate()
                        .map(|(b, s)| {
                            let lp = log_softmax(probs.logits_row(b, self.policy.output_dim()));
                            (lp[s.action] - s.log_prob).exp()
                        })
                        .collect();
                }
                let (_, mut grads) =
                    ppo_clipped(&self.policy, &states, &actions, &old, &adv, self.config.clip_eps)?;
                clip_grad_norm(&mut grads, self.config.grad_clip);
                self.policy.adam_step(&grads, self.config.learning_rate());
                stats.minibatches += 1;
            }
        }
        Ok(stats)
    }
}

impl Agent for PpoAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::Ppo
    }

    fn act(&mut self, observation: &[f64], explore: bool) -> Result<usize> {
        let (action, log_prob) = policy_action(&self.policy, observation, explore, &mut self.rng)?;
        self.pending_log_prob = log_prob;
        Ok(action)
    }

    fn observe(&mut self, observation: &[f64], action: usize, reward: f64, _next: &[f64], done: bool) -> Result<()> {
        self.episode.push(TrajectoryStep {
            state: observation.to_vec(),
            action,
            log_prob: self.pending_log_prob,
            reward: reward * self.config.reward_scale,
        });
        if done {
            self.rollout.push(std::mem::take(&mut self.episode));
            if self.rollout_len() >= self.config.ppo_rollout_steps {
                let batch = std::mem::take(&mut self.rollout);
                self.last_stats = Some(self.update(&batch)?);
            }
        }
        Ok(())
    }

    fn network(&self) -> Option<&Mlp> {
        Some(&self.policy)
    }

    fn load_network(&mut self, net: Mlp) -> Result<()> {
        check_shape(&self.policy, &net)?;
        self.policy = net;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(actions: usize) -> ProblemShape {
        ProblemShape {
            controllers: 2,
            sync_rate: 1,
            actions,
            total_train_steps: 0,
        }
    }

    #[test]
    fn empty_trajectory_is_noop() {
        let mut agent = ReinforceAgent::new(AgentConfig::new(AgentKind::Reinforce), shape(2), 0);
        let before = agent.policy().clone();
        agent.update(&[]).unwrap();
        assert_eq!(agent.policy(), &before);
    }

    #[test]
    fn collection_ratios_start_at_one() {
        let cfg = AgentConfig {
            kind: AgentKind::Ppo,
            ppo_rollout_steps: 20,
            batch_size: 8,
            ..AgentConfig::default()
        };
        let mut agent = PpoAgent::new(cfg, shape(3), 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..4 {
            for t in 0..5 {
                let obs = vec![rng.gen_range(0.0..1.0), t as f64 / 5.0];
                let a = agent.act(&obs, true).unwrap();
                agent.observe(&obs, a, if a == 0 { 1.0 } else { -1.0 }, &obs, t == 4).unwrap();
            }
        }
        let stats = agent.last_stats().expect("one update after 20 steps");
        assert_eq!(stats.initial_ratios.len(), 8);
        assert!(stats.initial_ratios.iter().all(|&r| r == 1.0));
        // 20 samples, minibatch 8 -> 3 per epoch, 5 epochs.
        assert_eq!(stats.minibatches, 15);
    }

    #[test]
    fn reinforce_solves_two_armed_bandit() {
        let mut solved = 0;
        for seed in 0..10 {
            let cfg = AgentConfig {
                kind: AgentKind::Reinforce,
                reward_scale: 1.0,
                ..AgentConfig::default()
            };
            let mut agent = ReinforceAgent::new(cfg, shape(2), seed);
            let obs = [0.0, 0.0];
            for _ in 0..3000 {
                let a = agent.act(&obs, true).unwrap();
                agent.observe(&obs, a, if a == 0 { 1.0 } else { 0.0 }, &obs, true).unwrap();
            }
            let p = agent.policy().forward_one(&obs).unwrap();
            if p[0] > 0.95 {
                solved += 1;
            }
        }
        assert!(solved >= 9, "solved {solved}/10");
    }
}
