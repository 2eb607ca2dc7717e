use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::q_regression;
use super::replay::{ReplayBuffer, Transition};
use super::{epsilon_schedule, select_action_eps_greedy, Agent, AgentConfig, AgentKind, ProblemShape};
use crate::error::{Error, Result};
use crate::nn::{argmax, clip_grad_norm, Head, Matrix, Mlp};

/// `y = r` at terminal states, else `r + gamma * max_a' Q(s', a')`.
pub fn dqn_target(reward: f64, next_q: &[f64], gamma: f64, done: bool) -> f64 {
    if done {
        reward
    } else {
        reward + gamma * next_q.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Action picked by the online values, value read from the target values.
pub fn ddqn_target(
    reward: f64,
    online_next_q: &[f64],
    target_next_q: &[f64],
    gamma: f64,
    done: bool,
) -> f64 {
    if done {
        reward
    } else {
        reward + gamma * target_next_q[argmax(online_next_q)]
    }
}

/// DQN, or DDQN with a periodically copied target network.
pub struct ValueAgent {
    config: AgentConfig,
    online: Mlp,
    target: Option<Mlp>,
    buffer: ReplayBuffer,
    rng: ChaCha8Rng,
    total_steps: usize,
    acted: usize,
    learn_steps: usize,
    last_loss: Option<f64>,
}

impl ValueAgent {
    pub fn new(config: AgentConfig, shape: ProblemShape, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let online = Mlp::new(shape.controllers, shape.actions, Head::Linear, &mut rng);
        let target = (config.kind == AgentKind::Ddqn).then(|| online.clone());
        ValueAgent {
            buffer: ReplayBuffer::new(config.replay_capacity),
            config,
            online,
            target,
            rng,
            total_steps: shape.total_train_steps,
            acted: 0,
            learn_steps: 0,
            last_loss: None,
        }
    }

    pub fn online(&self) -> &Mlp {
        &self.online
    }

    pub fn target(&self) -> Option<&Mlp> {
        self.target.as_ref()
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn push(&mut self, t: Transition) {
        self.buffer.push(t);
    }

    pub fn learn_steps(&self) -> usize {
        self.learn_steps
    }

    pub fn last_loss(&self) -> Option<f64> {
        self.last_loss
    }

    pub fn epsilon(&self) -> f64 {
        epsilon_schedule(self.acted.min(self.total_steps), self.total_steps, &self.config)
    }

    /// One minibatch update. Returns the loss, or `None` when the buffer
    /// is smaller than a batch.
    pub fn learn_step(&mut self) -> Result<Option<f64>> {
        let batch = self.config.batch_size;
        let gamma = self.config.gamma;
        let Some(sample) = self.buffer.sample(batch, &mut self.rng) else {
            return Ok(None);
        };
        let states = Matrix::from_rows(&sample.iter().map(|t| t.state.as_slice()).collect::<Vec<_>>())?;
        let next = Matrix::from_rows(
            &sample
                .iter()
                .map(|t| t.next_state.as_slice())
                .collect::<Vec<_>>(),
        )?;
        let actions: Vec<usize> = sample.iter().map(|t| t.action).collect();

        let online_next = self.online.forward(&next)?;
        let targets: Vec<f64> = match &self.target {
            None => sample
                .iter()
                .enumerate()
                .map(|(b, t)| dqn_target(t.reward, online_next.row(b), gamma, t.done))
                .collect(),
            Some(target) => {
                let target_next = target.forward(&next)?;
                sample
                    .iter()
                    .enumerate()
                    .map(|(b, t)| {
                        ddqn_target(t.reward, online_next.row(b), target_next.row(b), gamma, t.done)
                    })
                    .collect()
            }
        };

        let (loss, mut grads) = q_regression(&self.online, &states, &actions, &targets)?;
        clip_grad_norm(&mut grads, self.config.grad_clip);
        self.online.adam_step(&grads, self.config.learning_rate());
        self.learn_steps += 1;
        if let Some(target) = &mut self.target {
            if self.learn_steps.is_multiple_of(self.config.target_sync_interval.max(1)) {
                target.copy_weights_from(&self.online);
            }
        }
        self.last_loss = Some(loss);
        Ok(Some(loss))
    }
}

impl Agent for ValueAgent {
    fn kind(&self) -> AgentKind {
        self.config.kind
    }

    fn act(&mut self, observation: &[f64], explore: bool) -> Result<usize> {
        let q = self.online.forward_one(observation)?;
        if !explore {
            return Ok(argmax(&q));
        }
        let eps = self.epsilon();
        self.acted += 1;
        Ok(select_action_eps_greedy(&q, eps, &mut self.rng))
    }

    fn observe(
        &mut self,
        observation: &[f64],
        action: usize,
        reward: f64,
        next_observation: &[f64],
        done: bool,
    ) -> Result<()> {
        self.buffer.push(Transition {
            state: observation.to_vec(),
            action,
            reward: reward * self.config.reward_scale,
            next_state: next_observation.to_vec(),
            done,
        });
        self.learn_step()?;
        Ok(())
    }

    fn network(&self) -> Option<&Mlp> {
        Some(&self.online)
    }

    fn load_network(&mut self, net: Mlp) -> Result<()> {
        if net.input_dim() != self.online.input_dim() || net.output_dim() != self.online.output_dim() {
            return Err(Error::Checkpoint(format!(
                "network shape {}x{} does not match agent {}x{}",
                net.input_dim(),
                net.output_dim(),
                self.online.input_dim(),
                self.online.output_dim()
            )));
        }
        if let Some(t) = &mut self.target {
            *t = net.clone();
        }
        self.online = net;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dqn_target_hand_values() {
        assert!((dqn_target(0.0, &[3.0, 10.0, -1.0], 0.1, false) - 1.0).abs() < 1e-15);
        assert_eq!(dqn_target(4.0, &[100.0], 0.1, true), 4.0);
        assert_eq!(dqn_target(-10_000.0, &[0.0, -5.0], 0.1, false), -10_000.0);
    }

    #[test]
    fn ddqn_reads_target_at_online_argmax() {
        let online = [0.0, 1.0, 3.0];
        let target = [9.0, 0.0, 5.0];
        assert!((ddqn_target(1.0, &online, &target, 0.1, false) - 1.5).abs() < 1e-15);
        // Plain DQN on the target values would use max = 9.
        assert!((dqn_target(1.0, &target, 0.1, false) - 1.9).abs() < 1e-15);
        // Identical nets collapse to DQN.
        assert_eq!(
            ddqn_target(1.0, &target, &target, 0.1, false),
            dqn_target(1.0, &target, 0.1, false)
        );
        assert_eq!(ddqn_target(2.0, &online, &target, 0.1, true), 2.0);
    }

    fn shape() -> ProblemShape {
        ProblemShape {
            controllers: 4,
            sync_rate: 2,
            actions: 6,
            total_train_steps: 1000,
        }
    }

    #[test]
    fn insufficient_buffer_is_noop() {
        let mut agent = ValueAgent::new(AgentConfig::default(), shape(), 0);
        let before = agent.online().clone();
        assert_eq!(agent.learn_step().unwrap(), None);
        assert_eq!(agent.online(), &before);
    }

    #[test]
    fn satisfied_targets_leave_params() {
        let cfg = AgentConfig {
            batch_size: 8,
            ..AgentConfig::default()
        };
        let mut agent = ValueAgent::new(cfg, shape(), 1);
        let s = vec![0.1, 0.2, 0.3, 0.4];
        let q = agent.online().forward_one(&s).unwrap();
        for _ in 0..8 {
            agent.push(Transition {
                state: s.clone(),
                action: 3,
                reward: q[3],
                next_state: s.clone(),
                done: true,
            });
        }
        let before = agent.online().params().to_vec();
        assert_eq!(agent.learn_step().unwrap(), Some(0.0));
        assert_eq!(agent.online().params(), before.as_slice());
    }

    #[test]
    fn loss_decreases_on_frozen_buffer() {
        let cfg = AgentConfig {
            batch_size: 32,
            ..AgentConfig::default()
        };
        let mut agent = ValueAgent::new(cfg, shape(), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        use rand::Rng;
        for _ in 0..64 {
            let s: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..1.0)).collect();
            let a = rng.gen_range(0..6);
            agent.push(Transition {
                reward: s[a % 4] - 0.5,
                state: s.clone(),
                action: a,
                next_state: s,
                done: true,
            });
        }
        let first: f64 = (0..5).map(|_| agent.learn_step().unwrap().unwrap()).sum::<f64>() / 5.0;
        for _ in 0..90 {
            agent.learn_step().unwrap();
        }
        let last: f64 = (0..5).map(|_| agent.learn_step().unwrap().unwrap()).sum::<f64>() / 5.0;
        assert!(last < first * 0.5, "first {first}, last {last}");
    }

    #[test]
    fn target_copied_on_interval() {
        let cfg = AgentConfig {
            kind: AgentKind::Ddqn,
            batch_size: 4,
            target_sync_interval: 3,
            ..AgentConfig::default()
        };
        let mut agent = ValueAgent::new(cfg, shape(), 4);
        for i in 0..4 {
            agent.push(Transition {
                state: vec![0.0, 0.1, 0.2, i as f64 / 4.0],
                action: i,
                reward: 1.0,
                next_state: vec![0.0; 4],
                done: false,
            });
        }
        let initial = agent.target().unwrap().clone();
        agent.learn_step().unwrap();
        agent.learn_step().unwrap();
        assert_eq!(agent.target().unwrap().params(), initial.params());
        assert_ne!(agent.online().params(), initial.params());
        agent.learn_step().unwrap();
        assert_eq!(agent.target().unwrap().params(), agent.online().params());
    }
}
