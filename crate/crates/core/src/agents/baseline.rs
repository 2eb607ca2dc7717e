use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Agent, AgentKind};
use crate::error::Result;
use crate::view_sync::{binomial, subset_to_index, SyncAction};

/// Sync `{cursor, ..., cursor + SR - 1} mod n`, then advance the cursor by SR.
pub fn round_robin_action(cursor: usize, n: usize, sync_rate: usize) -> (usize, usize) {
    let subset: Vec<usize> = (0..sync_rate).map(|k| (cursor + k) % n).collect();
    let action = SyncAction::new(subset, n, sync_rate).expect("SR <= n");
    (subset_to_index(&action, n), (cursor + sync_rate) % n)
}

pub fn random_action(n: usize, sync_rate: usize, rng: &mut impl Rng) -> usize {
    rng.gen_range(0..binomial(n, sync_rate) as usize)
}

pub struct RandomAgent {
    actions: usize,
    rng: ChaCha8Rng,
}

impl RandomAgent {
    pub fn new(actions: usize, seed: u64) -> Self {
        RandomAgent {
            actions,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Agent for RandomAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::Random
    }

    fn act(&mut self, _observation: &[f64], _explore: bool) -> Result<usize> {
        Ok(self.rng.gen_range(0..self.actions))
    }

    fn observe(&mut self, _: &[f64], _: usize, _: f64, _: &[f64], _: bool) -> Result<()> {
        Ok(())
    }
}

pub struct RoundRobinAgent {
    n: usize,
    sync_rate: usize,
    cursor: usize,
}

impl RoundRobinAgent {
    pub fn new(n: usize, sync_rate: usize) -> Self {
        RoundRobinAgent {
            n,
            sync_rate,
            cursor: 0,
        }
    }
}

impl Agent for RoundRobinAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::RoundRobin
    }

    fn act(&mut self, _observation: &[f64], _explore: bool) -> Result<usize> {
        let (index, next) = round_robin_action(self.cursor, self.n, self.sync_rate);
        self.cursor = next;
        Ok(index)
    }

    fn observe(&mut self, _: &[f64], _: usize, _: f64, _: &[f64], _: bool) -> Result<()> {
        Ok(())
    }
}
