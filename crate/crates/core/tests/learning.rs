use sdn_sync::agents::{build_agent, AgentConfig, AgentKind, ProblemShape};

/// Single-state, six-arm bandit with fixed penalties in environment units.
const ARMS: [f64; 6] = [-3000.0, -1200.0, -5000.0, -400.0, -8000.0, -2500.0];
const BEST: usize = 3;

fn solves_bandit(kind: AgentKind, steps: usize, seed: u64) -> bool {
    let shape = ProblemShape {
        controllers: 4,
        sync_rate: 2,
        actions: ARMS.len(),
        total_train_steps: steps,
    };
    let mut agent = build_agent(&AgentConfig::new(kind), shape, seed);
    let obs = [0.2, 0.2, 0.2, 0.2];
    for _ in 0..steps {
        let a = agent.act(&obs, true).unwrap();
        agent.observe(&obs, a, ARMS[a], &obs, true).unwrap();
    }
    agent.act(&obs, false).unwrap() == BEST
}

#[test]
fn dqn_finds_best_arm_within_2000_steps() {
    let solved = (0..10).filter(|&s| solves_bandit(AgentKind::Dqn, 2000, s)).count();
    assert!(solved >= 9, "solved {solved}/10");
}

#[test]
fn ddqn_finds_best_arm_within_2000_steps() {
    let solved = (0..10).filter(|&s| solves_bandit(AgentKind::Ddqn, 2000, s)).count();
    assert!(solved >= 9, "solved {solved}/10");
}

#[test]
fn evaluation_does_not_change_weights() {
    for kind in [AgentKind::Dqn, AgentKind::Ppo, AgentKind::Reinforce] {
        let shape = ProblemShape {
            controllers: 4,
            sync_rate: 2,
            actions: 6,
            total_train_steps: 100,
        };
        let mut agent = build_agent(&AgentConfig::new(kind), shape, 1);
        let before = agent.network().unwrap().fingerprint();
        for i in 0..50 {
            agent.act(&[i as f64 / 50.0, 0.0, 0.5, 1.0], false).unwrap();
        }
        assert_eq!(agent.network().unwrap().fingerprint(), before, "{kind}");
    }
}
