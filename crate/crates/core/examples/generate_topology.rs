//! Build a multi-domain network, print its shape, apply a few steps of
//! background dynamics and a reconfiguration.
//!
//!     cargo run --example generate_topology -- [domains] [seed]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sdn_sync::topology::{NetworkState, NodeKind, TopologyConfig};

fn main() -> sdn_sync::Result<()> {
    let mut args = std::env::args().skip(1);
    let n_domains = args.next().and_then(|a| a.parse().ok()).unwrap_or(6);
    let seed = args.next().and_then(|a| a.parse().ok()).unwrap_or(7);
    let cfg = TopologyConfig {
        n_domains,
        seed,
        ..TopologyConfig::default()
    };
    let mut net = NetworkState::generate(&cfg)?;

    println!("hash {}", net.structure_hash());
    for d in 0..net.n_domains {
        let switches = net.switches_in(d).count();
        let servers = net
            .nodes
            .iter()
            .filter(|n| n.domain == d && n.kind == NodeKind::Server)
            .count();
        println!(
            "domain {d}: {switches} switches, {servers} servers, volatility {:.2}",
            net.domain_volatility[d]
        );
    }
    let gateways = (0..net.edges.len())
        .filter(|&e| {
            let (a, b) = net.edge_domains(e);
            a != b
        })
        .count();
    println!("{} edges ({gateways} gateways)", net.edges.len());

    let before = net.edge_latencies();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..20 {
        net.step_dynamics(&cfg, &mut rng);
    }
    let drift = before
        .iter()
        .zip(net.edge_latencies())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("after 20 steps: max latency drift {drift:.3} ms");

    let moved = net.reconfigure(&cfg, seed + 1)?;
    println!("reconfigured: hash {}, {} nodes", moved.structure_hash(), moved.node_count());

    let text = net.to_text();
    assert_eq!(NetworkState::from_text(&text)?, net);
    println!("text dump: {} lines, round-trips", text.lines().count());
    Ok(())
}
