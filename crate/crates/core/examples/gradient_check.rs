//! Compare the analytic gradients of the three training losses with central
//! finite differences on a small random network.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdn_sync::agents::loss::{ppo_clipped, q_regression, reinforce};
use sdn_sync::nn::{Gradients, Head, Matrix, Mlp};

fn max_rel_error(net: &mut Mlp, loss: impl Fn(&Mlp) -> (f64, Gradients)) -> f64 {
    let (_, grads) = loss(net);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..net.params().len() {
        let orig = net.params()[i];
        net.params_mut()[i] = orig + h;
        let up = loss(net).0;
        net.params_mut()[i] = orig - h;
        let down = loss(net).0;
        net.params_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let scale = grads.0[i].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((grads.0[i] - numeric).abs() / scale);
    }
    worst
}

fn main() -> sdn_sync::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let rows: Vec<Vec<f64>> = (0..4).map(|_| (0..5).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
    let states = Matrix::from_rows(&rows)?;
    let actions = [0, 3, 7, 3];
    let targets = [0.5, -1.0, 0.25, 2.0];

    let mut q = Mlp::with_hidden(5, 12, 10, Head::Linear, &mut rng);
    let err = max_rel_error(&mut q, |n| q_regression(n, &states, &actions, &targets).unwrap());
    println!("q regression   {err:.2e}");

    let mut pi = Mlp::with_hidden(5, 12, 10, Head::Softmax, &mut rng);
    let err = max_rel_error(&mut pi, |n| reinforce(n, &states, &actions, &targets).unwrap());
    println!("reinforce      {err:.2e}");

    let old: Vec<f64> = rows
        .iter()
        .zip(actions)
        .map(|(r, a)| pi.forward_one(r).unwrap()[a].ln() - 0.05)
        .collect();
    let err = max_rel_error(&mut pi, |n| ppo_clipped(n, &states, &actions, &old, &targets, 0.1).unwrap());
    println!("ppo clipped    {err:.2e}");
    Ok(())
}
