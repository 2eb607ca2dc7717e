//! Training losses and their exact parameter gradients.

use crate::error::{Error, Result};
use crate::nn::{log_softmax, softmax, Gradients, Matrix, Mlp};

/// `G_t = r_t + gamma * G_{t+1}`.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (t, &r) in rewards.iter().enumerate().rev() {
        acc = r + gamma * acc;
        out[t] = acc;
    }
    out
}

/// One term of the clipped surrogate: `min(r A, clip(r, 1-eps, 1+eps) A)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip_eps: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps);
    (ratio * advantage).min(clipped * advantage)
}

fn check_lengths(batch: usize, others: &[usize]) -> Result<()> {
    for &len in others {
        if len != batch {
            return Err(Error::Dimension {
                expected: batch,
                got: len,
            });
        }
    }
    Ok(())
}

/// Mean squared error between `Q(s_b, a_b)` and `targets[b]`, on the taken
/// action only.
pub fn q_regression(
    net: &Mlp,
    states: &Matrix,
    actions: &[usize],
    targets: &[f64],
) -> Result<(f64, Gradients)> {
    let batch = states.rows();
    check_lengths(batch, &[actions.len(), targets.len()])?;
    let cache = net.forward_cached(states)?;
    let width = net.output_dim();
    let mut upstream = vec![0.0; batch * width];
    let mut loss = 0.0;
    for b in 0..batch {
        let err = cache.output_row(b, width)[actions[b]] - targets[b];
        loss += err * err;
        upstream[b * width + actions[b]] = 2.0 * err / batch as f64;
    }
    Ok((loss / batch as f64, net.backward(&cache, &upstream)?))
}

/// `-sum_t G_t log pi(a_t | s_t)`; descending it ascends the policy
/// gradient objective.
pub fn reinforce(
    net: &Mlp,
    states: &Matrix,
    actions: &[usize],
    returns: &[f64],
) -> Result<(f64, Gradients)> {
    let batch = states.rows();
    check_lengths(batch, &[actions.len(), returns.len()])?;
    let cache = net.forward_cached(states)?;
    let width = net.output_dim();
    let mut upstream = vec![0.0; batch * width];
    let mut loss = 0.0;
    for b in 0..batch {
        let logits = cache.logits_row(b, width);
        let logp = log_softmax(logits);
        let p = softmax(logits);
        let g = returns[b];
        loss -= g * logp[actions[b]];
        for o in 0..width {
            let onehot = if o == actions[b] { 1.0 } else { 0.0 };
            upstream[b * width + o] = -g * (onehot - p[o]);
        }
    }
    Ok((loss, net.backward_logits(&cache, &upstream)?))
}

/// Negated mean clipped surrogate over the batch.
pub fn ppo_clipped(
    net: &Mlp,
    states: &Matrix,
    actions: &[usize],
    old_log_probs: &[f64],
    advantages: &[f64],
    clip_eps: f64,
) -> Result<(f64, Gradients)> {
    let batch = states.rows();
    check_lengths(batch, &[actions.len(), old_log_probs.len(), advantages.len()])?;
    let cache = net.forward_cached(states)?;
    let width = net.output_dim();
    let n = batch as f64;
    let mut upstream = vec![0.0; batch * width];
    let mut objective = 0.0;
    for b in 0..batch {
        let logits = cache.logits_row(b, width);
        let logp = log_softmax(logits);
        let p = softmax(logits);
        let a = actions[b];
        let adv = advantages[b];
        let ratio = (logp[a] - old_log_probs[b]).exp();
        let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps);
        objective += (ratio * adv).min(clipped * adv);
        // Gradient flows only when the unclipped branch is the minimum.
        if ratio * adv <= clipped * adv {
            for o in 0..width {
                let onehot = if o == a { 1.0 } else { 0.0 };
                upstream[b * width + o] = -adv * ratio * (onehot - p[o]) / n;
            }
        }
    }
    Ok((-objective / n, net.backward_logits(&cache, &upstream)?))
}
