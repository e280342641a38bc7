//! Randomized attack that only needs to know the feedback space.

use super::{AttackConfig, AttackState, Decision};
use crate::env::{ClickModel, Feedback};
use crate::rng::RngStream;
use crate::stats::clamp_plus;

/// Probability of removing a click on `item`.
///
/// `max over protected a of [ucb(item) - lcb(a)]_+ / ucb(item)`, with
/// `ucb = pre_mean + beta` and `lcb = pre_mean - beta`, clamped to `[0, 1]`.
/// A protected item that was never observed has an infinite bound, so the
/// click is always removed.
pub fn attack_probability(state: &AttackState, config: &AttackConfig, item: usize) -> f64 {
    let b = &config.beta_params;
    let s = &state.per_item[item];
    if s.pulls == 0 {
        return 1.0;
    }
    let upper = s.pre_reward_sum as f64 / s.pulls as f64 + b.radius(s.pulls);
    if upper <= 0.0 {
        return 0.0;
    }
    let mut num = 0.0f64;
    for &a in &state.protected {
        let sa = &state.per_item[a];
        if sa.pulls == 0 {
            return 1.0;
        }
        let lower = sa.pre_reward_sum as f64 / sa.pulls as f64 - b.radius(sa.pulls);
        num = num.max(clamp_plus(upper - lower));
    }
    (num / upper).clamp(0.0, 1.0)
}

/// One round of the randomized attack. Coins come from `rng`, which should
/// be the attacker's own stream.
pub fn general_attack_round(
    state: &mut AttackState,
    config: &AttackConfig,
    kind: ClickModel,
    action: &[usize],
    pre: &Feedback,
    rng: &mut RngStream,
) -> Vec<i8> {
    let t = state.begin_round();
    let k = action.len();
    let first_click = pre.clicks.iter().position(|&c| c == 1);
    let seen = match (kind, first_click) {
        (ClickModel::Cascade, Some(c)) => c + 1,
        _ => k,
    };
    for (pos, (&item, &click)) in action.iter().zip(&pre.clicks).enumerate().take(seen) {
        state.observe_pre(item, click, pos);
    }
    let mut alpha = vec![0i8; k];
    for (pos, (&item, &click)) in action.iter().zip(&pre.clicks).enumerate().take(seen) {
        if click != 1 || state.is_protected[item] {
            continue;
        }
        let prob = attack_probability(state, config, item);
        let attacked = rng.bernoulli(prob);
        if attacked {
            alpha[pos] = 1;
            state.apply_attack(item, 1);
        }
        state.push_decision(|| Decision::Coin {
            round: t,
            item,
            prob,
            attacked,
        });
    }
    // A removed cascade click means the user is seen scanning to the end.
    if kind == ClickModel::Cascade && seen < k && alpha[seen - 1] == 1 {
        for (pos, &item) in action.iter().enumerate().skip(seen) {
            state.observe_pre(item, 0, pos);
        }
    }
    alpha
}
